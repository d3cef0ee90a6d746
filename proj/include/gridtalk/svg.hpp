#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "util.hpp"

namespace gridtalk {

// Just enough SVG to draw grids and line charts. All numbers go through
// format_double, so output is deterministic.
class SvgBuilder {
public:
    SvgBuilder(double width, double height) : w_(width), h_(height) {
        body_ += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + format_double(w_) +
                 "\" height=\"" + format_double(h_) + "\" viewBox=\"0 0 " + format_double(w_) +
                 " " + format_double(h_) + "\">\n";
    }

    void rect(double x, double y, double w, double h, const std::string& fill,
              const std::string& stroke = "", double opacity = 1.0) {
        body_ += "<rect x=\"" + format_double(x) + "\" y=\"" + format_double(y) + "\" width=\"" +
                 format_double(w) + "\" height=\"" + format_double(h) + "\" fill=\"" + fill +
                 "\"";
        if (opacity != 1.0) body_ += " fill-opacity=\"" + format_double(opacity) + "\"";
        if (!stroke.empty()) body_ += " stroke=\"" + stroke + "\" stroke-width=\"1\"";
        body_ += "/>\n";
    }

    void line(double x1, double y1, double x2, double y2, const std::string& stroke,
              double width = 1.0) {
        body_ += "<line x1=\"" + format_double(x1) + "\" y1=\"" + format_double(y1) +
                 "\" x2=\"" + format_double(x2) + "\" y2=\"" + format_double(y2) +
                 "\" stroke=\"" + stroke + "\" stroke-width=\"" + format_double(width) + "\"/>\n";
    }

    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke,
                  double width = 1.5) {
        body_ += "<polyline fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" +
                 format_double(width) + "\" points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i) body_ += ' ';
            body_ += format_double(pts[i].first) + "," + format_double(pts[i].second);
        }
        body_ += "\"/>\n";
    }

    void polygon(const std::vector<std::pair<double, double>>& pts, const std::string& fill,
                 double opacity = 0.25) {
        body_ += "<polygon fill=\"" + fill + "\" fill-opacity=\"" + format_double(opacity) +
                 "\" points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i) body_ += ' ';
            body_ += format_double(pts[i].first) + "," + format_double(pts[i].second);
        }
        body_ += "\"/>\n";
    }

    void text(double x, double y, const std::string& s, double size = 12.0,
              const std::string& fill = "#222", const std::string& anchor = "start") {
        body_ += "<text x=\"" + format_double(x) + "\" y=\"" + format_double(y) +
                 "\" font-size=\"" + format_double(size) +
                 "\" font-family=\"sans-serif\" fill=\"" + fill + "\" text-anchor=\"" + anchor +
                 "\">" + escape(s) + "</text>\n";
    }

    std::string str() const { return body_ + "</svg>\n"; }

    void save(const std::filesystem::path& path) const {
        std::ofstream f(path);
        if (!f) throw std::runtime_error("svg: cannot open " + path.string());
        f << str();
    }

private:
    static std::string escape(const std::string& s) {
        std::string out;
        for (char c : s) {
            switch (c) {
                case '&': out += "&amp;"; break;
                case '<': out += "&lt;"; break;
                case '>': out += "&gt;"; break;
                default: out += c;
            }
        }
        return out;
    }
    double w_, h_;
    std::string body_;
};

}  // namespace gridtalk
