#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "metrics.hpp"
#include "svg.hpp"
#include "trace.hpp"
#include "util.hpp"

namespace gridtalk {

// --- protocol heatmap ----------------------------------------------------------

// Per-cell tally of what was said and done there. Keys are (symbol, action)
// with symbol -1 for silent steps; maps keep output order deterministic.
struct CellProtocol {
    std::int64_t visits = 0;
    std::int64_t solicits = 0;
    std::map<std::pair<int, int>, std::int64_t> symbol_action;
};

struct ProtocolHeatmap {
    LayoutId layout = LayoutId::tmaze;
    std::array<CellProtocol, kGridSide * kGridSide> cells;
    std::int64_t episodes = 0;
    std::int64_t steps = 0;
};

inline ProtocolHeatmap protocol_heatmap(std::span<const EpisodeTrace> traces) {
    if (traces.empty()) throw std::runtime_error("heatmap: no traces");
    ProtocolHeatmap h;
    h.layout = traces.front().layout;
    for (const auto& t : traces) {
        if (t.layout != h.layout) throw std::runtime_error("heatmap: traces mix layouts");
        h.episodes += 1;
        for (const auto& st : t.steps) {
            CellProtocol& c = h.cells[st.cell.y * kGridSide + st.cell.x];
            c.visits += 1;
            if (st.solicited) c.solicits += 1;
            c.symbol_action[{st.symbol, static_cast<int>(st.action)}] += 1;
            h.steps += 1;
        }
    }
    return h;
}

struct CellSummary {
    std::optional<int> dominant_symbol;  // most frequent delivered symbol, if any
    double dominant_fraction = 0.0;      // of delivered messages in this cell
    double solicitation_rate = 0.0;      // solicits per visit
};

inline CellSummary summarize_cell(const CellProtocol& c) {
    CellSummary s;
    std::map<int, std::int64_t> per_symbol;
    std::int64_t delivered = 0;
    for (const auto& [key, n] : c.symbol_action) {
        if (key.first >= 0) {
            per_symbol[key.first] += n;
            delivered += n;
        }
    }
    if (delivered > 0) {
        int best = -1;
        std::int64_t bn = -1;
        for (const auto& [sym, n] : per_symbol)
            if (n > bn) best = sym, bn = n;
        s.dominant_symbol = best;
        s.dominant_fraction = static_cast<double>(bn) / delivered;
    }
    if (c.visits > 0) s.solicitation_rate = static_cast<double>(c.solicits) / c.visits;
    return s;
}

// Long-format CSV: one row per (cell, symbol, action) with counts, plus
// per-cell visit and solicit totals repeated for convenience.
inline void write_heatmap_csv(const ProtocolHeatmap& h, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("heatmap: cannot open " + path.string());
    f << "x,y,visits,solicits,symbol,action,count\n";
    for (int y = 0; y < kGridSide; ++y)
        for (int x = 0; x < kGridSide; ++x) {
            const CellProtocol& c = h.cells[y * kGridSide + x];
            if (c.visits == 0) continue;
            for (const auto& [key, n] : c.symbol_action) {
                f << x << ',' << y << ',' << c.visits << ',' << c.solicits << ',' << key.first
                  << ',' << to_string(static_cast<ListenerAction>(key.second)) << ',' << n
                  << '\n';
            }
        }
}

inline const char* symbol_color(int symbol) {
    // silence gray, then one color per symbol 0..4
    switch (symbol) {
        case 0: return "#888888";
        case 1: return "#d62728";
        case 2: return "#1f77b4";
        case 3: return "#2ca02c";
        case 4: return "#ff7f0e";
        default: return "#dddddd";
    }
}

inline void write_heatmap_svg(const ProtocolHeatmap& h, const MazeLayout& m,
                              const std::filesystem::path& path) {
    const double cell = 40.0, pad = 10.0;
    SvgBuilder svg(kGridSide * cell + 2 * pad, kGridSide * cell + 2 * pad + 20);
    for (int y = 0; y < kGridSide; ++y)
        for (int x = 0; x < kGridSide; ++x) {
            const double px = pad + x * cell, py = pad + y * cell;
            if (!m.is_floor({x, y})) {
                svg.rect(px, py, cell, cell, "#333333");
                continue;
            }
            const CellProtocol& c = h.cells[y * kGridSide + x];
            const CellSummary s = summarize_cell(c);
            std::string fill = "#ffffff";
            double opacity = 1.0;
            if (s.dominant_symbol) {
                fill = symbol_color(*s.dominant_symbol);
                opacity = 0.25 + 0.75 * s.dominant_fraction;
            }
            svg.rect(px, py, cell, cell, fill, "#999999", opacity);
            if (c.visits > 0)
                svg.text(px + 3, py + 13, std::to_string(c.visits), 9.0, "#222");
            if (c.solicits > 0)
                svg.text(px + 3, py + cell - 5, "s:" + std::to_string(c.solicits), 9.0,
                         "#000");
        }
    svg.text(pad, kGridSide * cell + pad + 14,
             std::string(to_string(m.id)) + ": fill = dominant delivered symbol, s = solicits",
             11.0);
    svg.save(path);
}

// --- run logs and learning curves ------------------------------------------------

struct RunLogEpisodes {
    std::string layout;
    int s_opt = 1;
    bool has_nonzero = true;
    std::vector<double> env_steps;  // cumulative, at episode end
    std::vector<double> R;
    std::vector<double> steps;
    std::vector<double> nonzero;
};

inline RunLogEpisodes parse_run_log(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("run log: cannot open " + path.string());
    RunLogEpisodes out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        const std::string kind = j.value("kind", "");
        if (kind == "config") {
            if (j.contains("config") && j["config"].contains("layout")) {
                out.layout = j["config"]["layout"].get<std::string>();
                out.s_opt = build_layout(layout_id_from_string(out.layout)).s_opt;
            }
        } else if (kind == "episode") {
            out.env_steps.push_back(j.at("env_steps").get<double>());
            out.R.push_back(j.at("R").get<double>());
            out.steps.push_back(j.at("steps").get<double>());
            if (j.contains("nonzero")) {
                out.nonzero.push_back(j.at("nonzero").get<double>());
            } else {
                out.has_nonzero = false;
                out.nonzero.push_back(0.0);
            }
        }
    }
    if (out.env_steps.empty()) throw std::runtime_error("run log: no episodes in " + path.string());
    return out;
}

inline bool metric_available(const RunLogEpisodes& r, const std::string& metric) {
    if (metric == "M_s") return r.has_nonzero;
    return metric == "M_t" || metric == "M_o";
}

// Trailing-window series of one metric, one value per episode.
inline std::vector<double> windowed_metric_series(const RunLogEpisodes& r,
                                                  const std::string& metric, int window) {
    if (window < 1) throw std::runtime_error("curves: window < 1");
    if (!metric_available(r, metric)) throw std::runtime_error("curves: metric unavailable: " + metric);
    const std::size_t n = r.R.size();
    auto value = [&](std::size_t i) {
        if (metric == "M_t") return r.R[i];
        if (metric == "M_o") return r.s_opt * r.R[i] / r.steps[i];
        if (metric == "M_s") return -std::log(std::max(r.nonzero[i], 1.0));
        throw std::runtime_error("curves: unknown metric " + metric);
    };
    std::vector<double> out(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += value(i);
        if (i >= static_cast<std::size_t>(window)) acc -= value(i - window);
        out[i] = acc / std::min<std::size_t>(i + 1, window);
    }
    return out;
}

struct CurveSeries {
    std::string metric;
    std::vector<double> x;                      // shared env-step grid
    std::vector<std::vector<double>> per_seed;  // one row per run, aligned to x
    std::vector<double> mean;
    std::vector<double> se;  // zero when undefined (single seed)
};

// Aligns every run onto a common env-step grid (value held from the last
// episode at or before each grid point) and aggregates across runs.
inline CurveSeries learning_curves(const std::vector<RunLogEpisodes>& runs,
                                   const std::string& metric, int window, int points = 200) {
    if (runs.empty()) throw std::runtime_error("curves: no runs");
    if (points < 1) throw std::runtime_error("curves: points < 1");
    CurveSeries cs;
    cs.metric = metric;

    double x0 = 0.0, x1 = 0.0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        x0 = std::max(x0, runs[i].env_steps.front());
        const double last = runs[i].env_steps.back();
        x1 = (i == 0) ? last : std::min(x1, last);
    }
    if (x1 < x0) throw std::runtime_error("curves: runs do not overlap in env steps");
    const int npts = (x1 == x0) ? 1 : std::max(points, 2);
    for (int p = 0; p < npts; ++p)
        cs.x.push_back(npts == 1 ? x1 : x0 + (x1 - x0) * p / (npts - 1));

    for (const auto& run : runs) {
        const std::vector<double> w = windowed_metric_series(run, metric, window);
        std::vector<double> row(cs.x.size());
        for (std::size_t p = 0; p < cs.x.size(); ++p) {
            auto it = std::upper_bound(run.env_steps.begin(), run.env_steps.end(), cs.x[p]);
            const std::size_t idx = static_cast<std::size_t>(it - run.env_steps.begin());
            row[p] = w[idx == 0 ? 0 : idx - 1];
        }
        cs.per_seed.push_back(std::move(row));
    }

    cs.mean.resize(cs.x.size());
    cs.se.resize(cs.x.size());
    std::vector<double> col(runs.size());
    for (std::size_t p = 0; p < cs.x.size(); ++p) {
        double s = 0.0;
        for (std::size_t r = 0; r < runs.size(); ++r) {
            col[r] = cs.per_seed[r][p];
            s += col[r];
        }
        cs.mean[p] = s / runs.size();
        cs.se[p] = standard_error(col).value_or(0.0);
    }
    return cs;
}

inline void write_curves_csv(const CurveSeries& cs, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("curves: cannot open " + path.string());
    f << "env_steps";
    for (std::size_t r = 0; r < cs.per_seed.size(); ++r) f << ",seed_" << r;
    f << ",mean,stderr\n";
    for (std::size_t p = 0; p < cs.x.size(); ++p) {
        f << format_double(cs.x[p]);
        for (std::size_t r = 0; r < cs.per_seed.size(); ++r)
            f << ',' << format_double(cs.per_seed[r][p]);
        f << ',' << format_double(cs.mean[p]) << ',' << format_double(cs.se[p]) << '\n';
    }
}

inline void write_curves_svg(const std::vector<std::pair<std::string, CurveSeries>>& labeled,
                             const std::string& metric, const std::filesystem::path& path) {
    const double W = 640, H = 400, L = 60, B = 40, T = 20, R = 20;
    SvgBuilder svg(W, H);
    double ymin = 0.0, ymax = 0.0, xmax = 1.0;
    bool first = true;
    for (const auto& [label, cs] : labeled)
        for (std::size_t p = 0; p < cs.x.size(); ++p) {
            const double lo = cs.mean[p] - cs.se[p], hi = cs.mean[p] + cs.se[p];
            if (first) ymin = lo, ymax = hi, first = false;
            ymin = std::min(ymin, lo);
            ymax = std::max(ymax, hi);
            xmax = std::max(xmax, cs.x[p]);
        }
    if (ymax == ymin) ymax = ymin + 1.0;
    auto X = [&](double x) { return L + (W - L - R) * x / xmax; };
    auto Y = [&](double y) { return H - B - (H - B - T) * (y - ymin) / (ymax - ymin); };
    svg.line(L, T, L, H - B, "#444");
    svg.line(L, H - B, W - R, H - B, "#444");
    svg.text(L, T - 6, metric, 12.0);
    svg.text(W - R, H - B + 16, "env steps", 11.0, "#222", "end");
    svg.text(L - 6, Y(ymin) + 4, format_double(ymin), 10.0, "#222", "end");
    svg.text(L - 6, Y(ymax) + 4, format_double(ymax), 10.0, "#222", "end");
    const std::array<const char*, 6> palette{"#1f77b4", "#d62728", "#2ca02c",
                                             "#ff7f0e", "#9467bd", "#8c564b"};
    int li = 0;
    for (const auto& [label, cs] : labeled) {
        const char* color = palette[li % palette.size()];
        std::vector<std::pair<double, double>> band;
        for (std::size_t p = 0; p < cs.x.size(); ++p)
            band.push_back({X(cs.x[p]), Y(cs.mean[p] + cs.se[p])});
        for (std::size_t p = cs.x.size(); p-- > 0;)
            band.push_back({X(cs.x[p]), Y(cs.mean[p] - cs.se[p])});
        if (cs.x.size() > 1) svg.polygon(band, color, 0.15);
        std::vector<std::pair<double, double>> linepts;
        for (std::size_t p = 0; p < cs.x.size(); ++p)
            linepts.push_back({X(cs.x[p]), Y(cs.mean[p])});
        svg.polyline(linepts, color);
        svg.text(L + 8, T + 14 + 14 * li, label, 11.0, color);
        ++li;
    }
    svg.save(path);
}

// --- cross-regime comparison -------------------------------------------------------

struct LabeledRuns {
    std::string label;
    std::vector<RunLogEpisodes> runs;
};

struct FinalCell {
    std::string label, metric;
    bool available = false;
    double mean = 0.0;
    std::optional<double> se;
};

struct CompareReport {
    std::vector<FinalCell> finals;
    std::vector<std::filesystem::path> files;
};

// Per metric: aligned mean curves per label (CSV + SVG); plus a final-value
// table with explicit missing markers for metrics a regime never logged.
inline CompareReport compare_report(const std::vector<LabeledRuns>& sets,
                                    const std::filesystem::path& out_dir, int window,
                                    int points = 200) {
    if (sets.empty()) throw std::runtime_error("compare: no run sets");
    std::filesystem::create_directories(out_dir);
    CompareReport rep;
    const std::array<const char*, 3> metrics{"M_t", "M_o", "M_s"};

    for (const char* metric : metrics) {
        std::vector<std::pair<std::string, CurveSeries>> labeled;
        for (const auto& set : sets) {
            bool ok = !set.runs.empty();
            for (const auto& r : set.runs) ok = ok && metric_available(r, metric);
            if (!ok) continue;
            labeled.push_back({set.label, learning_curves(set.runs, metric, window, points)});
        }
        if (!labeled.empty()) {
            const std::filesystem::path csv = out_dir / (std::string("compare_") + metric + ".csv");
            std::ofstream f(csv);
            if (!f) throw std::runtime_error("compare: cannot open " + csv.string());
            f << "label,env_steps,mean,stderr\n";
            for (const auto& [label, cs] : labeled)
                for (std::size_t p = 0; p < cs.x.size(); ++p)
                    f << label << ',' << format_double(cs.x[p]) << ',' << format_double(cs.mean[p])
                      << ',' << format_double(cs.se[p]) << '\n';
            rep.files.push_back(csv);
            const std::filesystem::path svg = out_dir / (std::string("compare_") + metric + ".svg");
            write_curves_svg(labeled, metric, svg);
            rep.files.push_back(svg);
        }

        for (const auto& set : sets) {
            FinalCell cell;
            cell.label = set.label;
            cell.metric = metric;
            bool ok = !set.runs.empty();
            for (const auto& r : set.runs) ok = ok && metric_available(r, metric);
            if (ok) {
                std::vector<double> finals;
                for (const auto& r : set.runs)
                    finals.push_back(windowed_metric_series(r, metric, window).back());
                double s = 0.0;
                for (double v : finals) s += v;
                cell.available = true;
                cell.mean = s / finals.size();
                cell.se = standard_error(finals);
            }
            rep.finals.push_back(std::move(cell));
        }
    }

    const std::filesystem::path finals_csv = out_dir / "finals.csv";
    std::ofstream f(finals_csv);
    if (!f) throw std::runtime_error("compare: cannot open " + finals_csv.string());
    f << "label,metric,mean,stderr\n";
    for (const auto& c : rep.finals) {
        f << c.label << ',' << c.metric << ',';
        if (c.available) {
            f << format_double(c.mean) << ',';
            if (c.se) f << format_double(*c.se);
            else f << "undefined";
        } else {
            f << "missing,missing";
        }
        f << '\n';
    }
    rep.files.push_back(finals_csv);
    return rep;
}

}  // namespace gridtalk
