#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "env.hpp"
#include "util.hpp"

namespace gridtalk {

// One listener decision as seen from outside: where it stood, what it heard,
// what it did. cell/heading are the state before the action.
struct TraceStep {
    int step = 0;
    Cell cell;
    Heading heading = Heading::up;
    int symbol = -1;  // delivered message this step; -1 when none
    ListenerAction action = ListenerAction::stay;
    bool solicited = false;
    double env_reward = 0.0;
    double speaker_penalty = 0.0;
};

struct EpisodeTrace {
    LayoutId layout = LayoutId::tmaze;
    std::int64_t episode = 0;
    std::vector<TraceStep> steps;
    double total_reward = 0.0;
    int step_count = 0;
    int nonzero_messages = 0;           // per-episode message count m_i
    std::vector<int> upfront_tokens;    // empty outside the upfront regime
};

// Messages that cost something: anything delivered that is not symbol 0.
// Upfront tokens are counted once per episode regardless of rebroadcast.
inline int count_nonzero_messages(const EpisodeTrace& t) {
    if (!t.upfront_tokens.empty()) {
        int n = 0;
        for (int s : t.upfront_tokens)
            if (s != 0) ++n;
        return n;
    }
    int n = 0;
    for (const auto& st : t.steps)
        if (st.symbol > 0) ++n;
    return n;
}

inline bool summary_consistent(const EpisodeTrace& t) {
    double r = 0.0;
    for (const auto& st : t.steps) r += st.env_reward;
    return static_cast<int>(t.steps.size()) == t.step_count && r == t.total_reward &&
           count_nonzero_messages(t) == t.nonzero_messages;
}

// Columnar text: a summary line, a column header, one row per step.
inline std::string serialize_trace(const EpisodeTrace& t) {
    std::string out = "trace layout=";
    out += to_string(t.layout);
    out += " episode=" + std::to_string(t.episode);
    out += " reward=" + format_double(t.total_reward);
    out += " steps=" + std::to_string(t.step_count);
    out += " nonzero=" + std::to_string(t.nonzero_messages);
    out += " upfront=";
    for (std::size_t i = 0; i < t.upfront_tokens.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(t.upfront_tokens[i]);
    }
    out += '\n';
    out += "step x y heading symbol action solicited env_reward speaker_penalty\n";
    for (const auto& st : t.steps) {
        out += std::to_string(st.step);
        out += ' ';
        out += std::to_string(st.cell.x);
        out += ' ';
        out += std::to_string(st.cell.y);
        out += ' ';
        out += to_string(st.heading);
        out += ' ';
        out += st.symbol < 0 ? std::string("-") : std::to_string(st.symbol);
        out += ' ';
        out += to_string(st.action);
        out += ' ';
        out += st.solicited ? '1' : '0';
        out += ' ';
        out += format_double(st.env_reward);
        out += ' ';
        out += format_double(st.speaker_penalty);
        out += '\n';
    }
    return out;
}

inline EpisodeTrace parse_trace(std::string_view text) {
    std::istringstream is{std::string(text)};
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("trace: empty");
    EpisodeTrace t;
    {
        std::istringstream hs(line);
        std::string tag;
        hs >> tag;
        if (tag != "trace") throw std::runtime_error("trace: bad first line");
        std::string kv;
        while (hs >> kv) {
            auto eq = kv.find('=');
            if (eq == std::string::npos) throw std::runtime_error("trace: bad header field");
            std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
            if (key == "layout") t.layout = layout_id_from_string(val);
            else if (key == "episode") t.episode = std::stoll(val);
            else if (key == "reward") t.total_reward = std::stod(val);
            else if (key == "steps") t.step_count = std::stoi(val);
            else if (key == "nonzero") t.nonzero_messages = std::stoi(val);
            else if (key == "upfront") {
                std::size_t pos = 0;
                while (pos < val.size()) {
                    auto comma = val.find(',', pos);
                    if (comma == std::string::npos) comma = val.size();
                    t.upfront_tokens.push_back(std::stoi(val.substr(pos, comma - pos)));
                    pos = comma + 1;
                }
            } else {
                throw std::runtime_error("trace: unknown header field " + key);
            }
        }
    }
    if (!std::getline(is, line) ||
        line != "step x y heading symbol action solicited env_reward speaker_penalty")
        throw std::runtime_error("trace: bad column header");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream rs(line);
        TraceStep st;
        std::string heading, symbol, action;
        int solicited = 0;
        if (!(rs >> st.step >> st.cell.x >> st.cell.y >> heading >> symbol >> action >>
              solicited >> st.env_reward >> st.speaker_penalty))
            throw std::runtime_error("trace: bad row: " + line);
        st.heading = heading_from_string(heading);
        st.symbol = symbol == "-" ? -1 : std::stoi(symbol);
        st.action = action_from_string(action);
        st.solicited = solicited != 0;
        t.steps.push_back(st);
    }
    return t;
}

}  // namespace gridtalk
