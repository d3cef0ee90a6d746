#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "grid.hpp"
#include "modes.hpp"
#include "util.hpp"

namespace gridtalk {

using json = nlohmann::json;

// Everything that defines one training run. Hyperparameter defaults are the
// small-budget settings; sweep files override them per cell.
struct ExperimentConfig {
    LayoutId layout = LayoutId::tmaze;
    ModeConfig mode;
    Visibility visibility = Visibility::partial;
    bool has_memory = true;
    int rep_size = 16;
    int conv1_channels = 16;
    double alpha_speaker = 1e-5;
    double alpha_listener = 1e-5;
    double epsilon_speaker = 0.01;
    double epsilon_listener = 0.01;
    double gamma = 0.99;
    double lambda = 0.9;
    std::uint64_t seed = 1;
    std::int64_t total_env_steps = 200'000;
    int metric_window = 1000;
    int eval_every_episodes = 0;  // 0 disables periodic greedy evals
    int eval_episodes = 20;
    int checkpoint_every_episodes = 2000;

    void validate() const {
        mode.validate();
        if (rep_size != 8 && rep_size != 16 && rep_size != 32)
            throw std::runtime_error("config: rep_size must be 8, 16 or 32");
        if (alpha_speaker <= 0 || alpha_listener <= 0)
            throw std::runtime_error("config: learning rates must be positive");
        if (epsilon_speaker < 0 || epsilon_speaker > 1 || epsilon_listener < 0 ||
            epsilon_listener > 1)
            throw std::runtime_error("config: epsilon out of range");
        if (gamma <= 0 || gamma > 1) throw std::runtime_error("config: bad gamma");
        if (lambda < 0 || lambda > 1) throw std::runtime_error("config: bad lambda");
        if (total_env_steps < 1) throw std::runtime_error("config: total_env_steps < 1");
        if (metric_window < 1) throw std::runtime_error("config: metric_window < 1");
        if (checkpoint_every_episodes < 1)
            throw std::runtime_error("config: checkpoint_every_episodes < 1");
        if (eval_every_episodes < 0 || eval_episodes < 1)
            throw std::runtime_error("config: bad eval cadence");
    }
};

inline json mode_to_json(const ModeConfig& m) {
    json j;
    j["kind"] = to_string(m.kind);
    switch (m.kind) {
        case ModeKind::fixed_penalty:
            j["value"] = m.fixed_penalty_value;
            break;
        case ModeKind::curriculum: {
            j["schedule"] = m.schedule.open_ended ? "mp1" : "mp2";
            j["min_stage_steps"] = m.schedule.min_stage_steps;
            j["threshold"] = m.schedule.success_threshold;
            j["cap_steps"] = m.schedule.cap_steps;
            break;
        }
        case ModeKind::upfront:
            j["tokens"] = m.upfront_tokens;
            break;
        default:
            break;
    }
    return j;
}

inline ModeConfig mode_from_json(const json& j) {
    ModeConfig m;
    m.kind = mode_kind_from_string(j.at("kind").get<std::string>());
    switch (m.kind) {
        case ModeKind::fixed_penalty:
            m.fixed_penalty_value = j.at("value").get<double>();
            break;
        case ModeKind::curriculum: {
            const std::string sched = j.value("schedule", "mp2");
            const std::int64_t min_steps = j.value("min_stage_steps", std::int64_t{2'000'000});
            const double thr = j.value("threshold", 0.95);
            const std::int64_t cap = j.value("cap_steps", std::int64_t{15'000'000});
            if (sched == "mp1") m.schedule = make_schedule_mp1(min_steps, thr, cap);
            else if (sched == "mp2") m.schedule = make_schedule_mp2(min_steps, thr, cap);
            else throw std::runtime_error("config: unknown curriculum schedule " + sched);
            break;
        }
        case ModeKind::upfront:
            m.upfront_tokens = j.at("tokens").get<int>();
            break;
        default:
            break;
    }
    m.validate();
    return m;
}

inline json to_json(const ExperimentConfig& c) {
    json j;
    j["layout"] = to_string(c.layout);
    j["mode"] = mode_to_json(c.mode);
    j["visibility"] = to_string(c.visibility);
    j["memory"] = c.has_memory;
    j["rep_size"] = c.rep_size;
    j["conv1_channels"] = c.conv1_channels;
    j["alpha_speaker"] = c.alpha_speaker;
    j["alpha_listener"] = c.alpha_listener;
    j["epsilon_speaker"] = c.epsilon_speaker;
    j["epsilon_listener"] = c.epsilon_listener;
    j["gamma"] = c.gamma;
    j["lambda"] = c.lambda;
    j["seed"] = c.seed;
    j["total_env_steps"] = c.total_env_steps;
    j["metric_window"] = c.metric_window;
    j["eval_every_episodes"] = c.eval_every_episodes;
    j["eval_episodes"] = c.eval_episodes;
    j["checkpoint_every_episodes"] = c.checkpoint_every_episodes;
    return j;
}

inline ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    c.layout = layout_id_from_string(j.at("layout").get<std::string>());
    c.mode = mode_from_json(j.at("mode"));
    c.visibility = visibility_from_string(j.value("visibility", "partial"));
    c.has_memory = j.value("memory", true);
    c.rep_size = j.value("rep_size", 16);
    c.conv1_channels = j.value("conv1_channels", 16);
    c.alpha_speaker = j.value("alpha_speaker", 1e-5);
    c.alpha_listener = j.value("alpha_listener", 1e-5);
    c.epsilon_speaker = j.value("epsilon_speaker", 0.01);
    c.epsilon_listener = j.value("epsilon_listener", 0.01);
    c.gamma = j.value("gamma", 0.99);
    c.lambda = j.value("lambda", 0.9);
    c.seed = j.value("seed", std::uint64_t{1});
    c.total_env_steps = j.value("total_env_steps", std::int64_t{200'000});
    c.metric_window = j.value("metric_window", 1000);
    c.eval_every_episodes = j.value("eval_every_episodes", 0);
    c.eval_episodes = j.value("eval_episodes", 20);
    c.checkpoint_every_episodes = j.value("checkpoint_every_episodes", 2000);
    c.validate();
    return c;
}

// Canonical form: nlohmann::json keeps object keys sorted, so dump() of the
// round-tripped config is stable and hashable.
inline std::string canonical_config_dump(const ExperimentConfig& c) { return to_json(c).dump(); }

inline std::uint64_t config_hash(const ExperimentConfig& c) {
    return fnv1a64(canonical_config_dump(c));
}

inline ExperimentConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path.string());
    json j = json::parse(f);
    return config_from_json(j);
}

// Hyperparameter grid: cells are the cross product of the listed values, each
// run across `seeds` consecutive seeds starting at base.seed.
struct SweepGrid {
    ExperimentConfig base;
    std::vector<double> alpha_speaker{1e-5, 1e-6};
    std::vector<double> alpha_listener{1e-5, 1e-6};
    std::vector<int> rep_size{8, 16};
    int seeds = 10;
};

inline SweepGrid sweep_from_json(const json& j) {
    SweepGrid g;
    g.base = config_from_json(j.at("base"));
    if (j.contains("alpha_speaker")) g.alpha_speaker = j.at("alpha_speaker").get<std::vector<double>>();
    if (j.contains("alpha_listener")) g.alpha_listener = j.at("alpha_listener").get<std::vector<double>>();
    if (j.contains("rep_size")) g.rep_size = j.at("rep_size").get<std::vector<int>>();
    g.seeds = j.value("seeds", 10);
    if (g.seeds < 1) throw std::runtime_error("sweep: seeds < 1");
    if (g.alpha_speaker.empty() || g.alpha_listener.empty() || g.rep_size.empty())
        throw std::runtime_error("sweep: empty grid axis");
    return g;
}

inline SweepGrid load_sweep_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("sweep: cannot open " + path.string());
    return sweep_from_json(json::parse(f));
}

}  // namespace gridtalk
