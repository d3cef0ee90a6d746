#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <deque>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "config.hpp"
#include "metrics.hpp"
#include "modes.hpp"
#include "trace.hpp"

namespace gridtalk {

// Independent randomness per purpose, all derived from the root seed. Keeping
// the streams apart means e.g. adding an eval phase cannot shift the goals
// drawn during training.
struct RngBundle {
    RngStream env;
    RngStream speaker;
    RngStream listener;
};

inline RngBundle make_train_rng(std::uint64_t root_seed) {
    return RngBundle{RngStream::child(root_seed, "env"),
                     RngStream::child(root_seed, "speaker-explore"),
                     RngStream::child(root_seed, "listener-explore")};
}

inline RngBundle make_eval_rng(std::uint64_t root_seed) {
    return RngBundle{RngStream::child(root_seed, "eval-env"),
                     RngStream::child(root_seed, "eval-speaker"),
                     RngStream::child(root_seed, "eval-listener")};
}

struct EpisodeOutcome {
    EpisodeTrace trace;
    double speaker_loss = 0.0;
    double listener_loss = 0.0;
};

// One full episode under a communication regime. With learn set, both agents
// take their single fitted-Q step on the finished trajectories (the speaker
// only if it acted at all).
inline EpisodeOutcome run_episode(const MazeLayout& m, const ModeConfig& mode,
                                  const StageState& stage, Agent& speaker, Agent& listener,
                                  RngBundle& rng, bool learn, double speaker_eps,
                                  double listener_eps, std::int64_t episode_index) {
    EnvState state = reset(m, rng.env);
    EpisodeContext ctx = make_episode_context(speaker, listener, listener.cfg.gamma);

    EpisodeOutcome out;
    out.trace.layout = m.id;
    out.trace.episode = episode_index;

    if (mode.kind == ModeKind::upfront) {
        generate_upfront(mode, speaker, m, state, ctx, speaker_eps, rng.speaker);
        out.trace.upfront_tokens = ctx.upfront_tokens;
    }

    while (!state.done) {
        const Cell pre_cell = state.agent_pos;
        const Heading pre_heading = state.heading;
        const int step_no = state.step_count;
        StepOutcome so = mediate_step(mode, stage, speaker, listener, m, state, ctx,
                                      speaker_eps, listener_eps, rng.speaker, rng.listener);
        TraceStep ts;
        ts.step = step_no;
        ts.cell = pre_cell;
        ts.heading = pre_heading;
        ts.symbol = so.delivered ? so.delivered->symbol : -1;
        ts.action = so.action;
        ts.solicited = so.solicited;
        ts.env_reward = so.env_reward;
        ts.speaker_penalty = so.penalty;
        out.trace.steps.push_back(ts);
        out.trace.total_reward += so.env_reward;
    }
    out.trace.step_count = static_cast<int>(out.trace.steps.size());
    out.trace.nonzero_messages = count_nonzero_messages(out.trace);

    finalize_trajectories(mode, speaker, listener, m, state, ctx);
    if (learn) {
        if (!ctx.speaker_traj.steps.empty())
            out.speaker_loss = fitted_q_update(speaker, ctx.speaker_traj);
        out.listener_loss = fitted_q_update(listener, ctx.listener_traj);
    }
    return out;
}

// --- run log -----------------------------------------------------------------

// Newline-delimited JSON, one record per line. Contains nothing
// non-deterministic: wall-clock and host facts go to the side file run.meta.
class RunLogWriter {
public:
    RunLogWriter() = default;
    explicit RunLogWriter(const std::filesystem::path& path, bool append = false) {
        open(path, append);
    }
    void open(const std::filesystem::path& path, bool append = false) {
        f_.open(path, append ? std::ios::app : std::ios::trunc);
        if (!f_) throw std::runtime_error("run log: cannot open " + path.string());
    }
    void line(const json& j) {
        f_ << j.dump() << '\n';
        if (!f_) throw std::runtime_error("run log: write failed");
    }
    void flush() { f_.flush(); }

private:
    std::ofstream f_;
};

// --- run state and checkpointing ----------------------------------------------

// Everything train() needs to continue a run, bit for bit.
struct RunState {
    Agent speaker, listener;
    RngBundle rng{RngStream(0), RngStream(0), RngStream(0)};
    RngBundle eval_rng{RngStream(0), RngStream(0), RngStream(0)};
    StageState stage;
    RunningMetrics metrics;
    std::deque<double> reward_history;  // last metric_window episodes
    std::deque<int> steps_history;
    std::deque<int> msg_history;
    std::int64_t episode = 0;
    std::int64_t env_steps = 0;
};

namespace detail {

inline void write_rng(BinaryWriter& w, const RngStream& s) { w.str(s.save_state()); }
inline RngStream read_rng(BinaryReader& r) {
    RngStream s(0);
    s.load_state(r.str());
    return s;
}

inline void write_stage(BinaryWriter& w, const StageState& st) {
    w.u32(static_cast<std::uint32_t>(st.stage));
    w.i64(st.steps_in_stage);
    w.u32(static_cast<std::uint32_t>(st.window.capacity));
    w.u32(static_cast<std::uint32_t>(st.window.count));
    // ring contents oldest first
    std::vector<int> vals;
    for (int i = 0; i < st.window.count; ++i) {
        int idx = (st.window.head - st.window.count + i + 2 * st.window.capacity) %
                  st.window.capacity;
        vals.push_back(st.window.ring.empty() ? 0 : st.window.ring[idx]);
    }
    w.ints(vals);
}

inline StageState read_stage(BinaryReader& r) {
    StageState st;
    st.stage = static_cast<int>(r.u32());
    st.steps_in_stage = r.i64();
    st.window.capacity = static_cast<int>(r.u32());
    const int count = static_cast<int>(r.u32());
    std::vector<int> vals = r.ints();
    if (static_cast<int>(vals.size()) != count)
        throw CheckpointError("checkpoint: stage window corrupt");
    for (int v : vals) st.window.push(v != 0);
    return st;
}

inline void write_metrics(BinaryWriter& w, const RunningMetrics& m) {
    w.i64(m.episodes);
    w.f64(m.sum_reward);
    w.f64(m.sum_reward_per_step);
    w.f64(m.sum_neg_log_messages);
    w.u32(static_cast<std::uint32_t>(m.s_opt));
}

inline RunningMetrics read_metrics(BinaryReader& r) {
    RunningMetrics m;
    m.episodes = r.i64();
    m.sum_reward = r.f64();
    m.sum_reward_per_step = r.f64();
    m.sum_neg_log_messages = r.f64();
    m.s_opt = static_cast<int>(r.u32());
    return m;
}

}  // namespace detail

inline void save_run_checkpoint(const std::filesystem::path& path, const ExperimentConfig& cfg,
                                const RunState& rs) {
    BinaryWriter w;
    w.u64(config_hash(cfg));
    w.i64(rs.episode);
    w.i64(rs.env_steps);
    detail::write_rng(w, rs.rng.env);
    detail::write_rng(w, rs.rng.speaker);
    detail::write_rng(w, rs.rng.listener);
    detail::write_rng(w, rs.eval_rng.env);
    detail::write_rng(w, rs.eval_rng.speaker);
    detail::write_rng(w, rs.eval_rng.listener);
    detail::write_stage(w, rs.stage);
    detail::write_metrics(w, rs.metrics);
    w.doubles(std::vector<double>(rs.reward_history.begin(), rs.reward_history.end()));
    w.ints(std::vector<int>(rs.steps_history.begin(), rs.steps_history.end()));
    w.ints(std::vector<int>(rs.msg_history.begin(), rs.msg_history.end()));
    write_agent(w, rs.speaker);
    write_agent(w, rs.listener);
    write_checkpoint_file(path, w.buffer());
}

// Loads a run checkpoint; when expect_hash is set, the stored config hash
// must match (resume with a different config is an error, not a surprise).
inline RunState load_run_checkpoint(const std::filesystem::path& path,
                                    std::optional<std::uint64_t> expect_hash,
                                    std::uint64_t* stored_hash = nullptr) {
    const std::string payload = read_checkpoint_file(path);
    BinaryReader r(payload);
    const std::uint64_t hash = r.u64();
    if (stored_hash) *stored_hash = hash;
    if (expect_hash && hash != *expect_hash)
        throw CheckpointError("checkpoint: config hash mismatch");
    RunState rs;
    rs.episode = r.i64();
    rs.env_steps = r.i64();
    rs.rng.env = detail::read_rng(r);
    rs.rng.speaker = detail::read_rng(r);
    rs.rng.listener = detail::read_rng(r);
    rs.eval_rng.env = detail::read_rng(r);
    rs.eval_rng.speaker = detail::read_rng(r);
    rs.eval_rng.listener = detail::read_rng(r);
    rs.stage = detail::read_stage(r);
    rs.metrics = detail::read_metrics(r);
    for (double v : r.doubles()) rs.reward_history.push_back(v);
    for (int v : r.ints()) rs.steps_history.push_back(v);
    for (int v : r.ints()) rs.msg_history.push_back(v);
    rs.speaker = read_agent(r);
    rs.listener = read_agent(r);
    if (!r.at_end()) throw CheckpointError("checkpoint: trailing bytes");
    return rs;
}

// --- training ------------------------------------------------------------------

struct TrainResult {
    std::filesystem::path out_dir;
    std::filesystem::path log_path;
    std::filesystem::path final_checkpoint;
    RunningMetrics metrics;
    double win_Mt = 0.0, win_Mo = 0.0, win_Ms = 0.0;  // trailing-window finals
    std::int64_t episodes = 0;
    std::int64_t env_steps = 0;
    int final_stage = 0;
};

namespace detail {

inline double window_mean(const std::deque<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

struct WindowSnapshot {
    double Mt = 0.0, Mo = 0.0, Ms = 0.0;
};

inline WindowSnapshot window_metrics(const RunState& rs) {
    WindowSnapshot s;
    if (rs.reward_history.empty()) return s;
    const std::size_t n = rs.reward_history.size();
    double mt = 0.0, mo = 0.0, ms = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mt += rs.reward_history[i];
        mo += rs.reward_history[i] / rs.steps_history[i];
        ms += -std::log(std::max(rs.msg_history[i], 1) * 1.0);
    }
    s.Mt = mt / n;
    s.Mo = rs.metrics.s_opt * mo / n;
    s.Ms = ms / n;
    return s;
}

inline std::string iso_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

inline double current_penalty(const ModeConfig& mode, const StageState& stage) {
    switch (mode.kind) {
        case ModeKind::fixed_penalty: return mode.fixed_penalty_value;
        case ModeKind::curriculum: return mode.schedule.penalty_at(stage.stage);
        default: return 0.0;
    }
}

}  // namespace detail

// Greedy evaluation rollouts; learning off, epsilon 0, separate rng streams.
inline RunningMetrics evaluate(const MazeLayout& m, const ModeConfig& mode,
                               const StageState& stage, Agent& speaker, Agent& listener,
                               RngBundle& eval_rng, int episodes, int s_opt,
                               std::vector<EpisodeTrace>* traces = nullptr) {
    RunningMetrics em;
    em.s_opt = s_opt;
    for (int i = 0; i < episodes; ++i) {
        EpisodeOutcome eo =
            run_episode(m, mode, stage, speaker, listener, eval_rng, false, 0.0, 0.0, i);
        em.record_episode(eo.trace.total_reward, eo.trace.step_count,
                          eo.trace.nonzero_messages);
        if (traces) traces->push_back(std::move(eo.trace));
    }
    return em;
}

// Full training run. Episodes run until the env-step budget is consumed (the
// last episode may finish past it). Resuming from a checkpoint continues the
// exact rng, optimizer and metric state; the log then picks up where the
// source run left off.
inline TrainResult train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                         const std::optional<std::filesystem::path>& resume = std::nullopt) {
    cfg.validate();
    const MazeLayout m = build_layout(cfg.layout);
    std::filesystem::create_directories(out_dir);

    const std::uint64_t hash = config_hash(cfg);
    RunState rs;
    if (resume) {
        rs = load_run_checkpoint(*resume, hash);
    } else {
        AgentConfig sc;
        sc.role = Role::speaker;
        sc.has_memory = cfg.has_memory;
        sc.rep_size = cfg.rep_size;
        sc.alpha = cfg.alpha_speaker;
        sc.epsilon = cfg.epsilon_speaker;
        sc.gamma = cfg.gamma;
        sc.lambda = cfg.lambda;
        AgentConfig lc = sc;
        lc.role = Role::listener;
        lc.visibility = cfg.visibility;
        lc.alpha = cfg.alpha_listener;
        lc.epsilon = cfg.epsilon_listener;
        RngStream init_rng = RngStream::child(cfg.seed, "init");
        rs.speaker = make_speaker(sc, init_rng, cfg.conv1_channels);
        rs.listener = make_listener(lc, cfg.mode.message_slots(), init_rng);
        rs.rng = make_train_rng(cfg.seed);
        rs.eval_rng = make_eval_rng(cfg.seed);
        rs.stage.window.capacity = cfg.metric_window;
        rs.metrics.s_opt = m.s_opt;
    }

    const std::filesystem::path log_path = out_dir / "run.log";
    RunLogWriter log(log_path, resume.has_value() && std::filesystem::exists(log_path));
    std::ofstream meta(out_dir / "run.meta", std::ios::app);
    meta << "start " << detail::iso_now() << "\n";
    const auto wall_start = std::chrono::steady_clock::now();

    if (resume) {
        json j;
        j["kind"] = "resume";
        j["hash"] = hex_u64(hash);
        j["episode"] = rs.episode;
        j["env_steps"] = rs.env_steps;
        log.line(j);
    } else {
        json j;
        j["kind"] = "config";
        j["hash"] = hex_u64(hash);
        j["config"] = to_json(cfg);
        log.line(j);
    }

    auto push_history = [&](const EpisodeTrace& t) {
        rs.reward_history.push_back(t.total_reward);
        rs.steps_history.push_back(t.step_count);
        rs.msg_history.push_back(t.nonzero_messages);
        while (static_cast<int>(rs.reward_history.size()) > cfg.metric_window) {
            rs.reward_history.pop_front();
            rs.steps_history.pop_front();
            rs.msg_history.pop_front();
        }
    };

    while (rs.env_steps < cfg.total_env_steps) {
        EpisodeOutcome eo =
            run_episode(m, cfg.mode, rs.stage, rs.speaker, rs.listener, rs.rng, true,
                        cfg.epsilon_speaker, cfg.epsilon_listener, rs.episode);
        rs.episode += 1;
        rs.env_steps += eo.trace.step_count;
        rs.metrics.record_episode(eo.trace.total_reward, eo.trace.step_count,
                                  eo.trace.nonzero_messages);
        push_history(eo.trace);

        const int stage_before = rs.stage.stage;
        if (cfg.mode.kind == ModeKind::curriculum) {
            rs.stage.steps_in_stage += eo.trace.step_count;
            rs.stage.window.push(eo.trace.total_reward > 0.0);
        }

        const detail::WindowSnapshot win = detail::window_metrics(rs);
        {
            json j;
            j["kind"] = "episode";
            j["episode"] = rs.episode;
            j["env_steps"] = rs.env_steps;
            j["steps"] = eo.trace.step_count;
            j["R"] = eo.trace.total_reward;
            j["nonzero"] = eo.trace.nonzero_messages;
            j["M_t"] = rs.metrics.task_success();
            j["M_o"] = rs.metrics.optimality();
            j["M_s"] = rs.metrics.sparsity();
            j["win_M_t"] = win.Mt;
            j["win_M_o"] = win.Mo;
            j["win_M_s"] = win.Ms;
            j["stage"] = stage_before;
            j["penalty"] = detail::current_penalty(cfg.mode, rs.stage);
            j["loss_speaker"] = eo.speaker_loss;
            j["loss_listener"] = eo.listener_loss;
            log.line(j);
        }

        if (cfg.mode.kind == ModeKind::curriculum) {
            rs.stage = advance_curriculum(cfg.mode.schedule, rs.stage);
            if (rs.stage.stage != stage_before) {
                json j;
                j["kind"] = "stage";
                j["episode"] = rs.episode;
                j["env_steps"] = rs.env_steps;
                j["stage"] = rs.stage.stage;
                j["penalty"] = cfg.mode.schedule.penalty_at(rs.stage.stage);
                log.line(j);
            }
        }

        if (cfg.eval_every_episodes > 0 && rs.episode % cfg.eval_every_episodes == 0) {
            RunningMetrics em = evaluate(m, cfg.mode, rs.stage, rs.speaker, rs.listener,
                                         rs.eval_rng, cfg.eval_episodes, m.s_opt);
            json j;
            j["kind"] = "eval";
            j["episode"] = rs.episode;
            j["env_steps"] = rs.env_steps;
            j["episodes"] = em.episodes;
            j["M_t"] = em.task_success();
            j["M_o"] = em.optimality();
            j["M_s"] = em.sparsity();
            log.line(j);
        }

        if (rs.episode % cfg.checkpoint_every_episodes == 0 &&
            rs.env_steps < cfg.total_env_steps) {
            char name[32];
            std::snprintf(name, sizeof name, "ckpt_ep%08lld.bin",
                          static_cast<long long>(rs.episode));
            save_run_checkpoint(out_dir / name, cfg, rs);
            json j;
            j["kind"] = "checkpoint";
            j["episode"] = rs.episode;
            j["env_steps"] = rs.env_steps;
            j["file"] = name;
            log.line(j);
        }
    }

    save_run_checkpoint(out_dir / "final.bin", cfg, rs);
    const detail::WindowSnapshot win = detail::window_metrics(rs);
    {
        json j;
        j["kind"] = "final";
        j["episode"] = rs.episode;
        j["env_steps"] = rs.env_steps;
        j["M_t"] = rs.metrics.task_success();
        j["M_o"] = rs.metrics.optimality();
        j["M_s"] = rs.metrics.sparsity();
        j["win_M_t"] = win.Mt;
        j["win_M_o"] = win.Mo;
        j["win_M_s"] = win.Ms;
        j["stage"] = rs.stage.stage;
        j["file"] = "final.bin";
        log.line(j);
    }
    log.flush();

    const auto wall_end = std::chrono::steady_clock::now();
    meta << "end " << detail::iso_now() << "\n";
    meta << "elapsed_seconds "
         << std::chrono::duration<double>(wall_end - wall_start).count() << "\n";

    TrainResult tr;
    tr.out_dir = out_dir;
    tr.log_path = log_path;
    tr.final_checkpoint = out_dir / "final.bin";
    tr.metrics = rs.metrics;
    tr.win_Mt = win.Mt;
    tr.win_Mo = win.Mo;
    tr.win_Ms = win.Ms;
    tr.episodes = rs.episode;
    tr.env_steps = rs.env_steps;
    tr.final_stage = rs.stage.stage;
    return tr;
}

// --- sweep ---------------------------------------------------------------------

struct SweepSeedOutcome {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double win_Mt = 0.0, win_Mo = 0.0, win_Ms = 0.0;
    std::string run_dir;
};

struct SweepCell {
    double alpha_speaker = 0.0, alpha_listener = 0.0;
    int rep_size = 0;
    std::vector<SweepSeedOutcome> seeds;
    int ok_count = 0;
    double mean_Mo = 0.0;
    std::optional<double> se_Mo;
};

struct SweepResult {
    std::vector<SweepCell> cells;
    int best_cell = -1;                 // by mean windowed-final M_o
    int best_pair_cell = -1;            // single best run
    std::uint64_t best_pair_seed = 0;
    double best_pair_Mo = 0.0;
    std::string best_pair_dir;
};

// Full grid x seeds, serial. A run that throws is recorded against its cell
// and the sweep moves on.
inline SweepResult sweep(const SweepGrid& grid, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    SweepResult res;
    int cell_idx = 0;
    for (double as : grid.alpha_speaker)
        for (double al : grid.alpha_listener)
            for (int rep : grid.rep_size) {
                SweepCell cell;
                cell.alpha_speaker = as;
                cell.alpha_listener = al;
                cell.rep_size = rep;
                std::vector<double> mos;
                for (int s = 0; s < grid.seeds; ++s) {
                    ExperimentConfig cfg = grid.base;
                    cfg.alpha_speaker = as;
                    cfg.alpha_listener = al;
                    cfg.rep_size = rep;
                    cfg.seed = grid.base.seed + static_cast<std::uint64_t>(s);
                    SweepSeedOutcome so;
                    so.seed = cfg.seed;
                    char sub[64];
                    std::snprintf(sub, sizeof sub, "cell%03d_seed%llu", cell_idx,
                                  static_cast<unsigned long long>(cfg.seed));
                    so.run_dir = sub;
                    try {
                        TrainResult tr = train(cfg, out_dir / sub);
                        so.ok = true;
                        so.win_Mt = tr.win_Mt;
                        so.win_Mo = tr.win_Mo;
                        so.win_Ms = tr.win_Ms;
                        mos.push_back(tr.win_Mo);
                        if (res.best_pair_cell < 0 || tr.win_Mo > res.best_pair_Mo) {
                            res.best_pair_cell = cell_idx;
                            res.best_pair_seed = cfg.seed;
                            res.best_pair_Mo = tr.win_Mo;
                            res.best_pair_dir = so.run_dir;
                        }
                    } catch (const std::exception& e) {
                        so.ok = false;
                        so.error = e.what();
                    }
                    cell.seeds.push_back(std::move(so));
                }
                cell.ok_count = static_cast<int>(mos.size());
                if (!mos.empty()) {
                    double s = 0.0;
                    for (double v : mos) s += v;
                    cell.mean_Mo = s / mos.size();
                    cell.se_Mo = standard_error(mos);
                    if (res.best_cell < 0 || cell.mean_Mo > res.cells[res.best_cell].mean_Mo)
                        res.best_cell = cell_idx;
                }
                res.cells.push_back(std::move(cell));
                ++cell_idx;
            }

    json j;
    j["kind"] = "sweep";
    j["cells"] = json::array();
    for (const auto& c : res.cells) {
        json cj;
        cj["alpha_speaker"] = c.alpha_speaker;
        cj["alpha_listener"] = c.alpha_listener;
        cj["rep_size"] = c.rep_size;
        cj["ok"] = c.ok_count;
        cj["mean_M_o"] = c.mean_Mo;
        if (c.se_Mo) cj["se_M_o"] = *c.se_Mo;
        cj["seeds"] = json::array();
        for (const auto& s : c.seeds) {
            json sj;
            sj["seed"] = s.seed;
            sj["ok"] = s.ok;
            if (s.ok) {
                sj["win_M_t"] = s.win_Mt;
                sj["win_M_o"] = s.win_Mo;
                sj["win_M_s"] = s.win_Ms;
                sj["dir"] = s.run_dir;
            } else {
                sj["error"] = s.error;
            }
            cj["seeds"].push_back(sj);
        }
        j["cells"].push_back(cj);
    }
    j["best_cell"] = res.best_cell;
    if (res.best_pair_cell >= 0) {
        j["best_pair"] = {{"cell", res.best_pair_cell},
                          {"seed", res.best_pair_seed},
                          {"win_M_o", res.best_pair_Mo},
                          {"dir", res.best_pair_dir}};
    }
    std::ofstream f(out_dir / "sweep.json");
    f << j.dump(2) << "\n";
    return res;
}

}  // namespace gridtalk
