#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "env.hpp"
#include "qlearn.hpp"

namespace gridtalk {

enum class ModeKind : std::uint8_t { cheap_talk, fixed_penalty, curriculum, situated, upfront };

inline const char* to_string(ModeKind k) {
    switch (k) {
        case ModeKind::cheap_talk: return "cheap_talk";
        case ModeKind::fixed_penalty: return "fixed_penalty";
        case ModeKind::curriculum: return "curriculum";
        case ModeKind::situated: return "situated";
        case ModeKind::upfront: return "upfront";
    }
    throw std::logic_error("bad ModeKind");
}

inline ModeKind mode_kind_from_string(std::string_view s) {
    for (int i = 0; i <= 4; ++i)
        if (s == to_string(static_cast<ModeKind>(i)))
            return static_cast<ModeKind>(i);
    throw std::runtime_error("unknown mode: " + std::string(s));
}

// Stage ladder for the penalty curriculum. Two shipped schedules: an
// open-ended one that keeps adding a fixed increment per stage, and an
// explicit list. Stage 0 is always free.
struct PenaltySchedule {
    std::vector<double> stage_penalties{0.0};
    bool open_ended = false;
    double increment = 0.0;
    std::int64_t min_stage_steps = 2'000'000;
    double success_threshold = 0.95;
    std::int64_t cap_steps = 15'000'000;

    double penalty_at(int stage) const {
        if (stage < 0) throw std::logic_error("penalty_at: negative stage");
        if (stage < static_cast<int>(stage_penalties.size())) return stage_penalties[stage];
        if (open_ended)
            return stage_penalties.back() +
                   increment * (stage + 1 - static_cast<int>(stage_penalties.size()));
        return stage_penalties.back();
    }
    // Highest stage that still changes the penalty; open-ended ladders have none.
    std::optional<int> last_stage() const {
        if (open_ended) return std::nullopt;
        return static_cast<int>(stage_penalties.size()) - 1;
    }
};

// Unbounded ladder: 0.01 more per stage, no top.
inline PenaltySchedule make_schedule_mp1(std::int64_t min_stage_steps, double threshold,
                                         std::int64_t cap_steps) {
    PenaltySchedule s;
    s.stage_penalties = {0.0};
    s.open_ended = true;
    s.increment = 0.01;
    s.min_stage_steps = min_stage_steps;
    s.success_threshold = threshold;
    s.cap_steps = cap_steps;
    return s;
}

// Fixed ladder ending at 0.3.
inline PenaltySchedule make_schedule_mp2(std::int64_t min_stage_steps, double threshold,
                                         std::int64_t cap_steps) {
    PenaltySchedule s;
    s.stage_penalties = {0.0, 0.01, 0.05, 0.1, 0.2, 0.3};
    s.open_ended = false;
    s.min_stage_steps = min_stage_steps;
    s.success_threshold = threshold;
    s.cap_steps = cap_steps;
    return s;
}

// Success rate over the most recent episodes, ring-buffered.
struct SuccessWindow {
    int capacity = 1000;
    std::vector<std::uint8_t> ring;
    int head = 0;
    int count = 0;
    int successes = 0;

    void push(bool success) {
        if (capacity <= 0) throw std::logic_error("SuccessWindow: bad capacity");
        if (static_cast<int>(ring.size()) < capacity) ring.resize(capacity, 0);
        if (count == capacity) {
            successes -= ring[head];
        } else {
            ++count;
        }
        ring[head] = success ? 1 : 0;
        successes += ring[head];
        head = (head + 1) % capacity;
    }
    double rate() const { return count == 0 ? 0.0 : static_cast<double>(successes) / count; }
    void clear() {
        ring.assign(ring.size(), 0);
        head = count = successes = 0;
    }
};

struct StageState {
    int stage = 0;
    std::int64_t steps_in_stage = 0;
    SuccessWindow window;
};

// Advance when the stage has run its minimum and the windowed success rate
// clears the threshold, or unconditionally at the step cap. Counters and the
// window reset so each stage is judged on its own episodes.
inline StageState advance_curriculum(const PenaltySchedule& sched, StageState st) {
    const bool earned =
        st.steps_in_stage >= sched.min_stage_steps && st.window.rate() >= sched.success_threshold;
    const bool forced = st.steps_in_stage >= sched.cap_steps;
    if (!(earned || forced)) return st;
    auto last = sched.last_stage();
    if (last && st.stage >= *last) {
        // top of the ladder: stay, but restart the stage clock
        st.steps_in_stage = 0;
        st.window.clear();
        return st;
    }
    st.stage += 1;
    st.steps_in_stage = 0;
    st.window.clear();
    return st;
}

struct ModeConfig {
    ModeKind kind = ModeKind::cheap_talk;
    double fixed_penalty_value = 0.0;  // fixed_penalty only
    PenaltySchedule schedule;          // curriculum only
    int upfront_tokens = 1;            // upfront only

    int message_slots() const { return kind == ModeKind::upfront ? upfront_tokens : 1; }

    void validate() const {
        switch (kind) {
            case ModeKind::fixed_penalty:
                // zero is legal and must behave exactly like cheap talk
                if (fixed_penalty_value < 0.0)
                    throw std::logic_error("fixed_penalty must be non-negative");
                break;
            case ModeKind::upfront:
                if (upfront_tokens < 1 || upfront_tokens > 3)
                    throw std::logic_error("upfront_tokens must be 1, 2 or 3");
                break;
            default:
                break;
        }
    }
};

// Per-message charge. Symbol 0 is free everywhere; modes without penalties
// must not ask.
inline double message_penalty(const ModeConfig& mode, const StageState& stage, int symbol) {
    if (symbol < 0 || symbol >= kSymbolCount)
        throw std::logic_error("message_penalty: bad symbol");
    switch (mode.kind) {
        case ModeKind::fixed_penalty:
            return symbol == kNullSymbol ? 0.0 : mode.fixed_penalty_value;
        case ModeKind::curriculum:
            return symbol == kNullSymbol ? 0.0 : mode.schedule.penalty_at(stage.stage);
        default:
            throw std::logic_error("message_penalty: mode has no penalties");
    }
}

// --- per-episode mediation ---------------------------------------------------

// Mutable episode state shared across mediate_step calls: recurrent carries,
// the trajectories under construction, the solicitation flag, and the
// speaker's reward accrual between its actions.
struct EpisodeContext {
    MemoryState speaker_mem, listener_mem;
    Trajectory speaker_traj, listener_traj;
    bool pending_solicit = false;
    std::vector<int> upfront_tokens;
    double gamma = 0.99;

    // Open speaker record: rewards earned since its last action, discounted
    // back to that action.
    bool speaker_open = false;
    double accrued_reward = 0.0;
    double accrued_discount = 1.0;

    void open_speaker_record(std::vector<double> input, const MemoryState& mem, int symbol,
                             const std::array<double, kActionCount>& q) {
        close_speaker_record();
        TrajectoryStep st;
        st.input = std::move(input);
        st.mem = mem;
        st.action = symbol;
        st.q = q;
        speaker_traj.steps.push_back(std::move(st));
        speaker_open = true;
        accrued_reward = 0.0;
        accrued_discount = 1.0;
    }
    void accrue_speaker_reward(double r) {
        if (!speaker_open) return;
        accrued_reward += accrued_discount * r;
        accrued_discount *= gamma;
    }
    void close_speaker_record() {
        if (!speaker_open) return;
        TrajectoryStep& st = speaker_traj.steps.back();
        st.reward = accrued_reward;
        st.discount_to_next = accrued_discount;
        speaker_open = false;
    }
};

inline EpisodeContext make_episode_context(const Agent& speaker, const Agent& listener,
                                           double gamma) {
    EpisodeContext ctx;
    ctx.speaker_mem = initial_memory(speaker.spec);
    ctx.listener_mem = initial_memory(listener.spec);
    ctx.gamma = gamma;
    return ctx;
}

// What one mediated step produced.
struct StepOutcome {
    std::optional<Message> delivered;  // message the listener saw this step
    ListenerAction action = ListenerAction::stay;
    double env_reward = 0.0;
    double speaker_reward = 0.0;  // env reward minus any message penalty
    bool solicited = false;       // delivered because of a previous stay
    bool speaker_acted = false;
    double penalty = 0.0;
};

// Upfront regime: the speaker emits k tokens before the first env step, seen
// by the listener on every step of the episode. Each selection is one
// trajectory record; all but the last carry zero reward and no discount, the
// last one accrues the whole episode.
inline void generate_upfront(const ModeConfig& mode, Agent& speaker, const MazeLayout& m,
                             const EnvState& state, EpisodeContext& ctx, double epsilon,
                             RngStream& rng) {
    mode.validate();
    if (mode.kind != ModeKind::upfront) throw std::logic_error("generate_upfront: wrong mode");
    if (state.step_count != 0 || state.done)
        throw std::logic_error("generate_upfront: episode already started");
    if (!ctx.upfront_tokens.empty()) throw std::logic_error("generate_upfront: tokens already set");
    std::vector<double> input = encode_speaker_input(speaker_view(m, state));
    for (int i = 0; i < mode.upfront_tokens; ++i) {
        ActResult act = agent_act(speaker, input, ctx.speaker_mem, epsilon, rng);
        ctx.open_speaker_record(input, ctx.speaker_mem, act.action, act.q);
        if (i + 1 < mode.upfront_tokens) {
            // no env steps between selections
            ctx.accrued_discount = 1.0;
            ctx.close_speaker_record();
        }
        ctx.speaker_mem = act.mem_after;
        ctx.upfront_tokens.push_back(act.action);
    }
}

// One environment step under a communication regime: decide whether the
// speaker talks, what the listener sees, apply the listener's action, and
// record both trajectories.
inline StepOutcome mediate_step(const ModeConfig& mode, const StageState& stage, Agent& speaker,
                                Agent& listener, const MazeLayout& m, EnvState& state,
                                EpisodeContext& ctx, double speaker_eps, double listener_eps,
                                RngStream& speaker_rng, RngStream& listener_rng) {
    if (state.done) throw std::logic_error("mediate_step: episode already finished");
    StepOutcome out;

    const bool speaker_turn =
        mode.kind == ModeKind::upfront
            ? false
            : (mode.kind != ModeKind::situated || ctx.pending_solicit);
    if (speaker_turn) {
        std::vector<double> input = encode_speaker_input(speaker_view(m, state));
        ActResult act = agent_act(speaker, input, ctx.speaker_mem, speaker_eps, speaker_rng);
        ctx.open_speaker_record(std::move(input), ctx.speaker_mem, act.action, act.q);
        ctx.speaker_mem = act.mem_after;
        out.delivered = Message{act.action};
        out.speaker_acted = true;
        out.solicited = mode.kind == ModeKind::situated;
        if (mode.kind == ModeKind::fixed_penalty || mode.kind == ModeKind::curriculum)
            out.penalty = message_penalty(mode, stage, act.action);
    }

    ListenerView lv = listener_view(m, state, listener.cfg.visibility);
    std::vector<double> lin;
    if (mode.kind == ModeKind::upfront) {
        if (static_cast<int>(ctx.upfront_tokens.size()) != mode.upfront_tokens)
            throw std::logic_error("mediate_step: upfront tokens missing");
        lin = encode_listener_input(lv, ctx.upfront_tokens, mode.upfront_tokens);
    } else {
        lin = encode_listener_input(lv, out.delivered);
    }
    ActResult lact = agent_act(listener, lin, ctx.listener_mem, listener_eps, listener_rng);
    out.action = static_cast<ListenerAction>(lact.action);

    StepResult sr = apply_action(m, state, out.action);
    state = sr.state;
    out.env_reward = sr.reward;
    out.speaker_reward = sr.reward - out.penalty;

    TrajectoryStep lstep;
    lstep.input = std::move(lin);
    lstep.mem = ctx.listener_mem;
    lstep.action = lact.action;
    lstep.reward = sr.reward;
    lstep.q = lact.q;
    ctx.listener_traj.steps.push_back(std::move(lstep));
    ctx.listener_mem = lact.mem_after;

    ctx.accrue_speaker_reward(out.speaker_reward);

    if (mode.kind == ModeKind::situated)
        ctx.pending_solicit = (out.action == ListenerAction::stay);
    return out;
}

// Seal both trajectories once the episode is over. On timeout the listener
// bootstraps from its would-be next observation, formed with the speaker's
// greedy message (nothing is committed: copies of the memories are used and
// no rng is consumed); the speaker bootstraps from its own greedy evaluation
// of the final state.
inline void finalize_trajectories(const ModeConfig& mode, const Agent& speaker,
                                  const Agent& listener, const MazeLayout& m,
                                  const EnvState& state, EpisodeContext& ctx) {
    if (!state.done) throw std::logic_error("finalize_trajectories: episode still running");
    const bool terminal = state.agent_pos == state.goal_pos;

    ctx.close_speaker_record();
    ctx.speaker_traj.complete = true;
    ctx.speaker_traj.terminal = terminal;
    ctx.listener_traj.complete = true;
    ctx.listener_traj.terminal = terminal;

    if (!terminal) {
        std::optional<Message> virtual_msg;
        double speaker_max_q = 0.0;
        bool have_speaker_q = false;
        if (mode.kind != ModeKind::upfront &&
            (mode.kind != ModeKind::situated || ctx.pending_solicit)) {
            std::vector<double> sin = encode_speaker_input(speaker_view(m, state));
            ForwardResult f = forward(speaker.spec, speaker.params, sin, ctx.speaker_mem);
            int best = 0;
            for (int i = 1; i < kActionCount; ++i)
                if (f.q[i] > f.q[best]) best = i;
            virtual_msg = Message{best};
            speaker_max_q = f.q[best];
            have_speaker_q = true;
        }
        ListenerView lv = listener_view(m, state, listener.cfg.visibility);
        std::vector<double> lin =
            mode.kind == ModeKind::upfront
                ? encode_listener_input(lv, ctx.upfront_tokens, mode.upfront_tokens)
                : encode_listener_input(lv, virtual_msg);
        ForwardResult lf = forward(listener.spec, listener.params, lin, ctx.listener_mem);
        double lmax = lf.q[0];
        for (int i = 1; i < kActionCount; ++i) lmax = std::max(lmax, lf.q[i]);
        ctx.listener_traj.final_bootstrap = lmax;

        if (!ctx.speaker_traj.steps.empty()) {
            if (have_speaker_q) {
                ctx.speaker_traj.final_bootstrap = speaker_max_q;
            } else {
                // situated with no pending solicit, or upfront: value the
                // final state through the speaker's own network as if asked.
                std::vector<double> sin = encode_speaker_input(speaker_view(m, state));
                ForwardResult f = forward(speaker.spec, speaker.params, sin, ctx.speaker_mem);
                double smax = f.q[0];
                for (int i = 1; i < kActionCount; ++i) smax = std::max(smax, f.q[i]);
                ctx.speaker_traj.final_bootstrap = smax;
            }
        }
    }
}

}  // namespace gridtalk
