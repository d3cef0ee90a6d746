#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "env.hpp"
#include "net.hpp"

namespace gridtalk {

inline constexpr int kSymbolCount = 5;
inline constexpr int kNullSymbol = 0;  // always free of charge under penalties

struct Message {
    int symbol = kNullSymbol;  // 0..4
};

enum class Role : std::uint8_t { speaker, listener };

struct AgentConfig {
    Role role = Role::listener;
    Visibility visibility = Visibility::none;  // listener only
    bool has_memory = false;
    int rep_size = 16;
    double alpha = 1e-5;
    double epsilon = 0.01;
    double gamma = 0.99;
    double lambda = 0.9;
};

struct Agent {
    AgentConfig cfg;
    NetworkSpec spec;
    ParamSet params;
};

// Speaker sees the full rotated map through the conv encoder.
inline Agent make_speaker(const AgentConfig& cfg, RngStream& init_rng, int conv1_channels = 16) {
    Agent a;
    a.cfg = cfg;
    a.cfg.role = Role::speaker;
    a.spec.encoder = EncoderKind::conv_map;
    a.spec.map_side = kGridSide;
    a.spec.input_width = kGridSide * kGridSide * 3;
    a.spec.conv1_channels = conv1_channels;
    a.spec.rep_size = cfg.rep_size;
    a.spec.has_memory = cfg.has_memory;
    a.params = init_params(a.spec, init_rng);
    return a;
}

// Listener input: its (possibly empty) 3-pixel view plus one 5-wide message
// slot per token it can receive each step.
inline Agent make_listener(const AgentConfig& cfg, int message_slots, RngStream& init_rng) {
    if (message_slots < 1) throw std::logic_error("make_listener: message_slots < 1");
    Agent a;
    a.cfg = cfg;
    a.cfg.role = Role::listener;
    a.spec.encoder = EncoderKind::dense_flat;
    a.spec.input_width =
        (cfg.visibility == Visibility::partial ? 9 : 0) + kSymbolCount * message_slots;
    a.spec.rep_size = cfg.rep_size;
    a.spec.has_memory = cfg.has_memory;
    a.params = init_params(a.spec, init_rng);
    return a;
}

// Epsilon-greedy: with probability epsilon a uniform action, otherwise the
// argmax with ties broken toward the lowest index. The exploration draw is
// consumed even when epsilon is 0 so call sites stay on one rng schedule.
inline int select_action(std::span<const double> q, double epsilon, RngStream& rng) {
    if (epsilon < 0.0 || epsilon > 1.0) throw std::logic_error("select_action: bad epsilon");
    const int n = static_cast<int>(q.size());
    if (rng.next_double() < epsilon) return rng.next_index(n);
    int best = 0;
    for (int i = 1; i < n; ++i)
        if (q[i] > q[best]) best = i;
    return best;
}

// --- trajectories and lambda returns ---------------------------------------

// One decision of one agent. q holds the values computed at selection time;
// they double as the bootstrap estimates when targets are formed, so learning
// needs no second pass over the network. discount_to_next covers the time
// between this decision and the agent's next one (gamma by default; gamma^k
// for speakers that act every k env steps).
struct TrajectoryStep {
    std::vector<double> input;
    MemoryState mem;  // carry fed into the forward pass at this step
    int action = 0;
    double reward = 0.0;
    std::array<double, kActionCount> q{};
    double discount_to_next = -1.0;  // negative: use the trajectory-wide gamma
};

struct Trajectory {
    std::vector<TrajectoryStep> steps;
    bool complete = false;   // episode finished (goal or timeout)
    bool terminal = false;   // ended at the goal: nothing to bootstrap
    double final_bootstrap = 0.0;  // max-q estimate past the last step on timeout
};

// Forward-view lambda returns over a finished trajectory.
//
// The n-step return from t bootstraps from the stored selection-time
// q-values; with the series truncated at the trajectory end, the remaining
// weight mass lambda^(N-1) goes to the longest return, so the weights always
// sum to one. Computed right to left:
//
//   G_T-1 = r + d * B_T
//   G_t   = r_t + d_t * ((1-lambda) * max q_{t+1} + lambda * G_{t+1})
//
// which expands to exactly that truncated weighted series.
inline std::vector<double> lambda_targets(const Trajectory& traj, double gamma, double lambda) {
    if (!traj.complete) throw std::logic_error("lambda_targets: trajectory not finished");
    if (traj.steps.empty()) throw std::logic_error("lambda_targets: empty trajectory");
    if (lambda < 0.0 || lambda > 1.0) throw std::logic_error("lambda_targets: bad lambda");
    const std::size_t T = traj.steps.size();
    for (const auto& st : traj.steps)
        if (!std::isfinite(st.reward)) throw std::logic_error("lambda_targets: bad reward");

    auto step_discount = [&](std::size_t t) {
        const double d = traj.steps[t].discount_to_next;
        return d < 0.0 ? gamma : d;
    };
    auto max_q = [&](std::size_t t) {
        const auto& q = traj.steps[t].q;
        double m = q[0];
        for (int i = 1; i < kActionCount; ++i) m = std::max(m, q[i]);
        return m;
    };

    std::vector<double> targets(T);
    const double tail = traj.terminal ? 0.0 : traj.final_bootstrap;
    targets[T - 1] = traj.steps[T - 1].reward + step_discount(T - 1) * tail;
    for (std::size_t t = T - 1; t-- > 0;) {
        targets[t] = traj.steps[t].reward +
                     step_discount(t) * ((1.0 - lambda) * max_q(t + 1) + lambda * targets[t + 1]);
    }
    return targets;
}

// --- observation encodings --------------------------------------------------

inline std::vector<double> encode_speaker_input(const SpeakerView& view) {
    std::vector<double> x(view.pixels.size() * 3);
    for (std::size_t i = 0; i < view.pixels.size(); ++i)
        for (int c = 0; c < 3; ++c) x[i * 3 + c] = view.pixels[i][c];
    return x;
}

// View pixels then `slots` message slots of 5 values each. A delivered token
// is one-hot (symbol 0 included); an empty slot is all zeros, which no
// one-hot can produce.
inline std::vector<double> encode_listener_input(const ListenerView& view,
                                                 std::span<const int> tokens, int slots) {
    if (slots < 1) throw std::logic_error("encode_listener_input: slots < 1");
    if (!tokens.empty() && static_cast<int>(tokens.size()) != slots)
        throw std::logic_error("encode_listener_input: token count != slots");
    std::vector<double> x(view.pixels.size() * 3 + static_cast<std::size_t>(slots) * kSymbolCount,
                          0.0);
    for (std::size_t i = 0; i < view.pixels.size(); ++i)
        for (int c = 0; c < 3; ++c) x[i * 3 + c] = view.pixels[i][c];
    const std::size_t base = view.pixels.size() * 3;
    for (std::size_t s = 0; s < tokens.size(); ++s) {
        if (tokens[s] < 0 || tokens[s] >= kSymbolCount)
            throw std::logic_error("encode_listener_input: bad symbol");
        x[base + s * kSymbolCount + tokens[s]] = 1.0;
    }
    return x;
}

inline std::vector<double> encode_listener_input(const ListenerView& view,
                                                 const std::optional<Message>& msg) {
    if (msg) {
        const int tok[1] = {msg->symbol};
        return encode_listener_input(view, tok, 1);
    }
    return encode_listener_input(view, {}, 1);
}

// --- acting and learning -----------------------------------------------------

struct ActResult {
    int action = 0;
    std::array<double, kActionCount> q{};
    MemoryState mem_after;
};

inline ActResult agent_act(const Agent& a, std::span<const double> input,
                           const MemoryState& mem, double epsilon, RngStream& rng) {
    ForwardResult f = forward(a.spec, a.params, input, mem);
    ActResult r;
    r.q = f.q;
    r.mem_after = std::move(f.mem);
    r.action = select_action(r.q, epsilon, rng);
    return r;
}

// One fitted-Q regression on the finished trajectory: lambda targets, one
// Adam step on the whole-episode batch. Returns the pre-step loss.
inline double fitted_q_update(Agent& a, const Trajectory& traj) {
    std::vector<double> targets = lambda_targets(traj, a.cfg.gamma, a.cfg.lambda);
    std::vector<QRegressionRecord> batch(traj.steps.size());
    for (std::size_t i = 0; i < traj.steps.size(); ++i) {
        batch[i].input = traj.steps[i].input;
        batch[i].mem = traj.steps[i].mem;
        batch[i].action = traj.steps[i].action;
        batch[i].target = targets[i];
    }
    LossAndGrads lg = loss_and_grads(a.spec, a.params, batch);
    adam_step(a.params, lg.grads, a.cfg.alpha);
    return lg.loss;
}

}  // namespace gridtalk
