#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>

namespace gridtalk {

// Episode-level evaluation metrics, all running means over recorded episodes:
//
//   task success   M_t = mean episode reward
//   optimality     M_o = s_opt * mean(R_i / s_i)   (1 for always-optimal success)
//   sparsity       M_s = mean of -ln(max(m_i, 1)), m_i = messages other than
//                        symbol 0; 0 is silent-perfect, -ln(9) is about -2.2
//
// Accumulators merge exactly, so per-shard metrics can be combined.
struct RunningMetrics {
    std::int64_t episodes = 0;
    double sum_reward = 0.0;
    double sum_reward_per_step = 0.0;
    double sum_neg_log_messages = 0.0;
    int s_opt = 1;

    void record_episode(double total_reward, int steps, int nonzero_messages) {
        if (steps < 1) throw std::logic_error("record_episode: steps < 1");
        if (nonzero_messages < 0) throw std::logic_error("record_episode: negative count");
        if (!std::isfinite(total_reward)) throw std::logic_error("record_episode: bad reward");
        episodes += 1;
        sum_reward += total_reward;
        sum_reward_per_step += total_reward / steps;
        sum_neg_log_messages += -std::log(std::max(nonzero_messages, 1) * 1.0);
    }

    double task_success() const { return episodes == 0 ? 0.0 : sum_reward / episodes; }
    double optimality() const {
        return episodes == 0 ? 0.0 : s_opt * sum_reward_per_step / episodes;
    }
    double sparsity() const { return episodes == 0 ? 0.0 : sum_neg_log_messages / episodes; }
};

inline RunningMetrics merge(const RunningMetrics& a, const RunningMetrics& b) {
    if (a.s_opt != b.s_opt) throw std::logic_error("merge: mismatched s_opt");
    RunningMetrics m = a;
    m.episodes += b.episodes;
    m.sum_reward += b.sum_reward;
    m.sum_reward_per_step += b.sum_reward_per_step;
    m.sum_neg_log_messages += b.sum_neg_log_messages;
    return m;
}

// Mean over the last `window` entries. The empty case is flagged rather than
// folded into a fake zero; callers decide what an empty window means.
struct WindowedRate {
    double rate = 0.0;
    bool empty = true;
};

inline WindowedRate success_rate_window(std::span<const double> history, int window) {
    if (window < 1) throw std::logic_error("success_rate_window: window < 1");
    WindowedRate r;
    if (history.empty()) return r;
    const std::size_t n = std::min<std::size_t>(history.size(), window);
    double s = 0.0;
    for (std::size_t i = history.size() - n; i < history.size(); ++i) s += history[i];
    r.rate = s / n;
    r.empty = false;
    return r;
}

// Standard error of the mean: sample standard deviation over sqrt(n).
// Undefined below two samples.
inline std::optional<double> standard_error(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 2) return std::nullopt;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1));
    return sd / std::sqrt(static_cast<double>(n));
}

}  // namespace gridtalk
