#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rng.hpp"

namespace gridtalk {

// Q-network used by both agents:
//
//   encoder -> fully connected -> [recurrent unit] -> linear head (5 outputs)
//
// The speaker encoder is two valid convolutions over the 9x9x3 map (5x5
// stride 2, then 3x3 stride 1, collapsing to a single spatial cell); the
// listener encoder is one dense layer over its flat input. Every encoder
// layer and the fully connected layer are followed by a rectifier. All math
// is double precision; gradients are computed by hand (reverse mode) and
// checked against central differences in the tests.

enum class EncoderKind : std::uint8_t { conv_map, dense_flat };

struct NetworkSpec {
    EncoderKind encoder = EncoderKind::dense_flat;
    int input_width = 0;       // total flat input width (map inputs: side*side*3)
    int map_side = 9;          // conv input is map_side x map_side x 3
    int conv1_channels = 16;
    int rep_size = 16;         // representation width; also LSTM hidden size
    bool has_memory = false;
    int action_count = 5;

    int conv1_out_side() const { return (map_side - 5) / 2 + 1; }
    int conv2_out_side() const { return conv1_out_side() - 2; }

    void validate() const {
        if (rep_size != 8 && rep_size != 16 && rep_size != 32)
            throw std::logic_error("NetworkSpec: rep_size must be 8, 16 or 32");
        if (action_count != 5) throw std::logic_error("NetworkSpec: action_count must be 5");
        if (encoder == EncoderKind::conv_map) {
            if (input_width != map_side * map_side * 3)
                throw std::logic_error("NetworkSpec: conv input width mismatch");
            if ((map_side - 5) % 2 != 0 || conv2_out_side() != 1)
                throw std::logic_error("NetworkSpec: conv stack must collapse to 1x1");
            if (conv1_channels < 1) throw std::logic_error("NetworkSpec: conv1_channels < 1");
        } else {
            if (input_width < 1) throw std::logic_error("NetworkSpec: input_width < 1");
        }
    }

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

struct ParamTensor {
    std::string name;
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> m, v;  // Adam moments; empty in gradient sets

    std::size_t size() const { return value.size(); }
};

struct ParamSet {
    std::vector<ParamTensor> tensors;
    std::int64_t adam_step_count = 0;

    ParamTensor& at(std::string_view name) {
        for (auto& t : tensors)
            if (t.name == name) return t;
        throw std::logic_error("ParamSet: no tensor named " + std::string(name));
    }
    const ParamTensor& at(std::string_view name) const {
        return const_cast<ParamSet*>(this)->at(name);
    }
    bool has(std::string_view name) const {
        for (auto& t : tensors)
            if (t.name == name) return true;
        return false;
    }
    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (auto& t : tensors) n += t.size();
        return n;
    }
    bool all_finite() const {
        for (auto& t : tensors)
            for (double x : t.value)
                if (!std::isfinite(x)) return false;
        return true;
    }
};

namespace detail {

inline std::size_t shape_size(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

inline void add_tensor(ParamSet& p, std::string name, std::vector<int> shape,
                       double init_bound, RngStream& rng) {
    ParamTensor t;
    t.name = std::move(name);
    t.shape = std::move(shape);
    t.value.resize(shape_size(t.shape));
    if (init_bound > 0.0)
        for (double& w : t.value) w = (2.0 * rng.next_double() - 1.0) * init_bound;
    t.m.assign(t.value.size(), 0.0);
    t.v.assign(t.value.size(), 0.0);
    p.tensors.push_back(std::move(t));
}

}  // namespace detail

// Weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero. Tensor order is
// fixed so that a given rng stream always yields the same parameters.
inline ParamSet init_params(const NetworkSpec& spec, RngStream& rng) {
    spec.validate();
    ParamSet p;
    const int R = spec.rep_size;
    if (spec.encoder == EncoderKind::conv_map) {
        const int C1 = spec.conv1_channels;
        detail::add_tensor(p, "conv1.w", {C1, 3, 5, 5}, 1.0 / std::sqrt(3.0 * 25.0), rng);
        detail::add_tensor(p, "conv1.b", {C1}, 0.0, rng);
        detail::add_tensor(p, "conv2.w", {R, C1, 3, 3}, 1.0 / std::sqrt(C1 * 9.0), rng);
        detail::add_tensor(p, "conv2.b", {R}, 0.0, rng);
    } else {
        detail::add_tensor(p, "enc.w", {R, spec.input_width},
                           1.0 / std::sqrt(static_cast<double>(spec.input_width)), rng);
        detail::add_tensor(p, "enc.b", {R}, 0.0, rng);
    }
    detail::add_tensor(p, "fc.w", {R, R}, 1.0 / std::sqrt(static_cast<double>(R)), rng);
    detail::add_tensor(p, "fc.b", {R}, 0.0, rng);
    if (spec.has_memory) {
        detail::add_tensor(p, "lstm.wx", {4 * R, R}, 1.0 / std::sqrt(static_cast<double>(R)), rng);
        detail::add_tensor(p, "lstm.wh", {4 * R, R}, 1.0 / std::sqrt(static_cast<double>(R)), rng);
        detail::add_tensor(p, "lstm.b", {4 * R}, 0.0, rng);
    }
    detail::add_tensor(p, "head.w", {spec.action_count, R},
                       1.0 / std::sqrt(static_cast<double>(R)), rng);
    detail::add_tensor(p, "head.b", {spec.action_count}, 0.0, rng);
    return p;
}

// Gradient accumulator with the same tensor layout, values zeroed, no moments.
inline ParamSet make_gradient_set(const ParamSet& params) {
    ParamSet g;
    g.tensors.reserve(params.tensors.size());
    for (const auto& t : params.tensors) {
        ParamTensor gt;
        gt.name = t.name;
        gt.shape = t.shape;
        gt.value.assign(t.value.size(), 0.0);
        g.tensors.push_back(std::move(gt));
    }
    return g;
}

// Recurrent carry. Empty h/c mean "no memory" (memoryless specs) or the
// zeroed initial state handled by initial_memory().
struct MemoryState {
    std::vector<double> h, c;
    bool empty() const { return h.empty(); }

    friend bool operator==(const MemoryState&, const MemoryState&) = default;
};

inline MemoryState initial_memory(const NetworkSpec& spec) {
    MemoryState m;
    if (spec.has_memory) {
        m.h.assign(spec.rep_size, 0.0);
        m.c.assign(spec.rep_size, 0.0);
    }
    return m;
}

namespace detail {

// y = W x + b, W row-major [rows, cols]
inline void dense_forward(std::span<const double> w, std::span<const double> b,
                          std::span<const double> x, std::span<double> y) {
    const std::size_t rows = b.size(), cols = x.size();
    for (std::size_t r = 0; r < rows; ++r) {
        double s = b[r];
        const double* wr = w.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) s += wr[c] * x[c];
        y[r] = s;
    }
}

inline void dense_backward(std::span<const double> w, std::span<const double> x,
                           std::span<const double> dy, std::span<double> dw,
                           std::span<double> db, std::span<double> dx) {
    const std::size_t rows = dy.size(), cols = x.size();
    for (std::size_t r = 0; r < rows; ++r) {
        const double g = dy[r];
        db[r] += g;
        double* dwr = dw.data() + r * cols;
        const double* wr = w.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) {
            dwr[c] += g * x[c];
            if (!dx.empty()) dx[c] += wr[c] * g;
        }
    }
}

// Valid convolution over CHW input, kernel [OC, IC, K, K], output CHW.
inline void conv_forward(std::span<const double> in, int ic, int side,
                         std::span<const double> k, std::span<const double> b, int oc,
                         int ksize, int stride, std::span<double> out, int oside) {
    for (int o = 0; o < oc; ++o)
        for (int oy = 0; oy < oside; ++oy)
            for (int ox = 0; ox < oside; ++ox) {
                double s = b[o];
                for (int i = 0; i < ic; ++i)
                    for (int ky = 0; ky < ksize; ++ky)
                        for (int kx = 0; kx < ksize; ++kx)
                            s += k[((o * ic + i) * ksize + ky) * ksize + kx] *
                                 in[(i * side + oy * stride + ky) * side + ox * stride + kx];
                out[(o * oside + oy) * oside + ox] = s;
            }
}

inline void conv_backward(std::span<const double> in, int ic, int side,
                          std::span<const double> k, int oc, int ksize, int stride,
                          std::span<const double> dout, int oside, std::span<double> dk,
                          std::span<double> db, std::span<double> din) {
    for (int o = 0; o < oc; ++o)
        for (int oy = 0; oy < oside; ++oy)
            for (int ox = 0; ox < oside; ++ox) {
                const double g = dout[(o * oside + oy) * oside + ox];
                db[o] += g;
                for (int i = 0; i < ic; ++i)
                    for (int ky = 0; ky < ksize; ++ky)
                        for (int kx = 0; kx < ksize; ++kx) {
                            const std::size_t ki = ((o * ic + i) * ksize + ky) * ksize + kx;
                            const std::size_t xi =
                                (i * side + oy * stride + ky) * side + ox * stride + kx;
                            dk[ki] += g * in[xi];
                            if (!din.empty()) din[xi] += k[ki] * g;
                        }
            }
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace detail

// Everything the backward pass needs from one forward evaluation.
struct ForwardCache {
    std::vector<double> conv_in;    // CHW copy of the map input
    std::vector<double> conv1_pre;  // pre-rectifier
    std::vector<double> conv1_act;
    std::vector<double> rep_pre;    // conv2 or enc output, pre-rectifier
    std::vector<double> rep_act;
    std::vector<double> fc_pre, fc_act;
    std::vector<double> gi, gf, gg, go;  // gate activations
    std::vector<double> c_new, tanh_c, h_new;
    std::vector<double> q;
};

struct ForwardResult {
    std::array<double, 5> q{};
    MemoryState mem;  // carry after this step (equals input carry when memoryless)
};

namespace detail {

inline void forward_cached(const NetworkSpec& spec, const ParamSet& p,
                           std::span<const double> input, const MemoryState& mem,
                           ForwardCache& cc) {
    if (static_cast<int>(input.size()) != spec.input_width)
        throw std::logic_error("forward: input width mismatch");
    const int R = spec.rep_size;

    if (spec.encoder == EncoderKind::conv_map) {
        const int side = spec.map_side, C1 = spec.conv1_channels;
        const int s1 = spec.conv1_out_side();
        // incoming pixels are row-major with channel last; conv wants planes
        cc.conv_in.resize(3 * side * side);
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x)
                for (int c = 0; c < 3; ++c)
                    cc.conv_in[(c * side + y) * side + x] = input[(y * side + x) * 3 + c];
        cc.conv1_pre.resize(C1 * s1 * s1);
        conv_forward(cc.conv_in, 3, side, p.at("conv1.w").value, p.at("conv1.b").value, C1, 5,
                     2, cc.conv1_pre, s1);
        cc.conv1_act.resize(cc.conv1_pre.size());
        for (std::size_t i = 0; i < cc.conv1_pre.size(); ++i)
            cc.conv1_act[i] = cc.conv1_pre[i] > 0.0 ? cc.conv1_pre[i] : 0.0;
        cc.rep_pre.resize(R);
        conv_forward(cc.conv1_act, C1, s1, p.at("conv2.w").value, p.at("conv2.b").value, R, 3,
                     1, cc.rep_pre, 1);
    } else {
        cc.rep_pre.resize(R);
        dense_forward(p.at("enc.w").value, p.at("enc.b").value, input, cc.rep_pre);
    }
    cc.rep_act.resize(R);
    for (int i = 0; i < R; ++i) cc.rep_act[i] = cc.rep_pre[i] > 0.0 ? cc.rep_pre[i] : 0.0;

    cc.fc_pre.resize(R);
    dense_forward(p.at("fc.w").value, p.at("fc.b").value, cc.rep_act, cc.fc_pre);
    cc.fc_act.resize(R);
    for (int i = 0; i < R; ++i) cc.fc_act[i] = cc.fc_pre[i] > 0.0 ? cc.fc_pre[i] : 0.0;

    const std::vector<double>* head_in = &cc.fc_act;
    if (spec.has_memory) {
        if (static_cast<int>(mem.h.size()) != R || static_cast<int>(mem.c.size()) != R)
            throw std::logic_error("forward: memory size mismatch");
        // standard cell: gates [i f g o] from W_x x + W_h h + b
        std::vector<double> pre(4 * R, 0.0);
        dense_forward(p.at("lstm.wx").value, p.at("lstm.b").value, cc.fc_act, pre);
        {
            std::vector<double> hh(4 * R, 0.0);
            std::vector<double> zero(4 * R, 0.0);
            dense_forward(p.at("lstm.wh").value, zero, mem.h, hh);
            for (int i = 0; i < 4 * R; ++i) pre[i] += hh[i];
        }
        cc.gi.resize(R); cc.gf.resize(R); cc.gg.resize(R); cc.go.resize(R);
        cc.c_new.resize(R); cc.tanh_c.resize(R); cc.h_new.resize(R);
        for (int i = 0; i < R; ++i) {
            cc.gi[i] = sigmoid(pre[i]);
            cc.gf[i] = sigmoid(pre[R + i]);
            cc.gg[i] = std::tanh(pre[2 * R + i]);
            cc.go[i] = sigmoid(pre[3 * R + i]);
            cc.c_new[i] = cc.gf[i] * mem.c[i] + cc.gi[i] * cc.gg[i];
            cc.tanh_c[i] = std::tanh(cc.c_new[i]);
            cc.h_new[i] = cc.go[i] * cc.tanh_c[i];
        }
        head_in = &cc.h_new;
    }
    cc.q.resize(spec.action_count);
    dense_forward(p.at("head.w").value, p.at("head.b").value, *head_in, cc.q);
}

// Reverse pass for one record. dq is dL/dq for this record only; the stored
// carry (mem) is treated as a constant, so each record's gradient is
// independent of the others.
inline void backward_cached(const NetworkSpec& spec, const ParamSet& p,
                            std::span<const double> input, const MemoryState& mem,
                            const ForwardCache& cc, std::span<const double> dq,
                            ParamSet& grads) {
    const int R = spec.rep_size;
    const std::vector<double>& head_in = spec.has_memory ? cc.h_new : cc.fc_act;
    std::vector<double> dhead_in(R, 0.0);
    dense_backward(p.at("head.w").value, head_in, dq, grads.at("head.w").value,
                   grads.at("head.b").value, dhead_in);

    std::vector<double> dfc_act(R, 0.0);
    if (spec.has_memory) {
        std::vector<double> dpre(4 * R, 0.0);
        for (int i = 0; i < R; ++i) {
            const double dh = dhead_in[i];
            const double dc = dh * cc.go[i] * (1.0 - cc.tanh_c[i] * cc.tanh_c[i]);
            const double di = dc * cc.gg[i];
            const double df = dc * mem.c[i];
            const double dg = dc * cc.gi[i];
            const double dout = dh * cc.tanh_c[i];
            dpre[i] = di * cc.gi[i] * (1.0 - cc.gi[i]);
            dpre[R + i] = df * cc.gf[i] * (1.0 - cc.gf[i]);
            dpre[2 * R + i] = dg * (1.0 - cc.gg[i] * cc.gg[i]);
            dpre[3 * R + i] = dout * cc.go[i] * (1.0 - cc.go[i]);
        }
        dense_backward(p.at("lstm.wx").value, cc.fc_act, dpre, grads.at("lstm.wx").value,
                       grads.at("lstm.b").value, dfc_act);
        std::vector<double> db_scratch(4 * R, 0.0);  // bias already credited above
        std::vector<double> dh_prev;                 // discarded: carries are constants here
        dense_backward(p.at("lstm.wh").value, mem.h, dpre, grads.at("lstm.wh").value,
                       db_scratch, dh_prev);
    } else {
        dfc_act = dhead_in;
    }

    std::vector<double> dfc_pre(R);
    for (int i = 0; i < R; ++i) dfc_pre[i] = cc.fc_pre[i] > 0.0 ? dfc_act[i] : 0.0;
    std::vector<double> drep_act(R, 0.0);
    dense_backward(p.at("fc.w").value, cc.rep_act, dfc_pre, grads.at("fc.w").value,
                   grads.at("fc.b").value, drep_act);

    std::vector<double> drep_pre(R);
    for (int i = 0; i < R; ++i) drep_pre[i] = cc.rep_pre[i] > 0.0 ? drep_act[i] : 0.0;

    if (spec.encoder == EncoderKind::conv_map) {
        const int side = spec.map_side, C1 = spec.conv1_channels;
        const int s1 = spec.conv1_out_side();
        std::vector<double> dconv1_act(C1 * s1 * s1, 0.0);
        conv_backward(cc.conv1_act, C1, s1, p.at("conv2.w").value, R, 3, 1, drep_pre, 1,
                      grads.at("conv2.w").value, grads.at("conv2.b").value, dconv1_act);
        std::vector<double> dconv1_pre(dconv1_act.size());
        for (std::size_t i = 0; i < dconv1_act.size(); ++i)
            dconv1_pre[i] = cc.conv1_pre[i] > 0.0 ? dconv1_act[i] : 0.0;
        std::span<double> no_din;
        conv_backward(cc.conv_in, 3, side, p.at("conv1.w").value, C1, 5, 2, dconv1_pre, s1,
                      grads.at("conv1.w").value, grads.at("conv1.b").value, no_din);
    } else {
        std::vector<double> din;  // input is a constant
        dense_backward(p.at("enc.w").value, input, drep_pre, grads.at("enc.w").value,
                       grads.at("enc.b").value, din);
    }
}

}  // namespace detail

inline ForwardResult forward(const NetworkSpec& spec, const ParamSet& p,
                             std::span<const double> input, const MemoryState& mem) {
    ForwardCache cc;
    detail::forward_cached(spec, p, input, mem, cc);
    ForwardResult r;
    for (int a = 0; a < spec.action_count; ++a) r.q[a] = cc.q[a];
    if (spec.has_memory) {
        r.mem.h = cc.h_new;
        r.mem.c = cc.c_new;
    }
    return r;
}

// One regression record of the fitted-Q batch.
struct QRegressionRecord {
    std::vector<double> input;
    MemoryState mem;
    int action = 0;
    double target = 0.0;
};

struct LossAndGrads {
    double loss = 0.0;
    ParamSet grads;
};

// Mean squared error of q[action] against the fixed target, averaged over the
// batch. Targets are constants: no gradient flows through them, and no
// gradient flows into the stored carries, so the batch gradient is exactly
// the mean of per-record gradients.
inline LossAndGrads loss_and_grads(const NetworkSpec& spec, const ParamSet& p,
                                   std::span<const QRegressionRecord> batch) {
    if (batch.empty()) throw std::logic_error("loss_and_grads: empty batch");
    LossAndGrads out;
    out.grads = make_gradient_set(p);
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    ForwardCache cc;
    for (const auto& rec : batch) {
        if (!std::isfinite(rec.target))
            throw std::logic_error("loss_and_grads: non-finite target");
        if (rec.action < 0 || rec.action >= spec.action_count)
            throw std::logic_error("loss_and_grads: action out of range");
        detail::forward_cached(spec, p, rec.input, rec.mem, cc);
        const double err = cc.q[rec.action] - rec.target;
        out.loss += err * err * inv_n;
        std::vector<double> dq(spec.action_count, 0.0);
        dq[rec.action] = 2.0 * err * inv_n;
        detail::backward_cached(spec, p, rec.input, rec.mem, cc, dq, out.grads);
    }
    return out;
}

inline double loss_only(const NetworkSpec& spec, const ParamSet& p,
                        std::span<const QRegressionRecord> batch) {
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    ForwardCache cc;
    for (const auto& rec : batch) {
        detail::forward_cached(spec, p, rec.input, rec.mem, cc);
        const double err = cc.q[rec.action] - rec.target;
        loss += err * err * inv_n;
    }
    return loss;
}

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// One bias-corrected Adam step. The step counter lives in the ParamSet so
// that two sets updated in lockstep stay bit-identical.
inline void adam_step(ParamSet& p, const ParamSet& grads, double alpha) {
    if (alpha < 0.0 || !std::isfinite(alpha))
        throw std::logic_error("adam_step: bad learning rate");
    if (grads.tensors.size() != p.tensors.size())
        throw std::logic_error("adam_step: tensor count mismatch");
    p.adam_step_count += 1;
    const double t = static_cast<double>(p.adam_step_count);
    const double bc1 = 1.0 - std::pow(kAdamBeta1, t);
    const double bc2 = 1.0 - std::pow(kAdamBeta2, t);
    for (std::size_t ti = 0; ti < p.tensors.size(); ++ti) {
        ParamTensor& w = p.tensors[ti];
        const ParamTensor& g = grads.tensors[ti];
        if (g.name != w.name || g.value.size() != w.value.size())
            throw std::logic_error("adam_step: tensor shape mismatch");
        for (std::size_t i = 0; i < w.value.size(); ++i) {
            w.m[i] = kAdamBeta1 * w.m[i] + (1.0 - kAdamBeta1) * g.value[i];
            w.v[i] = kAdamBeta2 * w.v[i] + (1.0 - kAdamBeta2) * g.value[i] * g.value[i];
            const double mhat = w.m[i] / bc1;
            const double vhat = w.v[i] / bc2;
            w.value[i] -= alpha * mhat / (std::sqrt(vhat) + kAdamEps);
        }
    }
}

// Worst-coordinate discrepancy between the given analytic gradients and
// central finite differences. The denominator is floored at 1 so that
// truncation noise on near-zero coordinates does not register; targets and
// activations here are O(1), so this is the natural scale.
inline double finite_diff_error(const NetworkSpec& spec, ParamSet params,
                                std::span<const QRegressionRecord> batch,
                                const ParamSet& grads, double h = 1e-5) {
    double worst = 0.0;
    for (std::size_t ti = 0; ti < params.tensors.size(); ++ti) {
        auto& w = params.tensors[ti].value;
        const auto& g = grads.tensors[ti].value;
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double keep = w[i];
            w[i] = keep + h;
            const double lp = loss_only(spec, params, batch);
            w[i] = keep - h;
            const double lm = loss_only(spec, params, batch);
            w[i] = keep;
            const double num = (lp - lm) / (2.0 * h);
            const double denom = std::max({1.0, std::abs(num), std::abs(g[i])});
            worst = std::max(worst, std::abs(num - g[i]) / denom);
        }
    }
    return worst;
}

inline double finite_diff_check(const NetworkSpec& spec, const ParamSet& params,
                                std::span<const QRegressionRecord> batch, double h = 1e-5) {
    auto lg = loss_and_grads(spec, params, batch);
    return finite_diff_error(spec, params, batch, lg.grads, h);
}

}  // namespace gridtalk
