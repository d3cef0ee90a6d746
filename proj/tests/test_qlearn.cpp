#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <vector>

#include "gridtalk/qlearn.hpp"

using namespace gridtalk;

namespace {

double max_q(const TrajectoryStep& st) {
    double m = st.q[0];
    for (int i = 1; i < kActionCount; ++i) m = std::max(m, st.q[i]);
    return m;
}

// Independent target computation straight from the truncated weighted series:
// every n-step return is summed explicitly, then mixed with weights
// (1-lambda) lambda^(n-1), the longest return absorbing the leftover mass.
std::vector<double> series_targets(const Trajectory& traj, double gamma, double lambda) {
    const std::size_t T = traj.steps.size();
    auto disc = [&](std::size_t t) {
        const double d = traj.steps[t].discount_to_next;
        return d < 0.0 ? gamma : d;
    };
    std::vector<double> out(T);
    for (std::size_t t = 0; t < T; ++t) {
        const std::size_t N = T - t;
        std::vector<double> q_n(N + 1);  // q_n[n] = n-step return from t
        for (std::size_t n = 1; n <= N; ++n) {
            double ret = 0.0, scale = 1.0;
            for (std::size_t k = 0; k < n; ++k) {
                ret += scale * traj.steps[t + k].reward;
                scale *= disc(t + k);
            }
            const double boot = (t + n < T) ? max_q(traj.steps[t + n])
                                            : (traj.terminal ? 0.0 : traj.final_bootstrap);
            q_n[n] = ret + scale * boot;
        }
        double target = 0.0, wsum = 0.0;
        for (std::size_t n = 1; n < N; ++n) {
            const double w = (1.0 - lambda) * std::pow(lambda, double(n - 1));
            target += w * q_n[n];
            wsum += w;
        }
        const double w_last = std::pow(lambda, double(N - 1));
        target += w_last * q_n[N];
        wsum += w_last;
        REQUIRE(wsum == Catch::Approx(1.0).margin(1e-12));
        out[t] = target;
    }
    return out;
}

Trajectory random_trajectory(std::size_t len, bool terminal, RngStream& rng) {
    Trajectory traj;
    traj.complete = true;
    traj.terminal = terminal;
    traj.final_bootstrap = terminal ? 0.0 : 2.0 * rng.next_double() - 1.0;
    traj.steps.resize(len);
    for (auto& st : traj.steps) {
        st.reward = 2.0 * rng.next_double() - 1.0;
        for (auto& q : st.q) q = 2.0 * rng.next_double() - 1.0;
        // half the steps carry a compressed-time discount
        if (rng.next_double() < 0.5) st.discount_to_next = rng.next_double();
    }
    return traj;
}

ListenerView empty_view() { return ListenerView{}; }

}  // namespace

TEST_CASE("lambda one on a terminal trajectory gives monte carlo returns") {
    Trajectory traj;
    traj.complete = true;
    traj.terminal = true;
    traj.steps.resize(3);
    traj.steps[0].reward = 0.0;
    traj.steps[1].reward = 0.0;
    traj.steps[2].reward = 1.0;
    for (auto& st : traj.steps)
        for (auto& q : st.q) q = 5.0;  // must be ignored entirely at lambda 1
    auto t = lambda_targets(traj, 0.99, 1.0);
    REQUIRE(t.size() == 3);
    CHECK(t[2] == Catch::Approx(1.0).margin(1e-15));
    CHECK(t[1] == Catch::Approx(0.99).margin(1e-15));
    CHECK(t[0] == Catch::Approx(0.9801).margin(1e-15));
}

TEST_CASE("lambda zero gives one-step backups from stored q") {
    Trajectory traj;
    traj.complete = true;
    traj.terminal = false;
    traj.final_bootstrap = 0.4;
    traj.steps.resize(2);
    traj.steps[0].reward = 0.1;
    traj.steps[0].q = {0, 0, 0, 0, 0};
    traj.steps[1].reward = 0.2;
    traj.steps[1].q = {0.3, -1.0, 0.25, 0.0, 0.1};
    auto t = lambda_targets(traj, 0.9, 0.0);
    CHECK(t[1] == Catch::Approx(0.2 + 0.9 * 0.4).margin(1e-15));
    CHECK(t[0] == Catch::Approx(0.1 + 0.9 * 0.3).margin(1e-15));
}

TEST_CASE("targets agree with the explicit weighted series") {
    RngStream rng(77);
    for (double lambda : {0.0, 0.3, 0.9, 1.0}) {
        for (std::size_t len : {1u, 2u, 3u, 5u, 8u}) {
            for (bool terminal : {false, true}) {
                Trajectory traj = random_trajectory(len, terminal, rng);
                auto got = lambda_targets(traj, 0.99, lambda);
                auto want = series_targets(traj, 0.99, lambda);
                REQUIRE(got.size() == want.size());
                for (std::size_t i = 0; i < got.size(); ++i)
                    CHECK(got[i] == Catch::Approx(want[i]).margin(1e-10));
            }
        }
    }
}

TEST_CASE("zero rewards and zero bootstrap give zero targets") {
    Trajectory traj;
    traj.complete = true;
    traj.steps.resize(4);
    auto t = lambda_targets(traj, 0.99, 0.9);
    for (double v : t) CHECK(v == 0.0);
}

TEST_CASE("targets scale linearly with rewards when bootstraps are zero") {
    RngStream rng(5);
    Trajectory traj = random_trajectory(5, true, rng);
    for (auto& st : traj.steps) st.q = {};
    Trajectory scaled = traj;
    for (auto& st : scaled.steps) st.reward *= 3.0;
    auto a = lambda_targets(traj, 0.95, 0.7);
    auto b = lambda_targets(scaled, 0.95, 0.7);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(b[i] == Catch::Approx(3.0 * a[i]).margin(1e-12));
}

TEST_CASE("single-step timeout bootstraps the final estimate") {
    Trajectory traj;
    traj.complete = true;
    traj.terminal = false;
    traj.final_bootstrap = 0.6;
    traj.steps.resize(1);
    traj.steps[0].reward = 0.25;
    auto t = lambda_targets(traj, 0.99, 0.9);
    CHECK(t[0] == Catch::Approx(0.25 + 0.99 * 0.6).margin(1e-15));
}

TEST_CASE("per-step discounts override gamma") {
    Trajectory traj;
    traj.complete = true;
    traj.terminal = true;
    traj.steps.resize(2);
    traj.steps[0].reward = 0.0;
    traj.steps[0].discount_to_next = 0.5;  // compressed: two env steps elapsed
    traj.steps[1].reward = 1.0;
    auto t = lambda_targets(traj, 0.99, 1.0);
    CHECK(t[0] == Catch::Approx(0.5).margin(1e-15));
    // unset discount still falls back to gamma
    traj.steps[0].discount_to_next = -1.0;
    t = lambda_targets(traj, 0.99, 1.0);
    CHECK(t[0] == Catch::Approx(0.99).margin(1e-15));
}

TEST_CASE("lambda_targets input validation") {
    Trajectory traj;
    traj.steps.resize(2);
    CHECK_THROWS_AS(lambda_targets(traj, 0.99, 0.9), std::logic_error);  // not complete
    traj.complete = true;
    CHECK_THROWS_AS(lambda_targets(traj, 0.99, 1.5), std::logic_error);
    CHECK_THROWS_AS(lambda_targets(traj, 0.99, -0.1), std::logic_error);
    traj.steps[1].reward = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(lambda_targets(traj, 0.99, 0.9), std::logic_error);
    Trajectory empty;
    empty.complete = true;
    CHECK_THROWS_AS(lambda_targets(empty, 0.99, 0.9), std::logic_error);
}

TEST_CASE("epsilon-greedy selection") {
    SECTION("ties break toward the lowest index") {
        RngStream rng(1);
        const std::array<double, 5> q{0.5, 0.5, 0.5, 0.2, 0.5};
        for (int i = 0; i < 100; ++i) CHECK(select_action(q, 0.0, rng) == 0);
        const std::array<double, 5> q2{0.1, 0.7, 0.7, 0.7, 0.2};
        CHECK(select_action(q2, 0.0, rng) == 1);
    }

    SECTION("epsilon one is uniform over actions") {
        RngStream rng(2);
        const std::array<double, 5> q{9.0, 0.0, 0.0, 0.0, 0.0};
        std::array<int, 5> counts{};
        const int n = 100000;
        for (int i = 0; i < n; ++i) counts[select_action(q, 1.0, rng)]++;
        for (int a = 0; a < 5; ++a)
            CHECK(std::abs(counts[a] / double(n) - 0.2) < 0.01);
    }

    SECTION("small epsilon picks the argmax at the expected rate") {
        RngStream rng(3);
        const std::array<double, 5> q{0.0, 0.0, 1.0, 0.0, 0.0};
        int greedy = 0;
        const int n = 100000;
        for (int i = 0; i < n; ++i) greedy += select_action(q, 0.01, rng) == 2;
        // 0.99 + 0.01/5
        CHECK(std::abs(greedy / double(n) - 0.992) < 0.005);
    }

    SECTION("the exploration draw is consumed even at epsilon zero") {
        RngStream a(9), b(9);
        const std::array<double, 5> q{0.0, 1.0, 0.0, 0.0, 0.0};
        select_action(q, 0.0, a);
        b.next_double();
        CHECK(a == b);
    }

    SECTION("bad epsilon throws") {
        RngStream rng(4);
        const std::array<double, 5> q{};
        CHECK_THROWS_AS(select_action(q, -0.01, rng), std::logic_error);
        CHECK_THROWS_AS(select_action(q, 1.01, rng), std::logic_error);
    }
}

TEST_CASE("speaker input encoding flattens pixels channel-last") {
    SpeakerView view{};
    for (auto& px : view.pixels) px = kFloorColor;
    view.pixels[2 * 9 + 3] = kAgentColor;
    view.pixels[7 * 9 + 1] = kGoalColor;
    auto x = encode_speaker_input(view);
    REQUIRE(x.size() == 243);
    CHECK(x[(2 * 9 + 3) * 3 + 0] == 0.0);
    CHECK(x[(2 * 9 + 3) * 3 + 1] == 1.0);
    CHECK(x[(2 * 9 + 3) * 3 + 2] == 0.0);
    CHECK(x[(7 * 9 + 1) * 3 + 2] == 1.0);
    double sum = 0.0;
    for (double v : x) sum += v;
    CHECK(sum == 2.0);  // one agent pixel, one goal pixel, floor elsewhere
}

TEST_CASE("listener input encoding") {
    SECTION("silence is all-zero message slots, distinct from every token") {
        auto x = encode_listener_input(empty_view(), {}, 1);
        REQUIRE(x.size() == 5);
        for (double v : x) CHECK(v == 0.0);
        for (int sym = 0; sym < kSymbolCount; ++sym) {
            const int tok[1] = {sym};
            auto y = encode_listener_input(empty_view(), tok, 1);
            REQUIRE(y.size() == 5);
            CHECK(y != x);
            for (int i = 0; i < 5; ++i) CHECK(y[i] == (i == sym ? 1.0 : 0.0));
        }
    }

    SECTION("view pixels come first, tokens after") {
        ListenerView v;
        v.pixels = {kWallColor, kFloorColor, kGoalColor};
        const int toks[2] = {0, 3};
        auto x = encode_listener_input(v, toks, 2);
        REQUIRE(x.size() == 9 + 10);
        CHECK(x[0] == 1.0);  // wall r
        CHECK(x[8] == 1.0);  // goal b
        CHECK(x[9 + 0] == 1.0);
        CHECK(x[9 + 5 + 3] == 1.0);
        double sum = 0.0;
        for (double v2 : x) sum += v2;
        CHECK(sum == 6.0);  // wall contributes 3, goal 1, each token 1
    }

    SECTION("optional message overload") {
        auto silent = encode_listener_input(empty_view(), std::nullopt);
        REQUIRE(silent.size() == 5);
        auto spoken = encode_listener_input(empty_view(), Message{4});
        CHECK(spoken[4] == 1.0);
    }

    SECTION("validation") {
        const int bad[1] = {5};
        CHECK_THROWS_AS(encode_listener_input(empty_view(), bad, 1), std::logic_error);
        const int neg[1] = {-1};
        CHECK_THROWS_AS(encode_listener_input(empty_view(), neg, 1), std::logic_error);
        const int two[2] = {0, 1};
        CHECK_THROWS_AS(encode_listener_input(empty_view(), two, 1), std::logic_error);
        CHECK_THROWS_AS(encode_listener_input(empty_view(), two, 0), std::logic_error);
    }
}

TEST_CASE("agent factories build the right input widths") {
    RngStream rng(10);
    AgentConfig cfg;
    cfg.rep_size = 8;
    cfg.has_memory = false;

    Agent sp = make_speaker(cfg, rng, 2);
    CHECK(sp.cfg.role == Role::speaker);
    CHECK(sp.spec.encoder == EncoderKind::conv_map);
    CHECK(sp.spec.input_width == 243);

    cfg.visibility = Visibility::partial;
    Agent li = make_listener(cfg, 1, rng);
    CHECK(li.cfg.role == Role::listener);
    CHECK(li.spec.encoder == EncoderKind::dense_flat);
    CHECK(li.spec.input_width == 14);
    CHECK(make_listener(cfg, 3, rng).spec.input_width == 24);

    cfg.visibility = Visibility::none;
    CHECK(make_listener(cfg, 1, rng).spec.input_width == 5);
    CHECK_THROWS_AS(make_listener(cfg, 0, rng), std::logic_error);
}

TEST_CASE("agent_act runs the net and keeps the rng schedule fixed") {
    RngStream init(20);
    AgentConfig cfg;
    cfg.rep_size = 8;
    cfg.has_memory = true;
    cfg.visibility = Visibility::none;
    Agent li = make_listener(cfg, 1, init);

    auto x = encode_listener_input(empty_view(), Message{2});
    RngStream r1(3), r2(3);
    ActResult a = agent_act(li, x, initial_memory(li.spec), 0.0, r1);
    r2.next_double();
    CHECK(r1 == r2);
    CHECK(a.mem_after.h.size() == 8);

    ForwardResult f = forward(li.spec, li.params, x, initial_memory(li.spec));
    CHECK(a.q == f.q);
}

TEST_CASE("fitted updates fit a one-step terminal target") {
    RngStream init(31);
    AgentConfig cfg;
    cfg.rep_size = 8;
    cfg.has_memory = false;
    cfg.visibility = Visibility::none;
    cfg.alpha = 0.05;
    Agent li = make_listener(cfg, 1, init);

    Trajectory traj;
    traj.complete = true;
    traj.terminal = true;
    traj.steps.resize(1);
    traj.steps[0].input = encode_listener_input(empty_view(), Message{2});
    traj.steps[0].action = 1;
    traj.steps[0].reward = 1.0;

    double first_loss = fitted_q_update(li, traj);
    double last_loss = first_loss;
    for (int i = 0; i < 400; ++i) last_loss = fitted_q_update(li, traj);
    CHECK(last_loss < first_loss);
    CHECK(last_loss < 1e-3);
    ForwardResult f = forward(li.spec, li.params, traj.steps[0].input, {});
    CHECK(f.q[1] == Catch::Approx(1.0).margin(0.05));
}

TEST_CASE("identical agents stay bit-identical through updates") {
    RngStream init(32);
    AgentConfig cfg;
    cfg.rep_size = 8;
    cfg.has_memory = true;
    cfg.visibility = Visibility::partial;
    cfg.alpha = 0.01;
    Agent a = make_listener(cfg, 1, init);
    Agent b = a;

    RngStream data(33);
    Trajectory traj;
    traj.complete = true;
    traj.terminal = false;
    traj.final_bootstrap = 0.2;
    traj.steps.resize(3);
    for (auto& st : traj.steps) {
        st.input.resize(14);
        for (auto& v : st.input) v = data.next_double();
        st.mem = initial_memory(a.spec);
        st.action = int(data.next_index(5));
        st.reward = data.next_double();
        for (auto& q : st.q) q = data.next_double();
    }
    for (int i = 0; i < 10; ++i) {
        double la = fitted_q_update(a, traj);
        double lb = fitted_q_update(b, traj);
        CHECK(la == lb);
    }
    for (std::size_t t = 0; t < a.params.tensors.size(); ++t)
        CHECK(a.params.tensors[t].value == b.params.tensors[t].value);
}
