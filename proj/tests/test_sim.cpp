#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sdmc/sdmc.hpp"

using namespace sdmc;
using Catch::Approx;

namespace {

PlantConfig reactor() {
    PlantConfig p;
    p.a = Mat{{1.38, -0.2077, 6.715, -5.676},
              {-0.5814, -4.29, 0, 0.675},
              {1.067, 4.273, -6.654, 5.893},
              {0.048, 4.273, 1.343, -2.104}};
    p.b = Mat{{0, 0}, {5.679, 0}, {1.136, -3.146}, {1.136, 0}};
    p.k = Mat{{0.6961, 0.8133, 0.5639, -1.8492}, {2.6908, 1.1764, -1.2762, 0.9968}};
    p.x0 = {1, -1, 1, -1};
    p.xhat0 = {0, 0, 0, 0};
    p.xi0 = 1.25;
    return p;
}

SdMcChannel table_channel() {
    SdMcChannel ch = SdMcChannel::zeros({0.0, 2.0}, {"s1", "s2"}, {"L", "H"}, {1.0, 2.0});
    const double p11[2][2] = {{0.8, 0.6}, {0.4, 0.1}};
    const double p12[2][2] = {{0.8, 0.6}, {0.5, 0.1}};
    for (int s = 0; s < 2; ++s)
        for (int p = 0; p < 2; ++p) {
            ch.prob(0, 0, s, p) = p11[s][p];
            ch.prob(1, 0, s, p) = 1 - p11[s][p];
            ch.prob(0, 1, s, p) = p12[s][p];
            ch.prob(1, 1, s, p) = 1 - p12[s][p];
        }
    return ch;
}

EnvMdp table_mdp() {
    EnvMdp m = EnvMdp::zeros({"s1", "s2"}, {"Stay", "Go"});
    for (int cur = 0; cur < 2; ++cur) {
        m.prob(0, cur, 0) = 0.9;
        m.prob(1, cur, 0) = 0.1;
        m.prob(0, cur, 1) = 0.1;
        m.prob(1, cur, 1) = 0.9;
    }
    m.costs = {0.4, 0.4, 0.6, 0.6};
    return m;
}

EnvMdp trivial_mdp() {
    EnvMdp m = EnvMdp::zeros({"any"}, {"hold"});
    m.prob(0, 0, 0) = 1.0;
    m.costs = {0.0};
    return m;
}

ControlPolicy hold_policy() {
    ControlPolicy p;
    p.num_actions = 1;
    p.given = {{1.0}};
    return p;
}

}  // namespace

TEST_CASE("continuous step") {
    SECTION("zero vector field leaves the state alone") {
        PlantConfig p;
        p.a = Mat(2, 2, 0.0);
        p.b = Mat(2, 1, 0.0);
        p.k = Mat(1, 2, 0.0);
        p.x0 = {0.5, -0.5};
        p.xhat0 = {0.0, 0.0};
        p.xi0 = 1.0;
        HybridState st;
        st.x = p.x0;
        st.xhat = p.xhat0;
        st.xi = p.xi0;
        HybridState out = step_continuous(st, p, 0.3, 0.01);
        CHECK(out.x[0] == 0.5);
        CHECK(out.x[1] == -0.5);
        CHECK(out.xi == 1.0);
        CHECK(out.t == Approx(0.3));
    }
    SECTION("scalar exponential") {
        PlantConfig p;
        p.a = Mat{{-1.3}};
        p.b = Mat{{0.0}};
        p.k = Mat{{0.0}};
        p.x0 = {2.0};
        p.xhat0 = {0.0};
        p.xi0 = 1.0;
        HybridState st;
        st.x = {2.0};
        st.xhat = {0.0};
        st.xi = 1.0;
        HybridState out = step_continuous(st, p, 1.0, 1e-3);
        CHECK(out.x[0] == Approx(2.0 * std::exp(-1.3)).epsilon(1e-8));
    }
    SECTION("error propagation matches the matrix exponential") {
        PlantConfig p = reactor();
        HybridState st;
        st.x = {0.3, -0.2, 0.5, 0.1};
        st.xhat = {0.1, 0.1, 0.1, 0.1};
        st.xi = 1.0;
        Vec e0 = st.error();
        HybridState out = step_continuous(st, p, 0.01, 1e-4);
        Vec expected = expm(0.01 * p.a) * e0;
        Vec got = out.error();
        for (int i = 0; i < 4; ++i)
            CHECK(std::abs(got[i] - expected[i]) / infinity_norm(expected) <= 1e-6);
    }
    SECTION("error dynamics do not depend on the feedback gain") {
        PlantConfig p = reactor();
        PlantConfig p2 = reactor();
        p2.k = 2.0 * p.k;
        HybridState st;
        st.x = {0.3, -0.2, 0.5, 0.1};
        st.xhat = {0.1, 0.1, 0.1, 0.1};
        st.xi = 1.0;
        Vec e1 = step_continuous(st, p, 0.01, 1e-4).error();
        Vec e2 = step_continuous(st, p2, 0.01, 1e-4).error();
        for (int i = 0; i < 4; ++i)
            CHECK(std::abs(e1[i] - e2[i]) / infinity_norm(e1) <= 1e-6);
    }
    SECTION("box grows exactly exponentially") {
        PlantConfig p = reactor();
        HybridState st;
        st.x = {0, 0, 0, 0};
        st.xhat = {0, 0, 0, 0};
        st.xi = 0.7;
        HybridState out = step_continuous(st, p, 0.02, 1e-4);
        CHECK(out.xi == Approx(0.7 * std::exp(0.02 * infinity_norm(p.a))).epsilon(1e-8));
    }
    SECTION("partial final step is shortened") {
        PlantConfig p;
        p.a = Mat{{-1.0}};
        p.b = Mat{{0.0}};
        p.k = Mat{{0.0}};
        p.x0 = {1.0};
        p.xhat0 = {0.0};
        p.xi0 = 1.0;
        HybridState st;
        st.x = {1.0};
        st.xhat = {0.0};
        st.xi = 1.0;
        HybridState out = step_continuous(st, p, 0.0105, 1e-3);  // 10 full steps + half
        CHECK(out.t == Approx(0.0105).margin(1e-12));
        CHECK(out.x[0] == Approx(std::exp(-0.0105)).epsilon(1e-9));
    }
}

TEST_CASE("quantizer") {
    SECTION("hand-worked scalar cell") {
        HybridState st;
        st.x = {0.3};
        st.xhat = {0.0};
        st.xi = 1.0;
        HybridState out = quantizer_jump(st, 1);
        CHECK(out.xhat[0] == Approx(0.5));
        CHECK(out.xi == Approx(0.5));
        CHECK(out.error()[0] == Approx(-0.2));
        CHECK(out.escapes == 0);
    }
    SECTION("zero bits is the identity") {
        HybridState st;
        st.x = {0.3, 0.9};
        st.xhat = {0.1, 0.0};
        st.xi = 1.0;
        HybridState out = quantizer_jump(st, 0);
        CHECK(out.xhat == st.xhat);
        CHECK(out.xi == st.xi);
    }
    SECTION("containment property over random states") {
        Rng rng(4242);
        for (int trial = 0; trial < 10000; ++trial) {
            const std::size_t n = 1 + (rng.next_u64() % 4);
            HybridState st;
            st.xi = 0.1 + 2.0 * rng.uniform();
            st.x.resize(n);
            st.xhat.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                st.xhat[i] = 4.0 * rng.uniform() - 2.0;
                st.x[i] = st.xhat[i] + st.xi * (2.0 * rng.uniform() - 1.0);  // inside the box
            }
            const unsigned bits = 1 + (rng.next_u64() % 3);
            HybridState out = quantizer_jump(st, bits);
            CHECK(out.escapes == 0);
            CHECK(out.xi == Approx(st.xi / std::pow(2.0, bits)));
            CHECK(infinity_norm(out.error()) <= out.xi * (1 + 1e-12));
            if (bits == 2) CHECK(infinity_norm(out.error()) <= st.xi / 4.0 * (1 + 1e-12));
        }
    }
    SECTION("escape zooms out, counts, and then contains") {
        HybridState st;
        st.x = {3.0};
        st.xhat = {0.0};
        st.xi = 1.0;  // state far outside the box
        HybridState out = quantizer_jump(st, 2);
        CHECK(out.escapes == 1);
        CHECK(infinity_norm(out.error()) <= out.xi * (1 + 1e-12));
        CHECK(out.xi == Approx(6.0 / 4.0));  // zoomed to 2*|e| = 6, then split by 4
    }
}

TEST_CASE("rate sampling") {
    SdMcChannel ch = table_channel();
    SECTION("degenerate column always yields the first rate") {
        SdMcChannel d = SdMcChannel::zeros({0.0, 2.0}, {"s"}, {"P"});
        d.prob(0, 0, 0, 0) = 1.0;
        d.prob(0, 1, 0, 0) = 1.0;
        Rng rng(1);
        for (int k = 0; k < 100; ++k) {
            CHECK(sample_next_rate(d, 0, 0, 0, rng) == 0);
            CHECK(sample_next_rate(d, 1, 0, 0, rng) == 0);
        }
    }
    SECTION("empirical frequency of the (r1, s1, L) column") {
        Rng rng(5150);
        const int n = 100000;
        int low = 0;
        for (int k = 0; k < n; ++k)
            if (sample_next_rate(ch, 0, 0, 0, rng) == 0) ++low;
        const double freq = static_cast<double>(low) / n;
        const double sigma = std::sqrt(0.8 * 0.2 / n);
        CHECK(std::abs(freq - 0.8) <= 3.0 * sigma);
    }
    SECTION("chi-square goodness of fit over every column") {
        Rng rng(8888);
        const int n = 100000;
        for (int j = 0; j < 2; ++j)
            for (int s = 0; s < 2; ++s)
                for (int p = 0; p < 2; ++p) {
                    int count0 = 0;
                    for (int k = 0; k < n; ++k)
                        if (sample_next_rate(ch, j, s, p, rng) == 0) ++count0;
                    const double e0 = n * ch.prob(0, j, s, p);
                    const double e1 = n * ch.prob(1, j, s, p);
                    const double chi2 = (count0 - e0) * (count0 - e0) / e0 +
                                        (n - count0 - e1) * (n - count0 - e1) / e1;
                    CHECK(chi2 < 6.635);  // 1 dof at significance 0.01
                }
    }
}

TEST_CASE("trajectories") {
    PlantConfig plant = reactor();
    SdMcChannel ch = table_channel();
    EnvMdp mdp = table_mdp();
    ControlPolicy env_pol;
    env_pol.num_actions = 2;
    env_pol.given = {{0.125, 0.875}, {0.125, 0.875}};
    PowerPolicy pow_pol;
    pow_pol.num_powers = 2;
    pow_pol.given = {{0.0, 1.0}, {0.0, 1.0}};
    SimOptions opt;
    opt.T = 0.01;
    opt.horizon = 2.0;
    opt.seed = 31337;

    SECTION("identical seeds give bit-identical trajectories") {
        Trajectory a = run_trajectory(plant, ch, mdp, env_pol, pow_pol, opt);
        Trajectory b = run_trajectory(plant, ch, mdp, env_pol, pow_pol, opt);
        CHECK(a.t == b.t);
        CHECK(a.x_norm == b.x_norm);
        CHECK(a.e_norm == b.e_norm);
        CHECK(a.xi == b.xi);
        CHECK(a.rate == b.rate);
        CHECK(a.cum_cost == b.cum_cost);
    }
    SECTION("different seeds differ") {
        Trajectory a = run_trajectory(plant, ch, mdp, env_pol, pow_pol, opt);
        SimOptions opt2 = opt;
        opt2.seed = 31338;
        Trajectory b = run_trajectory(plant, ch, mdp, env_pol, pow_pol, opt2);
        CHECK(a.x_norm != b.x_norm);
    }
    SECTION("frozen top rate decays like an exponential") {
        SdMcChannel top = SdMcChannel::zeros({0.0, 2.0}, {"any"}, {"P"});
        top.prob(1, 0, 0, 0) = 1.0;
        top.prob(1, 1, 0, 0) = 1.0;  // always the 2-bit rate
        PowerPolicy pp;
        pp.num_powers = 1;
        pp.given = {{1.0}, {1.0}};
        SimOptions o;
        o.T = 0.01;
        o.horizon = 10.0;
        o.seed = 7;
        o.initial_rate = 1;
        Trajectory tr = run_trajectory(plant, top, trivial_mdp(), hold_policy(), pp, o);
        REQUIRE_FALSE(tr.diverged);
        // least-squares fit of log |x| over t >= 1 s
        double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
        double syy = 0;
        for (std::size_t i = 0; i < tr.t.size(); ++i) {
            if (tr.t[i] < 1.0 || tr.x_norm[i] <= 0) continue;
            const double X = tr.t[i], Y = std::log(tr.x_norm[i]);
            sx += X;
            sy += Y;
            sxx += X * X;
            sxy += X * Y;
            syy += Y * Y;
            ++n;
        }
        const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        const double r_num = n * sxy - sx * sy;
        const double r2 = r_num * r_num / ((n * sxx - sx * sx) * (n * syy - sy * sy));
        CHECK(slope < 0.0);
        CHECK(r2 >= 0.95);
    }
    SECTION("cost accumulation matches the stationary occupation measure") {
        CostModel costs;
        costs.env_cost = Mat{{0.4, 0.4}, {0.6, 0.6}};
        costs.power_cost = {0.4, 0.6};
        costs.rate_cost = {0.6, 0.4};
        Vec jc(8);
        for (int r = 0; r < 2; ++r)
            for (int s = 0; s < 2; ++s)
                for (int p = 0; p < 2; ++p) jc[(r * 2 + s) * 2 + p] = costs.combined(r, s, p);
        SimOptions o = opt;
        o.horizon = 1000.0;  // 1e5 transmissions
        o.dt = 0.001;
        Trajectory tr = run_trajectory(plant, ch, mdp, env_pol, pow_pol, o, &jc);
        const double avg = tr.cum_cost.back() / static_cast<double>(tr.transmissions);
        OccupationMeasure m = stationary_occupation(ch, mdp, env_pol, pow_pol);
        CHECK(std::abs(avg - joint_average_cost(m, costs)) / joint_average_cost(m, costs) <= 0.02);
    }
}

TEST_CASE("monte carlo envelopes") {
    PlantConfig plant = reactor();
    MonteCarloInputs in;
    in.plant = plant;
    in.channel = table_channel();
    in.mdp = table_mdp();
    in.env_policy.num_actions = 2;
    in.env_policy.given = {{0.125, 0.875}, {0.125, 0.875}};
    in.power_policy.num_powers = 2;
    in.power_policy.given = {{0.0, 1.0}, {0.0, 1.0}};
    in.options.T = 0.01;
    in.options.horizon = 3.0;
    in.options.runs = 40;
    in.options.seed = 1001;

    SECTION("single run collapses the envelope") {
        MonteCarloInputs one = in;
        one.options.runs = 1;
        Envelope env = monte_carlo(one);
        for (std::size_t i = 0; i < env.t.size(); ++i)
            CHECK(env.max_norm[i] == env.min_norm[i]);
    }
    SECTION("max dominates min and the time grid is shared") {
        Envelope env = monte_carlo(in);
        REQUIRE(env.t.size() == 301);
        for (std::size_t i = 0; i < env.t.size(); ++i) {
            CHECK(env.max_norm[i] >= env.min_norm[i]);
            CHECK(env.t[i] == Approx(0.01 * static_cast<double>(i)).margin(1e-12));
        }
        CHECK(env.diverged_runs == 0);
    }
    SECTION("disjoint seed blocks agree on the stability classification") {
        Envelope a = monte_carlo(in);
        MonteCarloInputs other = in;
        other.options.seed = 900001;
        Envelope b = monte_carlo(other);
        AsasVerdict va = empirical_asas_check(a, 0.5, 1.0);
        AsasVerdict vb = empirical_asas_check(b, 0.5, 1.0);
        CHECK(va.consistent == vb.consistent);
    }
    SECTION("a dead channel diverges and is recorded as +inf") {
        MonteCarloInputs dead = in;
        dead.channel = SdMcChannel::zeros({0.0, 2.0}, {"s1", "s2"}, {"L", "H"}, {1.0, 2.0});
        for (int s = 0; s < 2; ++s)
            for (int p = 0; p < 2; ++p)
                for (int j = 0; j < 2; ++j) dead.channel.prob(0, j, s, p) = 1.0;  // rate 0 forever
        dead.options.horizon = 12.0;
        dead.options.runs = 5;
        Envelope env = monte_carlo(dead);
        CHECK(env.diverged_runs == 5);
        CHECK(std::isinf(env.max_norm.back()));
        AsasVerdict v = empirical_asas_check(env, 0.01, 2.0);
        CHECK_FALSE(v.consistent);
        REQUIRE(v.first_violation.has_value());
    }
    SECTION("asas check on an identically zero envelope") {
        Envelope env;
        env.t = {0.0, 0.5, 1.0};
        env.max_norm = {0.0, 0.0, 0.0};
        env.min_norm = {0.0, 0.0, 0.0};
        CHECK(empirical_asas_check(env, 1e-9, 0.5).consistent);
    }
}

TEST_CASE("mati search range error") {
    MonteCarloInputs in;
    in.plant = reactor();
    in.channel = SdMcChannel::zeros({0.0, 2.0}, {"any"}, {"P"});
    in.channel.prob(0, 0, 0, 0) = 1.0;
    in.channel.prob(0, 1, 0, 0) = 1.0;  // frozen at the zero rate: nothing ever transmitted
    in.mdp = trivial_mdp();
    in.env_policy = hold_policy();
    in.power_policy.num_powers = 1;
    in.power_policy.given = {{1.0}, {1.0}};
    in.options.horizon = 12.0;
    in.options.runs = 3;
    in.options.seed = 5;
    in.options.epsilon = 0.01;
    in.options.tail_window = 2.0;
    CHECK_THROWS_AS(mati_search(in, 0.005, 0.125), std::runtime_error);
}
