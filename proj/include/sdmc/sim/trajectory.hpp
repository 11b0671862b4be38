#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sdmc/channel.hpp"
#include "sdmc/codesign.hpp"
#include "sdmc/environment.hpp"
#include "sdmc/rng.hpp"
#include "sdmc/sim/plant.hpp"
#include "sdmc/sim/quantizer.hpp"

namespace sdmc {

/// Draw the next rate index from the tensor column (current rate, s, p).
inline std::size_t sample_next_rate(const SdMcChannel& ch, std::size_t rate, std::size_t s,
                                    std::size_t p, Rng& rng) {
    Vec column(ch.num_rates());
    for (std::size_t i = 0; i < ch.num_rates(); ++i) column[i] = ch.prob(i, rate, s, p);
    return rng.categorical(column);
}

struct SimOptions {
    double T = 0.01;            ///< transmission interval (s)
    double horizon = 10.0;      ///< simulated time (s)
    double dt = 0.0;            ///< integrator step; 0 means T / 100
    std::size_t runs = 1;
    std::uint64_t seed = 1;
    double init_perturb = 0.01;       ///< relative +/- uniform perturbation of x0 per run
    double epsilon = 0.01;            ///< stability check level on |x|_inf
    double tail_window = 2.0;         ///< final window the envelope must stay below epsilon
    double divergence_factor = 1e6;   ///< |x| beyond factor * |x0|_inf counts as unbounded
    std::size_t initial_rate = 0;
    std::size_t initial_env_state = 0;
    std::size_t sample_stride = 1;    ///< record every k-th transmission instant

    double step() const { return dt > 0.0 ? dt : T / 100.0; }
};

/// One sample path: columns at each recorded transmission instant.
struct Trajectory {
    Vec t;
    Vec x_norm;
    Vec e_norm;
    Vec xi;
    std::vector<std::size_t> rate;
    std::vector<std::size_t> env_state;
    std::vector<std::size_t> power;
    Vec cum_cost;
    bool diverged = false;
    double blow_time = 0.0;
    std::size_t escapes = 0;
    std::size_t transmissions = 0;

    void record(const HybridState& s) {
        t.push_back(s.t);
        x_norm.push_back(s.x_norm());
        e_norm.push_back(s.e_norm());
        xi.push_back(s.xi);
        rate.push_back(s.rate);
        env_state.push_back(s.env_state);
        power.push_back(s.power);
        cum_cost.push_back(s.cum_cost);
    }
};

/// Closed-loop sample path, fully determined by the seed. Each slot k:
/// draw the action a_k ~ mu_m(.|s_k) and the power p_k ~ mu_p(.|r_k),
/// charge c(s_k, p_k, r_k), transmit with the current rate's bits, then
/// draw (s_{k+1}, r_{k+1}) and integrate to the next instant.
inline Trajectory run_trajectory(const PlantConfig& plant, const SdMcChannel& channel,
                                 const EnvMdp& mdp, const ControlPolicy& env_policy,
                                 const PowerPolicy& power_policy, const SimOptions& opt,
                                 const Vec* joint_cost = nullptr) {
    plant.check();
    if (env_policy.given.size() != mdp.num_states())
        throw std::invalid_argument("run_trajectory: env policy dimension mismatch");
    if (power_policy.given.size() != channel.num_rates())
        throw std::invalid_argument("run_trajectory: power policy dimension mismatch");
    if (opt.initial_rate >= channel.num_rates() || opt.initial_env_state >= mdp.num_states())
        throw std::invalid_argument("run_trajectory: initial indices out of range");

    Rng rng(opt.seed);
    HybridState st;
    st.x = plant.x0;
    for (double& v : st.x) v *= 1.0 + opt.init_perturb * (2.0 * rng.uniform() - 1.0);
    st.xhat = plant.xhat0;
    st.xi = plant.xi0;
    st.rate = opt.initial_rate;
    st.env_state = opt.initial_env_state;

    const auto bits_of = [&](std::size_t r) {
        const double b = channel.rates[r];
        return static_cast<unsigned>(b > 0.0 ? b + 0.5 : 0.0);
    };
    const std::size_t slots = static_cast<std::size_t>(opt.horizon / opt.T + 0.5);
    const double blow_threshold = opt.divergence_factor * infinity_norm(plant.x0);
    Trajectory traj;
    traj.record(st);
    for (std::size_t k = 0; k < slots; ++k) {
        const std::size_t action = rng.categorical(env_policy.given[st.env_state]);
        st.power = rng.categorical(power_policy.given[st.rate]);
        if (joint_cost)
            st.cum_cost += (*joint_cost)[(st.rate * mdp.num_states() + st.env_state) *
                                             channel.num_powers() +
                                         st.power];
        st = quantizer_jump(st, bits_of(st.rate));
        const std::size_t next_rate = sample_next_rate(channel, st.rate, st.env_state, st.power, rng);
        Vec env_col(mdp.num_states());
        for (std::size_t s2 = 0; s2 < mdp.num_states(); ++s2)
            env_col[s2] = mdp.prob(s2, st.env_state, action);
        const std::size_t next_env = rng.categorical(env_col);
        st = step_continuous(st, plant, opt.T, opt.step());
        if (!st.diverged && st.x_norm() > blow_threshold) {
            st.diverged = true;  // unbounded by the divergence-threshold convention
            st.blow_time = st.t;
        }
        st.rate = next_rate;
        st.env_state = next_env;
        ++traj.transmissions;
        if ((k + 1) % opt.sample_stride == 0 || st.diverged || k + 1 == slots) traj.record(st);
        if (st.diverged) {
            traj.diverged = true;
            traj.blow_time = st.blow_time;
            break;
        }
    }
    traj.escapes = st.escapes;
    return traj;
}

}  // namespace sdmc
