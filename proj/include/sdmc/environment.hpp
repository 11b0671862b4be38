#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdmc/channel.hpp"
#include "sdmc/matrix.hpp"
#include "sdmc/optim/lp.hpp"
#include "sdmc/validation.hpp"

namespace sdmc {

/// Controllable external environment: finite MDP with column-stochastic
/// per-action transition matrices and per-(state, action) running costs.
struct EnvMdp {
    std::vector<std::string> states;
    std::vector<std::string> actions;
    std::size_t initial_state = 0;
    /// q[((next * M_s) + cur) * M_a + a] = P(next | cur, action a)
    Vec transitions;
    /// costs[s * M_a + a] = c_m(s, a)
    Vec costs;

    std::size_t num_states() const { return states.size(); }
    std::size_t num_actions() const { return actions.size(); }

    double prob(std::size_t next, std::size_t cur, std::size_t a) const {
        return transitions[(next * num_states() + cur) * num_actions() + a];
    }
    double& prob(std::size_t next, std::size_t cur, std::size_t a) {
        return transitions[(next * num_states() + cur) * num_actions() + a];
    }
    double cost(std::size_t s, std::size_t a) const { return costs[s * num_actions() + a]; }

    static EnvMdp zeros(std::vector<std::string> states, std::vector<std::string> actions) {
        EnvMdp m;
        m.states = std::move(states);
        m.actions = std::move(actions);
        m.transitions.assign(m.num_states() * m.num_states() * m.num_actions(), 0.0);
        m.costs.assign(m.num_states() * m.num_actions(), 0.0);
        return m;
    }

    /// c_m marginalized over actions; defined only when the costs are
    /// action-independent (as in the shipped preset).
    Vec state_cost_marginal(double tol = 1e-12) const {
        Vec out(num_states());
        for (std::size_t s = 0; s < num_states(); ++s) {
            const double c0 = cost(s, 0);
            for (std::size_t a = 1; a < num_actions(); ++a)
                if (std::abs(cost(s, a) - c0) > tol)
                    throw std::runtime_error(
                        "EnvMdp: state cost marginal undefined, costs differ across actions for "
                        "state " + states[s] + "; supply an explicit joint cost");
            out[s] = c0;
        }
        return out;
    }
};

/// Per-state distribution over actions.
struct ControlPolicy {
    std::size_t num_actions = 0;
    /// given[s][a] = P(a | s)
    std::vector<Vec> given;
};

inline ValidationReport validate_mdp(const EnvMdp& m) {
    ValidationReport rep;
    if (m.num_states() < 1) rep.add("mdp: no states defined");
    if (m.num_actions() < 1) rep.add("mdp: no actions defined");
    if (m.initial_state >= m.num_states()) rep.add("mdp: initial state out of range");
    if (m.transitions.size() != m.num_states() * m.num_states() * m.num_actions()) {
        rep.add("mdp: transition tensor size mismatch");
        return rep;
    }
    for (std::size_t cur = 0; cur < m.num_states(); ++cur)
        for (std::size_t a = 0; a < m.num_actions(); ++a) {
            double colsum = 0.0;
            for (std::size_t next = 0; next < m.num_states(); ++next) {
                const double v = m.prob(next, cur, a);
                if (v < -kStochasticTol || v > 1.0 + kStochasticTol)
                    rep.add("mdp: probability out of [0,1] at (next=" + m.states[next] +
                            ", cur=" + m.states[cur] + ", action=" + m.actions[a] + ")");
                colsum += v;
            }
            if (std::abs(colsum - 1.0) > kStochasticTol)
                rep.add("mdp: non-stochastic column at (cur=" + m.states[cur] + ", action=" +
                        m.actions[a] + "): sums to " + std::to_string(colsum));
        }
    for (double c : m.costs)
        if (!std::isfinite(c)) rep.add("mdp: non-finite cost entry");
    return rep;
}

inline ValidationReport validate_policy(const ControlPolicy& pol) {
    ValidationReport rep;
    for (std::size_t s = 0; s < pol.given.size(); ++s) {
        if (pol.given[s].size() != pol.num_actions) {
            rep.add("policy: action count mismatch for state " + std::to_string(s));
            continue;
        }
        double total = 0.0;
        for (double v : pol.given[s]) {
            if (v < -kStochasticTol) rep.add("policy: negative probability in state " + std::to_string(s));
            total += v;
        }
        if (std::abs(total - 1.0) > kStochasticTol)
            rep.add("policy: distribution for state " + std::to_string(s) + " sums to " +
                    std::to_string(total));
    }
    return rep;
}

/// Column-stochastic chain induced by mixing the per-action transition
/// slices with the policy: entry (s, s') = sum_a q(s | s', a) P(a | s').
inline Mat induced_env_chain(const EnvMdp& m, const ControlPolicy& pol) {
    if (pol.given.size() != m.num_states() || pol.num_actions != m.num_actions())
        throw std::invalid_argument("induced_env_chain: policy dimensions do not match MDP");
    Mat out(m.num_states(), m.num_states());
    for (std::size_t cur = 0; cur < m.num_states(); ++cur)
        for (std::size_t next = 0; next < m.num_states(); ++next) {
            double acc = 0.0;
            for (std::size_t a = 0; a < m.num_actions(); ++a)
                acc += m.prob(next, cur, a) * pol.given[cur][a];
            out(next, cur) = acc;
        }
    return out;
}

/// Occupation variables of the control LP: Y(s, a).
struct OccupationY {
    std::size_t num_actions = 0;
    Vec y;  ///< y[s * num_actions + a]

    double operator()(std::size_t s, std::size_t a) const { return y[s * num_actions + a]; }
};

struct ControlLpResult {
    OccupationY occupation;
    ControlPolicy policy;
    double cost = 0.0;
    optim::SolveStatus status = optim::SolveStatus::Infeasible;
    double fixed_point_residual = 0.0;  ///< || Q(mu) pi* - pi* ||_inf
    std::string detail;
    /// states where the target put no mass and the policy fell back to the
    /// uniform action distribution
    std::vector<std::size_t> uniform_fallback_states;
};

/// Finds the minimum-average-cost policy realizing a prescribed stationary
/// distribution: min sum c_m(s,a) Y(s,a) subject to MDP flow balance,
/// normalization, Y >= 0, and the per-state pin sum_a Y(s,a) = target(s).
/// The policy is P(a|s) = Y(s,a) / sum_a Y(s,a); zero-mass states get the
/// uniform distribution (stationarity-neutral) and are flagged.
inline ControlLpResult solve_control_lp(const EnvMdp& m, const Distribution& target) {
    const std::size_t ns = m.num_states(), na = m.num_actions();
    if (target.size() != ns)
        throw std::invalid_argument("solve_control_lp: target dimension mismatch");
    double tsum = 0.0;
    for (double v : target) {
        if (v < -kStochasticTol)
            throw std::invalid_argument("solve_control_lp: target has negative mass");
        tsum += v;
    }
    if (std::abs(tsum - 1.0) > 1e-8)
        throw std::invalid_argument("solve_control_lp: target sums to " + std::to_string(tsum));

    optim::LpProblem lp;
    lp.c = m.costs;
    const std::size_t nv = ns * na;
    // rows: flow balance per state, normalization, stationarity pin per state
    lp.a_eq = Mat(ns + 1 + ns, nv);
    lp.b_eq.assign(ns + 1 + ns, 0.0);
    for (std::size_t s = 0; s < ns; ++s) {
        for (std::size_t a = 0; a < na; ++a) lp.a_eq(s, s * na + a) += 1.0;
        for (std::size_t sp = 0; sp < ns; ++sp)
            for (std::size_t a = 0; a < na; ++a) lp.a_eq(s, sp * na + a) -= m.prob(s, sp, a);
        lp.b_eq[s] = 0.0;
    }
    for (std::size_t j = 0; j < nv; ++j) lp.a_eq(ns, j) = 1.0;
    lp.b_eq[ns] = 1.0;
    for (std::size_t s = 0; s < ns; ++s) {
        for (std::size_t a = 0; a < na; ++a) lp.a_eq(ns + 1 + s, s * na + a) = 1.0;
        lp.b_eq[ns + 1 + s] = target[s];
    }

    ControlLpResult out;
    optim::Solution sol = optim::solve_lp(lp);
    out.status = sol.status;
    if (sol.status != optim::SolveStatus::Optimal) {
        out.detail = "control LP " + optim::to_string(sol.status) +
                     ": no policy realizes the target stationary distribution (" + sol.detail + ")";
        return out;
    }
    out.occupation.num_actions = na;
    out.occupation.y = sol.x;
    out.cost = sol.value;
    out.policy.num_actions = na;
    out.policy.given.assign(ns, Vec(na, 0.0));
    for (std::size_t s = 0; s < ns; ++s) {
        double mass = 0.0;
        for (std::size_t a = 0; a < na; ++a) mass += sol.x[s * na + a];
        if (mass > 1e-12) {
            for (std::size_t a = 0; a < na; ++a) out.policy.given[s][a] = sol.x[s * na + a] / mass;
        } else {
            for (std::size_t a = 0; a < na; ++a)
                out.policy.given[s][a] = 1.0 / static_cast<double>(na);
            out.uniform_fallback_states.push_back(s);
        }
    }
    Mat chain = induced_env_chain(m, out.policy);
    Vec moved = chain * target;
    for (std::size_t s = 0; s < ns; ++s)
        out.fixed_point_residual = std::max(out.fixed_point_residual,
                                            std::abs(moved[s] - target[s]));
    return out;
}

}  // namespace sdmc
