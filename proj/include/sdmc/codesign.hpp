#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "sdmc/channel.hpp"
#include "sdmc/environment.hpp"
#include "sdmc/matrix.hpp"
#include "sdmc/optim/grid.hpp"
#include "sdmc/optim/local.hpp"
#include "sdmc/optim/lp.hpp"
#include "sdmc/optim/psd.hpp"
#include "sdmc/optim/qcqp.hpp"
#include "sdmc/stability.hpp"

namespace sdmc {

/// Cost components of the joint objective. The default combination is
/// c(s, p, r) = c_m-marginal(s) + c_p(p) + c_r(r); an explicit joint table
/// can override it.
struct CostModel {
    Mat env_cost;    ///< c_m(s, a)
    Vec power_cost;  ///< c_p(p)
    Vec rate_cost;   ///< c_r(r)
    std::optional<Vec> joint_override;  ///< indexed (r * M_s + s) * M_p + p

    double combined(std::size_t r, std::size_t s, std::size_t p) const {
        if (joint_override)
            return (*joint_override)[(r * env_cost.rows() + s) * power_cost.size() + p];
        return env_state_cost(s) + power_cost[p] + rate_cost[r];
    }

    double env_state_cost(std::size_t s) const {
        const double c0 = env_cost(s, 0);
        for (std::size_t a = 1; a < env_cost.cols(); ++a)
            if (std::abs(env_cost(s, a) - c0) > 1e-12)
                throw std::runtime_error("CostModel: default combination needs action-independent "
                                         "environment costs; supply joint_override");
        return c0;
    }
};

/// Joint stationary measure X over (rate, state, power), stored rate-major
/// then state then power — the stacking order of the two-state quadratic
/// forms.
struct OccupationMeasure {
    std::size_t num_rates = 0, num_states = 0, num_powers = 0;
    Vec x;

    static OccupationMeasure zeros(std::size_t nr, std::size_t ns, std::size_t np) {
        OccupationMeasure m;
        m.num_rates = nr;
        m.num_states = ns;
        m.num_powers = np;
        m.x.assign(nr * ns * np, 0.0);
        return m;
    }
    static OccupationMeasure from_vector(std::size_t nr, std::size_t ns, std::size_t np, Vec v) {
        OccupationMeasure m = zeros(nr, ns, np);
        if (v.size() != m.x.size())
            throw std::invalid_argument("OccupationMeasure: vector length mismatch");
        m.x = std::move(v);
        return m;
    }

    std::size_t index(std::size_t r, std::size_t s, std::size_t p) const {
        return (r * num_states + s) * num_powers + p;
    }
    double operator()(std::size_t r, std::size_t s, std::size_t p) const {
        return x[index(r, s, p)];
    }
    double& operator()(std::size_t r, std::size_t s, std::size_t p) {
        return x[index(r, s, p)];
    }

    Vec rate_marginal() const {
        Vec out(num_rates, 0.0);
        for (std::size_t r = 0; r < num_rates; ++r)
            for (std::size_t s = 0; s < num_states; ++s)
                for (std::size_t p = 0; p < num_powers; ++p) out[r] += (*this)(r, s, p);
        return out;
    }
    Vec state_marginal() const {
        Vec out(num_states, 0.0);
        for (std::size_t r = 0; r < num_rates; ++r)
            for (std::size_t s = 0; s < num_states; ++s)
                for (std::size_t p = 0; p < num_powers; ++p) out[s] += (*this)(r, s, p);
        return out;
    }
};

/// Co-design program: linear objective over the occupation measure, the
/// rate-stationarity/normalization equality block, and one polynomial
/// stability constraint h_i <= 0 per data rate with theta_i = lambda_bar /
/// lambda_i. The h_i weigh each current-rate column by its own conditional
/// occupation mass X(r_j, s, p).
struct CpopProblem {
    SdMcChannel channel;
    Vec c;        ///< objective over the stacked measure
    Mat a_eq;
    Vec b_eq;
    Vec thetas;   ///< theta_i, one per rate
    std::vector<std::pair<Vec, double>> extra_eq;  ///< rows appended by callers (marginal pins)

    std::size_t num_vars() const { return c.size(); }
    std::size_t num_rates() const { return channel.num_rates(); }
    std::size_t index_of(std::size_t r, std::size_t s, std::size_t p) const {
        return (r * channel.num_states() + s) * channel.num_powers() + p;
    }

    double eval_h(std::size_t i, const Vec& x) const {
        const std::size_t nr = channel.num_rates(), ns = channel.num_states(),
                          np = channel.num_powers();
        Vec xr(nr, 0.0);
        for (std::size_t r = 0; r < nr; ++r)
            for (std::size_t k = 0; k < ns * np; ++k) xr[r] += x[r * ns * np + k];
        double total = 0.0;
        for (std::size_t j = 0; j < nr; ++j) {
            double w = 0.0;
            for (std::size_t s = 0; s < ns; ++s)
                for (std::size_t p = 0; p < np; ++p)
                    w += channel.prob(i, j, s, p) * x[(j * ns + s) * np + p];
            double prod = 1.0;
            for (std::size_t l = 0; l < nr; ++l)
                if (l != j) prod *= xr[l];
            total += w * prod;
        }
        double prod_all = 1.0;
        for (std::size_t l = 0; l < nr; ++l) prod_all *= xr[l];
        return total - thetas[i] * thetas[i] * prod_all;
    }

    Vec grad_h(std::size_t i, const Vec& x) const {
        const std::size_t nr = channel.num_rates(), ns = channel.num_states(),
                          np = channel.num_powers();
        Vec xr(nr, 0.0);
        for (std::size_t r = 0; r < nr; ++r)
            for (std::size_t k = 0; k < ns * np; ++k) xr[r] += x[r * ns * np + k];
        Vec w(nr, 0.0);
        for (std::size_t j = 0; j < nr; ++j)
            for (std::size_t s = 0; s < ns; ++s)
                for (std::size_t p = 0; p < np; ++p)
                    w[j] += channel.prob(i, j, s, p) * x[(j * ns + s) * np + p];
        // prod_except[l] = prod_{k != l} xr[k]; prod_except2[j][m] likewise for pairs
        auto prod_except = [&](std::size_t skip) {
            double prod = 1.0;
            for (std::size_t l = 0; l < nr; ++l)
                if (l != skip) prod *= xr[l];
            return prod;
        };
        auto prod_except2 = [&](std::size_t skip1, std::size_t skip2) {
            double prod = 1.0;
            for (std::size_t l = 0; l < nr; ++l)
                if (l != skip1 && l != skip2) prod *= xr[l];
            return prod;
        };
        Vec g(x.size(), 0.0);
        for (std::size_t m = 0; m < nr; ++m) {
            double block_common = -thetas[i] * thetas[i] * prod_except(m);
            for (std::size_t j = 0; j < nr; ++j)
                if (j != m) block_common += w[j] * prod_except2(j, m);
            const double pm = prod_except(m);
            for (std::size_t s = 0; s < ns; ++s)
                for (std::size_t p = 0; p < np; ++p)
                    g[(m * ns + s) * np + p] = block_common + channel.prob(i, m, s, p) * pm;
        }
        return g;
    }

    optim::ProblemView view() const {
        optim::ProblemView v;
        v.c = c;
        v.a_eq = Mat(a_eq.rows() + extra_eq.size(), num_vars());
        v.b_eq.assign(a_eq.rows() + extra_eq.size(), 0.0);
        for (std::size_t i = 0; i < a_eq.rows(); ++i) {
            for (std::size_t j = 0; j < num_vars(); ++j) v.a_eq(i, j) = a_eq(i, j);
            v.b_eq[i] = b_eq[i];
        }
        for (std::size_t r = 0; r < extra_eq.size(); ++r) {
            for (std::size_t j = 0; j < num_vars(); ++j)
                v.a_eq(a_eq.rows() + r, j) = extra_eq[r].first[j];
            v.b_eq[a_eq.rows() + r] = extra_eq[r].second;
        }
        for (std::size_t i = 0; i < num_rates(); ++i) {
            const CpopProblem* self = this;
            v.ineq.push_back([self, i](const Vec& x) { return self->eval_h(i, x); });
            v.ineq_grad.push_back([self, i](const Vec& x) { return self->grad_h(i, x); });
        }
        return v;
    }
};

/// Assembles the co-design program for a valid channel, cost model, and
/// contraction parameter. One rate-stationarity row is dropped (the block
/// rows sum to zero) to keep the equality system full-rank.
inline CpopProblem build_cpop(const SdMcChannel& channel, const CostModel& costs,
                              const StabilityParams& params, double lambda_bar) {
    if (!(lambda_bar > 0.0) || !(lambda_bar < 1.0))
        throw std::invalid_argument("build_cpop: lambda_bar must lie in (0, 1)");
    params.check(channel.num_rates());
    const std::size_t nr = channel.num_rates(), ns = channel.num_states(),
                      np = channel.num_powers();
    CpopProblem p;
    p.channel = channel;
    p.c.resize(nr * ns * np);
    for (std::size_t r = 0; r < nr; ++r)
        for (std::size_t s = 0; s < ns; ++s)
            for (std::size_t pw = 0; pw < np; ++pw)
                p.c[(r * ns + s) * np + pw] = costs.combined(r, s, pw);
    const std::size_t eq_rows = (nr - 1) + 1;
    p.a_eq = Mat(eq_rows, nr * ns * np);
    p.b_eq.assign(eq_rows, 0.0);
    for (std::size_t i = 0; i + 1 < nr; ++i) {  // last stationarity row is redundant
        for (std::size_t s = 0; s < ns; ++s)
            for (std::size_t pw = 0; pw < np; ++pw) {
                p.a_eq(i, (i * ns + s) * np + pw) += 1.0;
                for (std::size_t j = 0; j < nr; ++j)
                    p.a_eq(i, (j * ns + s) * np + pw) -= channel.prob(i, j, s, pw);
            }
        p.b_eq[i] = 0.0;
    }
    for (std::size_t v = 0; v < nr * ns * np; ++v) p.a_eq(eq_rows - 1, v) = 1.0;
    p.b_eq[eq_rows - 1] = 1.0;
    p.thetas.resize(nr);
    for (std::size_t i = 0; i < nr; ++i) p.thetas[i] = lambda_bar / params.lambdas[i];
    return p;
}

/// h_1 ... h_{M_R} at a measure; feasibility means all <= 0.
inline Vec eval_stability_polynomials(const CpopProblem& p, const OccupationMeasure& m) {
    if (m.x.size() != p.num_vars())
        throw std::invalid_argument("eval_stability_polynomials: measure dimension mismatch");
    Vec out(p.num_rates());
    for (std::size_t i = 0; i < p.num_rates(); ++i) out[i] = p.eval_h(i, m.x);
    return out;
}

/// Two-rate specialization: h_i is the quadratic
///   sum_sp P_i1 X(r1,s,p) X(r2) + sum_sp P_i2 X(r2,s,p) X(r1)
///     - theta_i^2 X(r1) X(r2)
/// realized as x' Q_i x over the stacked measure, Q_i symmetrized.
inline std::vector<Mat> two_state_quadratic_forms(const SdMcChannel& channel, const Vec& thetas) {
    if (channel.num_rates() != 2)
        throw std::invalid_argument("two_state_quadratic_forms: exactly two data rates required");
    if (thetas.size() != 2)
        throw std::invalid_argument("two_state_quadratic_forms: need theta_1, theta_2");
    const std::size_t ns = channel.num_states(), np = channel.num_powers();
    const std::size_t blk = ns * np, n = 2 * blk;
    std::vector<Mat> out;
    for (std::size_t i = 0; i < 2; ++i) {
        Mat m(n, n);
        // (sum_sp P_i1 u) * (1' v):  u-block row weights against v-block ones
        for (std::size_t k = 0; k < blk; ++k) {
            const std::size_t s = k / np, p = k % np;
            for (std::size_t l = 0; l < blk; ++l) {
                m(k, blk + l) += channel.prob(i, 0, s, p);        // X(r1,s,p) * X(r2 cells)
                m(blk + k, l) += channel.prob(i, 1, s, p);        // X(r2,s,p) * X(r1 cells)
            }
        }
        for (std::size_t k = 0; k < blk; ++k)
            for (std::size_t l = 0; l < blk; ++l) m(k, blk + l) -= thetas[i] * thetas[i];
        Mat sym(n, n);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b) sym(a, b) = 0.5 * (m(a, b) + m(b, a));
        out.push_back(std::move(sym));
    }
    return out;
}

enum class BoundForm { Proof, Theorem };

/// Linear relaxation of the stability block: for each current rate j,
///   sum_i lambda_i^2 sum_sp P_ij(s,p) X(r_j,s,p) <= beta X(r_j)
/// with beta = (lambda_bar / M_R)^2 (proof form, default, more conservative)
/// or beta = lambda_bar^2 / M_R (theorem form).
inline optim::LpProblem build_lp_relaxation(const SdMcChannel& channel, const CostModel& costs,
                                            const StabilityParams& params, double lambda_bar,
                                            BoundForm form = BoundForm::Proof) {
    CpopProblem base = build_cpop(channel, costs, params, lambda_bar);
    const std::size_t nr = channel.num_rates(), ns = channel.num_states(),
                      np = channel.num_powers();
    const double mr = static_cast<double>(nr);
    const double beta = form == BoundForm::Proof ? (lambda_bar / mr) * (lambda_bar / mr)
                                                 : lambda_bar * lambda_bar / mr;
    optim::LpProblem lp;
    lp.c = base.c;
    lp.a_eq = base.a_eq;
    lp.b_eq = base.b_eq;
    lp.a_in = Mat(nr, nr * ns * np);
    lp.b_in.assign(nr, 0.0);
    for (std::size_t j = 0; j < nr; ++j)
        for (std::size_t s = 0; s < ns; ++s)
            for (std::size_t pw = 0; pw < np; ++pw) {
                double w = 0.0;
                for (std::size_t i = 0; i < nr; ++i)
                    w += params.lambdas[i] * params.lambdas[i] * channel.prob(i, j, s, pw);
                lp.a_in(j, (j * ns + s) * np + pw) = w - beta;
            }
    return lp;
}

/// Conditional power distributions per rate plus the environment marginal.
struct PowerPolicy {
    std::size_t num_powers = 0;
    /// given[r][p] = P(p | rate r)
    std::vector<Vec> given;
};

struct ExtractedPolicies {
    PowerPolicy power;
    Distribution env_marginal;
    std::vector<std::size_t> zero_mass_rates;  ///< rates completed with the uniform conditional
};

inline ExtractedPolicies extract_policies(const OccupationMeasure& m) {
    ExtractedPolicies out;
    out.power.num_powers = m.num_powers;
    out.power.given.assign(m.num_rates, Vec(m.num_powers, 0.0));
    const Vec xr = m.rate_marginal();
    for (std::size_t r = 0; r < m.num_rates; ++r) {
        if (xr[r] > 1e-12) {
            for (std::size_t p = 0; p < m.num_powers; ++p) {
                double mass = 0.0;
                for (std::size_t s = 0; s < m.num_states; ++s) mass += m(r, s, p);
                out.power.given[r][p] = mass / xr[r];
            }
        } else {
            for (std::size_t p = 0; p < m.num_powers; ++p)
                out.power.given[r][p] = 1.0 / static_cast<double>(m.num_powers);
            out.zero_mass_rates.push_back(r);
        }
    }
    out.env_marginal = m.state_marginal();
    return out;
}

inline double joint_average_cost(const OccupationMeasure& m, const CostModel& costs) {
    double total = 0.0;
    for (std::size_t r = 0; r < m.num_rates; ++r)
        for (std::size_t s = 0; s < m.num_states; ++s)
            for (std::size_t p = 0; p < m.num_powers; ++p)
                total += costs.combined(r, s, p) * m(r, s, p);
    return total;
}

/// Dispatch result for one co-design solve.
struct CodesignResult {
    optim::Solution solution;
    std::string route;  ///< "qcqp" | "local" | "lp" | "grid"
    bool psd_gate_passed = false;
    OccupationMeasure measure;        ///< valid when solution.feasible()
    ExtractedPolicies policies;
    double cost = std::numeric_limits<double>::infinity();
    optim::Solution lp_relaxation;    ///< warm-start certificate (may be infeasible)
};

inline OccupationMeasure measure_from_solution(const CpopProblem& p, const Vec& x) {
    return OccupationMeasure::from_vector(p.channel.num_rates(), p.channel.num_states(),
                                          p.channel.num_powers(), x);
}

inline optim::Solution solve_cpop_local(const CpopProblem& p, std::vector<Vec> starts,
                                        const optim::LocalSolveOptions& opt = {}) {
    return optim::solve_local(p.view(), std::move(starts), opt);
}

/// Full pipeline: LP relaxation first (certificate + warm start), then the
/// PSD-gated convex route for two-rate channels, falling back to the penalty
/// local solver when the gate fails or M_R > 2.
inline CodesignResult solve_codesign(const SdMcChannel& channel, const CostModel& costs,
                                     const StabilityParams& params, double lambda_bar,
                                     BoundForm lp_form = BoundForm::Proof) {
    CpopProblem cpop = build_cpop(channel, costs, params, lambda_bar);
    CodesignResult out;
    out.lp_relaxation = optim::solve_lp(build_lp_relaxation(channel, costs, params, lambda_bar,
                                                            lp_form));
    std::vector<Vec> starts;
    if (out.lp_relaxation.status == optim::SolveStatus::Optimal)
        starts.push_back(out.lp_relaxation.x);

    bool gate = false;
    if (channel.num_rates() == 2) {
        const std::vector<Mat> qs = two_state_quadratic_forms(channel, cpop.thetas);
        gate = optim::is_psd(qs[0]) && optim::is_psd(qs[1]);
        if (gate) {
            optim::QcqpProblem q;
            q.c = cpop.c;
            q.a_eq = cpop.view().a_eq;
            q.b_eq = cpop.view().b_eq;
            for (const Mat& m : qs) q.add_quadratic(m);
            out.solution = optim::solve_convex_qcqp(q);
            out.route = "qcqp";
        }
    }
    out.psd_gate_passed = gate;
    if (!gate) {
        out.solution = solve_cpop_local(cpop, std::move(starts));
        out.route = "local";
    }
    if (out.solution.feasible()) {
        out.measure = measure_from_solution(cpop, out.solution.x);
        out.policies = extract_policies(out.measure);
        out.cost = out.solution.value;
    }
    return out;
}

struct SeparationResult {
    bool feasible = false;
    std::string detail;
    Distribution env_marginal;       ///< fixed by the environment-only optimization
    ControlPolicy env_policy;
    ExtractedPolicies comm_policies;
    OccupationMeasure measure;
    double joint_cost = std::numeric_limits<double>::infinity();
    double env_only_cost = 0.0;
    double comm_only_cost = std::numeric_limits<double>::infinity();
};

/// Baseline that designs the two sides independently: the environment policy
/// minimizes the average c_m alone (an occupation LP with no stability
/// coupling); its stationary marginal is then pinned while the communication
/// occupation minimizes c_p + c_r under the stability constraints. Reports
/// infeasibility when no stable communication design exists under the pinned
/// marginal — the regime where separation breaks down.
inline SeparationResult separation_baseline(const SdMcChannel& channel, const EnvMdp& mdp,
                                            const CostModel& costs, const StabilityParams& params,
                                            double lambda_bar) {
    SeparationResult out;
    // environment side: min average c_m over achievable stationary measures
    optim::LpProblem env_lp;
    const std::size_t ns = mdp.num_states(), na = mdp.num_actions();
    env_lp.c = mdp.costs;
    env_lp.a_eq = Mat(ns + 1, ns * na);
    env_lp.b_eq.assign(ns + 1, 0.0);
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t sp = 0; sp < ns; ++sp)
            for (std::size_t a = 0; a < na; ++a) {
                if (sp == s) env_lp.a_eq(s, sp * na + a) += 1.0;
                env_lp.a_eq(s, sp * na + a) -= mdp.prob(s, sp, a);
            }
    for (std::size_t v = 0; v < ns * na; ++v) env_lp.a_eq(ns, v) = 1.0;
    env_lp.b_eq[ns] = 1.0;
    optim::Solution env_sol = optim::solve_lp(env_lp);
    if (env_sol.status != optim::SolveStatus::Optimal) {
        out.detail = "environment occupation LP failed: " + optim::to_string(env_sol.status);
        return out;
    }
    out.env_only_cost = env_sol.value;
    out.env_marginal.assign(ns, 0.0);
    out.env_policy.num_actions = na;
    out.env_policy.given.assign(ns, Vec(na, 1.0 / static_cast<double>(na)));
    for (std::size_t s = 0; s < ns; ++s) {
        double mass = 0.0;
        for (std::size_t a = 0; a < na; ++a) mass += env_sol.x[s * na + a];
        out.env_marginal[s] = mass;
        if (mass > 1e-12)
            for (std::size_t a = 0; a < na; ++a) out.env_policy.given[s][a] = env_sol.x[s * na + a] / mass;
    }

    // communication side: comm-only objective under the pinned marginal
    CostModel comm_costs = costs;
    comm_costs.joint_override = Vec(channel.num_rates() * ns * channel.num_powers(), 0.0);
    for (std::size_t r = 0; r < channel.num_rates(); ++r)
        for (std::size_t s = 0; s < ns; ++s)
            for (std::size_t p = 0; p < channel.num_powers(); ++p)
                (*comm_costs.joint_override)[(r * ns + s) * channel.num_powers() + p] =
                    costs.power_cost[p] + costs.rate_cost[r];
    CpopProblem comm = build_cpop(channel, comm_costs, params, lambda_bar);
    for (std::size_t s = 0; s + 1 < ns; ++s) {  // last pin redundant with normalization
        Vec row(comm.num_vars(), 0.0);
        for (std::size_t r = 0; r < channel.num_rates(); ++r)
            for (std::size_t p = 0; p < channel.num_powers(); ++p)
                row[comm.index_of(r, s, p)] = 1.0;
        comm.extra_eq.emplace_back(std::move(row), out.env_marginal[s]);
    }
    optim::Solution comm_sol = solve_cpop_local(comm, {});
    if (!comm_sol.feasible()) {
        out.detail = "stability constraint infeasible under the fixed environment marginal (" +
                     optim::to_string(comm_sol.status) + ")";
        return out;
    }
    out.feasible = true;
    out.comm_only_cost = comm_sol.value;
    out.measure = measure_from_solution(comm, comm_sol.x);
    out.comm_policies = extract_policies(out.measure);
    out.joint_cost = joint_average_cost(out.measure, costs);
    return out;
}

/// Stationary joint occupation measure realized by running the given
/// policies: the (s, r) product chain is built from the policy-induced
/// environment chain and the power-mixed rate transitions, and its
/// stationary distribution is spread over powers by the power policy.
inline OccupationMeasure stationary_occupation(const SdMcChannel& channel, const EnvMdp& mdp,
                                               const ControlPolicy& env_policy,
                                               const PowerPolicy& power_policy) {
    const std::size_t ns = mdp.num_states(), nr = channel.num_rates(), np = channel.num_powers();
    Mat env_chain = induced_env_chain(mdp, env_policy);
    Mat joint(ns * nr, ns * nr);
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t r = 0; r < nr; ++r)
            for (std::size_t s2 = 0; s2 < ns; ++s2)
                for (std::size_t r2 = 0; r2 < nr; ++r2) {
                    double rate_step = 0.0;
                    for (std::size_t p = 0; p < np; ++p)
                        rate_step += channel.prob(r2, r, s, p) * power_policy.given[r][p];
                    joint(s2 * nr + r2, s * nr + r) = env_chain(s2, s) * rate_step;
                }
    Distribution psi = stationary_distribution(joint);
    OccupationMeasure m = OccupationMeasure::zeros(nr, ns, np);
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t r = 0; r < nr; ++r)
            for (std::size_t p = 0; p < np; ++p)
                m(r, s, p) = psi[s * nr + r] * power_policy.given[r][p];
    return m;
}

}  // namespace sdmc
