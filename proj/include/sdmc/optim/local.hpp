#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <cstddef>
#include <ostream>
#include <vector>

#include "sdmc/optim/problem_view.hpp"
#include "sdmc/optim/solution.hpp"
#include "sdmc/rng.hpp"

namespace sdmc::optim {

namespace detail {

/// Euclidean projection onto {x >= 0, sum x = 1} (sort-based, deterministic).
inline Vec project_simplex(Vec v) {
    const std::size_t n = v.size();
    Vec u = v;
    std::sort(u.begin(), u.end(), std::greater<double>());
    double css = 0.0, theta = 0.0;
    std::size_t rho = 0;
    for (std::size_t i = 0; i < n; ++i) {
        css += u[i];
        const double th = (css - 1.0) / static_cast<double>(i + 1);
        if (u[i] - th > 0.0) {
            rho = i + 1;
            theta = th;
        }
    }
    (void)rho;
    for (double& x : v) x = std::max(0.0, x - theta);
    return v;
}

inline Vec project_nonneg(Vec v) {
    for (double& x : v) x = std::max(0.0, x);
    return v;
}

/// Index of a normalization row (all ones, rhs 1), or npos.
inline std::size_t find_normalization_row(const Mat& a, const Vec& b) {
    for (std::size_t i = 0; i < a.rows(); ++i) {
        bool ones = true;
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (std::abs(a(i, j) - 1.0) > 1e-12) ones = false;
        if (ones && std::abs(b[i] - 1.0) < 1e-12) return i;
    }
    return static_cast<std::size_t>(-1);
}

}  // namespace detail

struct LocalSolveOptions {
    double eq_tol = 1e-8;
    double ineq_tol = 1e-7;
    std::size_t max_outer = 14;        ///< penalty escalations (x10 each)
    std::size_t max_inner = 4000;      ///< projected-descent steps per escalation
    double rho0 = 10.0;
    std::uint64_t extra_start_seed = 20240401;
    std::size_t random_starts = 12;    ///< appended to caller-provided starts
    std::ostream* trace = nullptr;     ///< CSV iteration trace: iter,objective,max_residual
};

/// Quadratic-penalty local solver with projected descent onto the simplex
/// (when the equality block carries a normalization row; plain nonnegativity
/// otherwise). Remaining equalities and the g_k <= 0 constraints are
/// penalized. Multi-start; best feasible point wins, ties break toward the
/// lexicographically smaller point. Never claims global optimality.
inline Solution solve_local(const ProblemView& p, std::vector<Vec> starts,
                            const LocalSolveOptions& opt = {}) {
    const std::size_t n = p.num_vars();
    const bool on_simplex = detail::find_normalization_row(p.a_eq, p.b_eq) !=
                            static_cast<std::size_t>(-1);
    auto project = [&](Vec v) {
        return on_simplex ? detail::project_simplex(std::move(v))
                          : detail::project_nonneg(std::move(v));
    };

    Rng rng(opt.extra_start_seed);
    starts.push_back(Vec(n, 1.0 / static_cast<double>(n)));
    for (std::size_t k = 0; k < opt.random_starts; ++k) {
        Vec x(n);
        for (double& v : x) v = -std::log(std::max(rng.uniform(), 1e-300));
        const double s = sum(x);
        for (double& v : x) v /= s;
        starts.push_back(std::move(x));
    }

    auto penalty = [&](const Vec& x, double rho, Vec* grad) {
        double f = dot(p.c, x);
        if (grad) *grad = p.c;
        if (p.a_eq.rows()) {
            Vec ax = p.a_eq * x;
            for (std::size_t i = 0; i < p.a_eq.rows(); ++i) {
                const double r = ax[i] - p.b_eq[i];
                f += rho * r * r;
                if (grad)
                    for (std::size_t j = 0; j < n; ++j) (*grad)[j] += 2.0 * rho * r * p.a_eq(i, j);
            }
        }
        for (std::size_t k = 0; k < p.ineq.size(); ++k) {
            const double g = p.ineq[k](x);
            if (g > 0.0) {
                f += rho * g * g;
                if (grad) {
                    Vec gg = p.ineq_grad[k](x);
                    for (std::size_t j = 0; j < n; ++j) (*grad)[j] += 2.0 * rho * g * gg[j];
                }
            }
        }
        return f;
    };

    Solution best;
    best.status = SolveStatus::InfeasibleFromStarts;
    double best_infeas = std::numeric_limits<double>::infinity();

    if (opt.trace) *opt.trace << "iter,objective,max_residual\n";
    std::size_t trace_iter = 0;
    for (const Vec& s0 : starts) {
        if (s0.size() != n) continue;
        Vec x = project(s0);
        double rho = opt.rho0;
        for (std::size_t outer = 0; outer < opt.max_outer; ++outer) {
            double step = 0.1;
            Vec grad;
            double f = penalty(x, rho, &grad);
            for (std::size_t it = 0; it < opt.max_inner; ++it) {
                Vec cand(n);
                for (std::size_t j = 0; j < n; ++j) cand[j] = x[j] - step * grad[j];
                cand = project(cand);
                const double fc = penalty(cand, rho, nullptr);
                if (fc < f - 1e-15) {
                    double moved = 0.0;
                    for (std::size_t j = 0; j < n; ++j) moved = std::max(moved, std::abs(cand[j] - x[j]));
                    x = std::move(cand);
                    f = penalty(x, rho, &grad);
                    step = std::min(step * 1.3, 1.0);
                    if (moved < 1e-14) break;
                } else {
                    step *= 0.5;
                    if (step < 1e-15) break;
                }
            }
            Residuals r = p.residuals(x);
            if (opt.trace)
                *opt.trace << trace_iter++ << ',' << dot(p.c, x) << ',' << r.max() << '\n';
            if (r.equality <= opt.eq_tol * 0.1 && r.inequality <= opt.ineq_tol * 0.1) break;
            rho *= 10.0;
        }
        Residuals r = p.residuals(x);
        const bool feas = r.equality <= opt.eq_tol && r.inequality <= opt.ineq_tol &&
                          r.nonnegativity <= 1e-12;
        const double val = dot(p.c, x);
        if (feas) {
            bool better = best.status != SolveStatus::FeasibleLocal || val < best.value - 1e-12;
            if (best.status == SolveStatus::FeasibleLocal && std::abs(val - best.value) <= 1e-12)
                better = std::lexicographical_compare(x.begin(), x.end(), best.x.begin(),
                                                      best.x.end());
            if (better) {
                best.x = x;
                best.value = val;
                best.status = SolveStatus::FeasibleLocal;
                best.residuals = r;
                best.detail.clear();
            }
        } else if (best.status != SolveStatus::FeasibleLocal) {
            const double infeas = r.max();
            if (infeas < best_infeas) {
                best_infeas = infeas;
                best.x = x;
                best.value = val;
                best.residuals = r;
                best.detail = "least-infeasible point across starts";
            }
        }
    }
    return best;
}

}  // namespace sdmc::optim
