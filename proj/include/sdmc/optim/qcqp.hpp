#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdmc/matrix.hpp"
#include "sdmc/optim/lp.hpp"
#include "sdmc/optim/problem_view.hpp"
#include "sdmc/optim/psd.hpp"
#include "sdmc/optim/solution.hpp"

namespace sdmc::optim {

/// min c'x  s.t.  Aeq x = beq,  x' Qk x <= 0 for each k,  x >= 0.
/// Quadratic matrices are symmetrized on ingest.
struct QcqpProblem {
    Vec c;
    Mat a_eq;
    Vec b_eq;
    std::vector<Mat> quadratics;

    std::size_t num_vars() const { return c.size(); }

    void add_quadratic(const Mat& q) {
        if (q.rows() != q.cols()) throw std::invalid_argument("QcqpProblem: quadratic not square");
        Mat sym(q.rows(), q.cols());
        for (std::size_t i = 0; i < q.rows(); ++i)
            for (std::size_t j = 0; j < q.cols(); ++j) sym(i, j) = 0.5 * (q(i, j) + q(j, i));
        quadratics.push_back(sym);
    }

    double eval_quadratic(std::size_t k, const Vec& x) const {
        const Mat& q = quadratics[k];
        double s = 0.0;
        for (std::size_t i = 0; i < q.rows(); ++i)
            for (std::size_t j = 0; j < q.cols(); ++j) s += x[i] * q(i, j) * x[j];
        return s;
    }

    ProblemView view() const {
        ProblemView v;
        v.c = c;
        v.a_eq = a_eq;
        v.b_eq = b_eq;
        for (std::size_t k = 0; k < quadratics.size(); ++k) {
            const Mat q = quadratics[k];
            v.ineq.push_back([q](const Vec& x) {
                double s = 0.0;
                for (std::size_t i = 0; i < q.rows(); ++i)
                    for (std::size_t j = 0; j < q.cols(); ++j) s += x[i] * q(i, j) * x[j];
                return s;
            });
            v.ineq_grad.push_back([q](const Vec& x) {
                Vec g(q.rows(), 0.0);
                for (std::size_t i = 0; i < q.rows(); ++i)
                    for (std::size_t j = 0; j < q.cols(); ++j) g[i] += 2.0 * q(i, j) * x[j];
                return g;
            });
        }
        return v;
    }
};

inline Residuals evaluate_qcqp_residuals(const QcqpProblem& p, const Vec& x) {
    return p.view().residuals(x);
}

namespace detail {

/// Strictly positive feasible point of {Aeq x = b, x >= 0} via the phase-1 LP
/// max t s.t. Aeq(y + t 1) = b, y >= 0, 0 <= t <= 1. Returns empty when the
/// relative interior margin is below tol.
inline Vec strictly_feasible_point(const Mat& a_eq, const Vec& b_eq, std::size_t n, double tol) {
    LpProblem ph;
    ph.c.assign(n + 1, 0.0);
    ph.c[n] = -1.0;  // maximize t
    ph.a_eq = Mat(a_eq.rows(), n + 1);
    for (std::size_t i = 0; i < a_eq.rows(); ++i) {
        double rowsum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            ph.a_eq(i, j) = a_eq(i, j);
            rowsum += a_eq(i, j);
        }
        ph.a_eq(i, n) = rowsum;
    }
    ph.b_eq = b_eq;
    ph.a_in = Mat(1, n + 1);
    ph.a_in(0, n) = 1.0;
    ph.b_in = {1.0};
    Solution s = solve_lp(ph);
    if (s.status != SolveStatus::Optimal || s.x[n] <= tol) return {};
    Vec x(n);
    for (std::size_t j = 0; j < n; ++j) x[j] = s.x[j] + s.x[n];
    return x;
}

}  // namespace detail

/// Convex route behind the PSD gate. A PSD quadratic x'Qx <= 0 admits no
/// strictly feasible interior: on x'Qx <= 0 it holds with equality, i.e.
/// x lies in the null space of Q. Each gated quadratic therefore contributes
/// the linear rows V'x = 0 (V spanning the range of Q), after which a
/// log-barrier interior-point iteration over the remaining nonnegativity
/// constraints solves the problem. Refuses non-PSD input.
inline Solution solve_convex_qcqp(const QcqpProblem& p, double gate_tol = 1e-9,
                                  std::ostream* trace = nullptr) {
    const std::size_t n = p.num_vars();
    // gate: every quadratic must be PSD
    std::vector<EigenDecomposition> eigs;
    eigs.reserve(p.quadratics.size());
    for (std::size_t k = 0; k < p.quadratics.size(); ++k) {
        eigs.push_back(jacobi_eigen(p.quadratics[k]));
        if (eigs.back().values.front() < -gate_tol)
            throw std::invalid_argument(
                "solve_convex_qcqp: PSD gate failed for quadratic constraint " + std::to_string(k) +
                " (min eigenvalue " + std::to_string(eigs.back().values.front()) +
                "); use solve_cpop_local for the nonconvex regime");
    }

    // null-space reduction: append V' x = 0 rows for eigenvalues above tol
    std::vector<Vec> extra_rows;
    for (const auto& e : eigs) {
        const double cutoff = std::max(1e-12, 1e-9 * std::abs(e.values.back()));
        for (std::size_t k = 0; k < e.values.size(); ++k)
            if (e.values[k] > cutoff) {
                Vec row(n);
                for (std::size_t i = 0; i < n; ++i) row[i] = e.vectors(i, k);
                extra_rows.push_back(std::move(row));
            }
    }
    Mat a_eq(p.a_eq.rows() + extra_rows.size(), n);
    Vec b_eq(p.a_eq.rows() + extra_rows.size(), 0.0);
    for (std::size_t i = 0; i < p.a_eq.rows(); ++i) {
        for (std::size_t j = 0; j < n; ++j) a_eq(i, j) = p.a_eq(i, j);
        b_eq[i] = p.b_eq[i];
    }
    for (std::size_t r = 0; r < extra_rows.size(); ++r)
        for (std::size_t j = 0; j < n; ++j) a_eq(p.a_eq.rows() + r, j) = extra_rows[r][j];

    Solution sol;
    Vec x = detail::strictly_feasible_point(a_eq, b_eq, n, 1e-10);
    if (x.empty()) {
        // no strict interior; the reduced problem is still an LP on a face
        LpProblem reduced{p.c, a_eq, b_eq, Mat(), Vec()};
        Solution lp = solve_lp(reduced);
        if (lp.status != SolveStatus::Optimal) {
            sol.status = SolveStatus::Infeasible;
            sol.detail = "no strictly feasible point: " + lp.detail;
            return sol;
        }
        sol = lp;
        sol.residuals = evaluate_qcqp_residuals(p, sol.x);
        sol.detail = "solved on a zero-interior face (boundary LP)";
        return sol;
    }

    // log-barrier path: minimize t c'x - sum log x_i s.t. a_eq x = b_eq,
    // barrier weight mu = 1/t decreasing x0.2 per centering step
    const std::size_t m = a_eq.rows();
    double t = 1.0;
    const double mu_stop = 1e-9 * static_cast<double>(n + p.quadratics.size());
    if (trace) *trace << "iter,objective,max_residual\n";
    std::size_t trace_iter = 0;
    while (1.0 / t > mu_stop) {
        for (int newton = 0; newton < 60; ++newton) {
            Vec g(n);
            for (std::size_t i = 0; i < n; ++i) g[i] = t * p.c[i] - 1.0 / x[i];
            Mat kkt(n + m, n + m);
            Vec rhs(n + m, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                kkt(i, i) = 1.0 / (x[i] * x[i]);
                rhs[i] = -g[i];
            }
            for (std::size_t r = 0; r < m; ++r)
                for (std::size_t j = 0; j < n; ++j) {
                    kkt(n + r, j) = a_eq(r, j);
                    kkt(j, n + r) = a_eq(r, j);
                }
            Vec step;
            try {
                step = solve_linear(kkt, rhs);
            } catch (const std::runtime_error&) {
                // conditioning collapses when the central path lands on a
                // vertex; the reduced problem is linear, so the simplex
                // finishes the job exactly
                LpProblem reduced{p.c, a_eq, b_eq, Mat(), Vec()};
                Solution lp = solve_lp(reduced);
                if (lp.status == SolveStatus::Optimal) {
                    lp.residuals = evaluate_qcqp_residuals(p, lp.x);
                    lp.detail = "barrier finished by a simplex polish at the vertex limit";
                    return lp;
                }
                sol.status = SolveStatus::MaxIterations;
                sol.detail = "singular KKT system in barrier centering";
                sol.x = x;
                sol.value = dot(p.c, x);
                sol.residuals = evaluate_qcqp_residuals(p, x);
                return sol;
            }
            Vec dx(step.begin(), step.begin() + n);
            double decrement = 0.0;
            for (std::size_t i = 0; i < n; ++i) decrement += g[i] * dx[i];
            if (-decrement * 0.5 < 1e-13) break;
            double alpha = 1.0;
            for (std::size_t i = 0; i < n; ++i)
                if (dx[i] < 0.0) alpha = std::min(alpha, -0.99 * x[i] / dx[i]);
            auto fval = [&](const Vec& xx) {
                double f = t * dot(p.c, xx);
                for (double v : xx) f -= std::log(v);
                return f;
            };
            const double f0 = fval(x);
            while (alpha > 1e-14) {  // Armijo 1e-4, shrink 0.5
                Vec xn(n);
                for (std::size_t i = 0; i < n; ++i) xn[i] = x[i] + alpha * dx[i];
                if (fval(xn) <= f0 + 1e-4 * alpha * decrement) {
                    x = std::move(xn);
                    break;
                }
                alpha *= 0.5;
            }
            if (alpha <= 1e-14) break;
        }
        if (trace)
            *trace << trace_iter++ << ',' << dot(p.c, x) << ','
                   << evaluate_qcqp_residuals(p, x).max() << '\n';
        t *= 5.0;  // mu <- 0.2 mu
    }

    sol.x = x;
    sol.value = dot(p.c, x);
    sol.residuals = evaluate_qcqp_residuals(p, x);
    sol.status = (sol.residuals.max() <= 1e-8) ? SolveStatus::Optimal : SolveStatus::MaxIterations;
    if (sol.status != SolveStatus::Optimal)
        sol.detail = "barrier point violates constraints beyond tolerance";
    return sol;
}

}  // namespace sdmc::optim
