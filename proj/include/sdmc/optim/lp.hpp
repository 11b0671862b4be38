#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "sdmc/matrix.hpp"
#include "sdmc/optim/solution.hpp"

namespace sdmc::optim {

/// min c'x  s.t.  Aeq x = beq,  Ain x <= bin,  x >= 0.
struct LpProblem {
    Vec c;
    Mat a_eq;
    Vec b_eq;
    Mat a_in;
    Vec b_in;

    std::size_t num_vars() const { return c.size(); }

    void check_shape() const {
        if (a_eq.rows() != b_eq.size() || (a_eq.rows() && a_eq.cols() != c.size()))
            throw std::invalid_argument("LpProblem: equality block shape mismatch");
        if (a_in.rows() != b_in.size() || (a_in.rows() && a_in.cols() != c.size()))
            throw std::invalid_argument("LpProblem: inequality block shape mismatch");
        for (double v : c)
            if (!std::isfinite(v)) throw std::invalid_argument("LpProblem: non-finite objective");
    }
};

inline Residuals evaluate_lp_residuals(const LpProblem& p, const Vec& x) {
    Residuals r;
    if (p.a_eq.rows()) {
        Vec ax = p.a_eq * x;
        for (std::size_t i = 0; i < ax.size(); ++i)
            r.equality = std::max(r.equality, std::abs(ax[i] - p.b_eq[i]));
    }
    if (p.a_in.rows()) {
        Vec ax = p.a_in * x;
        for (std::size_t i = 0; i < ax.size(); ++i)
            r.inequality = std::max(r.inequality, std::max(0.0, ax[i] - p.b_in[i]));
    }
    for (double v : x) r.nonnegativity = std::max(r.nonnegativity, std::max(0.0, -v));
    return r;
}

namespace detail {

/// Dense two-phase simplex tableau with Bland's anti-cycling rule.
/// Determinism over speed: entering variable is the lowest eligible index,
/// ratio ties break toward the lowest basic index.
class SimplexTableau {
public:
    static constexpr double kPivotTol = 1e-10;

    SimplexTableau(const Mat& a, const Vec& b, std::size_t num_structural)
        : m_(a.rows()), n_(a.cols()), num_structural_(num_structural) {
        t_ = a;
        rhs_ = b;
        // flip rows to make the right-hand side nonnegative
        for (std::size_t i = 0; i < m_; ++i)
            if (rhs_[i] < 0.0) {
                rhs_[i] = -rhs_[i];
                for (std::size_t j = 0; j < n_; ++j) t_(i, j) = -t_(i, j);
            }
    }

    /// Phase 1: append artificials, minimize their sum. Returns false when
    /// the artificial objective cannot be driven to ~0 (primal infeasible).
    bool phase1() {
        basis_.resize(m_);
        Mat full(m_, n_ + m_);
        for (std::size_t i = 0; i < m_; ++i) {
            for (std::size_t j = 0; j < n_; ++j) full(i, j) = t_(i, j);
            full(i, n_ + i) = 1.0;
            basis_[i] = n_ + i;
        }
        t_ = std::move(full);
        Vec cost(n_ + m_, 0.0);
        for (std::size_t j = n_; j < n_ + m_; ++j) cost[j] = 1.0;
        if (!run(cost)) return false;  // phase-1 LP cannot be unbounded; treat as failure
        double art = 0.0;
        for (std::size_t i = 0; i < m_; ++i)
            if (basis_[i] >= n_) art += rhs_[i];
        if (art > 1e-8) return false;
        drive_out_artificials();
        return true;
    }

    /// Phase 2 on the structural cost vector (padded with zeros for slacks).
    /// Returns false on unboundedness.
    bool phase2(const Vec& structural_cost) {
        Vec cost(t_.cols(), 0.0);
        for (std::size_t j = 0; j < structural_cost.size(); ++j) cost[j] = structural_cost[j];
        // forbid re-entry of artificial columns
        for (std::size_t j = n_; j < t_.cols(); ++j) blocked_.insert(blocked_.end(), j);
        return run(cost);
    }

    Vec solution() const {
        Vec x(num_structural_, 0.0);
        for (std::size_t i = 0; i < m_; ++i)
            if (basis_[i] < num_structural_) x[basis_[i]] = rhs_[i];
        return x;
    }

    bool hit_iteration_cap() const { return hit_cap_; }

private:
    bool is_blocked(std::size_t j) const {
        return std::find(blocked_.begin(), blocked_.end(), j) != blocked_.end();
    }

    void pivot(std::size_t row, std::size_t col) {
        const double pv = t_(row, col);
        for (std::size_t j = 0; j < t_.cols(); ++j) t_(row, j) /= pv;
        rhs_[row] /= pv;
        for (std::size_t i = 0; i < m_; ++i) {
            if (i == row) continue;
            const double f = t_(i, col);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < t_.cols(); ++j) t_(i, j) -= f * t_(row, j);
            rhs_[i] -= f * rhs_[row];
        }
        basis_[row] = col;
    }

    /// Bland-rule simplex on the current tableau. Returns false on
    /// unboundedness; sets hit_cap_ when the iteration cap fires.
    bool run(const Vec& cost) {
        const std::size_t cols = t_.cols();
        const std::size_t cap = 50000 + 1000 * cols;
        for (std::size_t iter = 0; iter < cap; ++iter) {
            // reduced costs: r_j = c_j - c_B' B^{-1} A_j (tableau is already B^{-1}A)
            std::size_t enter = cols;
            for (std::size_t j = 0; j < cols; ++j) {
                if (is_blocked(j)) continue;
                double rj = cost[j];
                for (std::size_t i = 0; i < m_; ++i) rj -= cost[basis_[i]] * t_(i, j);
                if (rj < -kPivotTol) {
                    enter = j;
                    break;  // Bland: lowest index
                }
            }
            if (enter == cols) return true;  // optimal
            std::size_t leave = m_;
            double best_ratio = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < m_; ++i) {
                if (t_(i, enter) > kPivotTol) {
                    const double ratio = rhs_[i] / t_(i, enter);
                    if (ratio < best_ratio - 1e-15 ||
                        (std::abs(ratio - best_ratio) <= 1e-15 &&
                         (leave == m_ || basis_[i] < basis_[leave]))) {
                        best_ratio = ratio;
                        leave = i;
                    }
                }
            }
            if (leave == m_) return false;  // unbounded direction
            pivot(leave, enter);
        }
        hit_cap_ = true;
        return true;
    }

    /// Replace artificials that remain basic at level zero by structural
    /// columns; a row with no eligible pivot is redundant and is zeroed.
    void drive_out_artificials() {
        for (std::size_t i = 0; i < m_; ++i) {
            if (basis_[i] < n_) continue;
            std::size_t col = n_;
            for (std::size_t j = 0; j < n_; ++j)
                if (std::abs(t_(i, j)) > kPivotTol) {
                    col = j;
                    break;
                }
            if (col < n_) {
                pivot(i, col);
            } else {
                for (std::size_t j = 0; j < t_.cols(); ++j) t_(i, j) = 0.0;
                t_(i, basis_[i]) = 1.0;  // keep the artificial, pinned at zero
                rhs_[i] = 0.0;
            }
        }
    }

    std::size_t m_, n_, num_structural_;
    Mat t_;
    Vec rhs_;
    std::vector<std::size_t> basis_;
    std::vector<std::size_t> blocked_;
    bool hit_cap_ = false;
};

}  // namespace detail

/// Two-phase dense simplex. Vertex optimality under Bland's rule certifies
/// the optimum; infeasibility and unboundedness are reported as statuses.
inline Solution solve_lp(const LpProblem& p) {
    p.check_shape();
    const std::size_t n = p.num_vars();
    const std::size_t n_slack = p.a_in.rows();
    Mat a(p.a_eq.rows() + n_slack, n + n_slack);
    Vec b(p.a_eq.rows() + n_slack);
    for (std::size_t i = 0; i < p.a_eq.rows(); ++i) {
        for (std::size_t j = 0; j < n; ++j) a(i, j) = p.a_eq(i, j);
        b[i] = p.b_eq[i];
    }
    for (std::size_t i = 0; i < n_slack; ++i) {
        const std::size_t r = p.a_eq.rows() + i;
        for (std::size_t j = 0; j < n; ++j) a(r, j) = p.a_in(i, j);
        a(r, n + i) = 1.0;
        b[r] = p.b_in[i];
    }

    detail::SimplexTableau tab(a, b, n);
    Solution sol;
    if (!tab.phase1()) {
        sol.status = SolveStatus::Infeasible;
        sol.detail = "phase-1 artificial objective positive: no point satisfies the "
                     "equality/inequality system with x >= 0";
        return sol;
    }
    Vec cost(n + n_slack, 0.0);
    for (std::size_t j = 0; j < n; ++j) cost[j] = p.c[j];
    if (!tab.phase2(cost)) {
        sol.status = SolveStatus::Unbounded;
        sol.x = tab.solution();
        sol.detail = "objective unbounded below on the feasible cone";
        return sol;
    }
    sol.x = tab.solution();
    sol.value = dot(p.c, sol.x);
    sol.residuals = evaluate_lp_residuals(p, sol.x);
    if (tab.hit_iteration_cap()) {
        sol.status = SolveStatus::MaxIterations;
        sol.detail = "simplex iteration cap reached (degenerate basis?)";
        return sol;
    }
    sol.status = (sol.residuals.max() <= 1e-8) ? SolveStatus::Optimal : SolveStatus::MaxIterations;
    if (sol.status != SolveStatus::Optimal)
        sol.detail = "returned vertex violates constraints beyond tolerance";
    return sol;
}

}  // namespace sdmc::optim
