#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "sdmc/optim/problem_view.hpp"

namespace sdmc::optim {

/// Brute-force polytope grid search. Eliminates the equality block by
/// Gauss-Jordan (pivot columns chosen lowest-index-first), grids the free
/// coordinates over [0, 1] at the given resolution, back-substitutes the
/// dependent coordinates, filters by nonnegativity and every inequality at
/// tolerance 1e-9, and returns the best feasible grid point. Deterministic;
/// ties break toward the lexicographically smaller point. Intended as an
/// independent reference, not a fast solver.
inline Solution grid_oracle(const ProblemView& p, double resolution) {
    if (!(resolution > 0.0 && resolution <= 0.5))
        throw std::invalid_argument("grid_oracle: resolution must lie in (0, 0.5]");
    const std::size_t n = p.num_vars();
    const double tol = 1e-9;

    // Gauss-Jordan on [A | b]
    Mat a = p.a_eq;
    Vec b = p.b_eq;
    const std::size_t m = a.rows();
    std::vector<std::size_t> pivot_col;
    std::size_t row = 0;
    for (std::size_t col = 0; col < n && row < m; ++col) {
        std::size_t best = row;
        for (std::size_t i = row; i < m; ++i)
            if (std::abs(a(i, col)) > std::abs(a(best, col))) best = i;
        if (std::abs(a(best, col)) < 1e-10) continue;
        if (best != row) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(row, j), a(best, j));
            std::swap(b[row], b[best]);
        }
        const double pv = a(row, col);
        for (std::size_t j = 0; j < n; ++j) a(row, j) /= pv;
        b[row] /= pv;
        for (std::size_t i = 0; i < m; ++i) {
            if (i == row) continue;
            const double f = a(i, col);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) a(i, j) -= f * a(row, j);
            b[i] -= f * b[row];
        }
        pivot_col.push_back(col);
        ++row;
    }
    Solution sol;
    for (std::size_t i = row; i < m; ++i)
        if (std::abs(b[i]) > 1e-9) {
            sol.status = SolveStatus::Infeasible;
            sol.detail = "equality system inconsistent";
            return sol;
        }
    std::vector<std::size_t> free_col;
    {
        std::vector<bool> is_pivot(n, false);
        for (std::size_t c : pivot_col) is_pivot[c] = true;
        for (std::size_t c = 0; c < n; ++c)
            if (!is_pivot[c]) free_col.push_back(c);
    }
    if (free_col.size() > 10)
        throw std::invalid_argument("grid_oracle: more than 10 free variables after elimination");

    // prune partial sums only when a normalization row (sum x = 1) is present
    bool has_normalization = false;
    for (std::size_t i = 0; i < p.a_eq.rows(); ++i) {
        bool all_ones = true;
        for (std::size_t j = 0; j < n; ++j)
            if (std::abs(p.a_eq(i, j) - 1.0) > 1e-12) all_ones = false;
        if (all_ones && std::abs(p.b_eq[i] - 1.0) < 1e-12) has_normalization = true;
    }

    std::vector<double> lattice;
    for (double v = 0.0; v < 1.0 + 0.5 * resolution; v += resolution)
        lattice.push_back(std::min(v, 1.0));
    if (lattice.back() < 1.0 - 1e-12) lattice.push_back(1.0);

    Vec x(n, 0.0);
    bool found = false;
    Vec best_x;
    double best_val = 0.0;

    // depth-first enumeration over the free coordinates
    std::vector<std::size_t> idx(free_col.size(), 0);
    std::size_t depth = 0;
    while (true) {
        if (depth == free_col.size()) {
            // back-substitute dependents
            bool ok = true;
            for (std::size_t r2 = 0; r2 < pivot_col.size(); ++r2) {
                double val = b[r2];
                for (std::size_t fc = 0; fc < free_col.size(); ++fc)
                    val -= a(r2, free_col[fc]) * x[free_col[fc]];
                x[pivot_col[r2]] = val;
                if (val < -tol) {
                    ok = false;
                    break;
                }
            }
            if (ok && p.max_ineq_violation(x) <= tol) {
                const double val = dot(p.c, x);
                bool better = !found || val < best_val - 1e-15;
                if (found && std::abs(val - best_val) <= 1e-15)
                    better = std::lexicographical_compare(x.begin(), x.end(), best_x.begin(),
                                                          best_x.end());
                if (better) {
                    best_val = val;
                    best_x = x;
                    found = true;
                }
            }
            // step to next assignment
            if (free_col.empty()) break;
            --depth;
            ++idx[depth];
        } else if (idx[depth] >= lattice.size()) {
            if (depth == 0) break;
            idx[depth] = 0;
            x[free_col[depth]] = 0.0;
            --depth;
            ++idx[depth];
        } else {
            x[free_col[depth]] = lattice[idx[depth]];
            if (has_normalization) {
                double partial = 0.0;
                for (std::size_t d = 0; d <= depth; ++d) partial += x[free_col[d]];
                if (partial > 1.0 + tol) {
                    // lattice ascending: no later value at this depth fits either
                    idx[depth] = lattice.size();
                    continue;
                }
            }
            ++depth;
            if (depth < free_col.size()) idx[depth] = 0;
        }
    }

    if (!found) {
        sol.status = SolveStatus::InfeasibleAtResolution;
        sol.detail = "no feasible grid point at resolution " + std::to_string(resolution);
        return sol;
    }
    sol.x = best_x;
    sol.value = best_val;
    sol.status = SolveStatus::FeasibleLocal;
    sol.residuals = p.residuals(best_x);
    return sol;
}

}  // namespace sdmc::optim
