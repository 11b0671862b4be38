#pragma once

#include <functional>
#include <vector>

#include "sdmc/matrix.hpp"
#include "sdmc/optim/lp.hpp"
#include "sdmc/optim/solution.hpp"

namespace sdmc::optim {

/// Uniform view of "min c'x s.t. Aeq x = beq, g_k(x) <= 0, x >= 0" consumed
/// by the grid oracle and the local solver. LP / QCQP / CPOP problems all
/// lower to this.
struct ProblemView {
    Vec c;
    Mat a_eq;
    Vec b_eq;
    std::vector<std::function<double(const Vec&)>> ineq;
    std::vector<std::function<Vec(const Vec&)>> ineq_grad;  ///< may be empty (grid use only)

    std::size_t num_vars() const { return c.size(); }

    double max_ineq_violation(const Vec& x) const {
        double worst = 0.0;
        for (const auto& g : ineq) worst = std::max(worst, g(x));
        return worst;
    }

    Residuals residuals(const Vec& x) const {
        Residuals r;
        if (a_eq.rows()) {
            Vec ax = a_eq * x;
            for (std::size_t i = 0; i < ax.size(); ++i)
                r.equality = std::max(r.equality, std::abs(ax[i] - b_eq[i]));
        }
        r.inequality = std::max(0.0, max_ineq_violation(x));
        for (double v : x) r.nonnegativity = std::max(r.nonnegativity, std::max(0.0, -v));
        return r;
    }
};

inline ProblemView to_view(const LpProblem& p) {
    p.check_shape();
    ProblemView v;
    v.c = p.c;
    v.a_eq = p.a_eq;
    v.b_eq = p.b_eq;
    for (std::size_t i = 0; i < p.a_in.rows(); ++i) {
        Vec row(p.a_in.cols());
        for (std::size_t j = 0; j < p.a_in.cols(); ++j) row[j] = p.a_in(i, j);
        const double rhs = p.b_in[i];
        v.ineq.push_back([row, rhs](const Vec& x) { return dot(row, x) - rhs; });
        v.ineq_grad.push_back([row](const Vec&) { return row; });
    }
    return v;
}

}  // namespace sdmc::optim
