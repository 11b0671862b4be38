#pragma once

#include <string>

#include "sdmc/matrix.hpp"

namespace sdmc::optim {

enum class SolveStatus {
    Optimal,
    FeasibleLocal,
    Infeasible,
    InfeasibleFromStarts,
    InfeasibleAtResolution,
    Unbounded,
    MaxIterations,
};

inline std::string to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::FeasibleLocal: return "feasible-local";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::InfeasibleFromStarts: return "infeasible-from-starts";
        case SolveStatus::InfeasibleAtResolution: return "infeasible-at-resolution";
        case SolveStatus::Unbounded: return "unbounded";
        case SolveStatus::MaxIterations: return "max-iter";
    }
    return "unknown";
}

/// Worst-case constraint violations of a returned point, recomputed from the
/// problem data by an evaluator independent of the solver internals.
struct Residuals {
    double equality = 0.0;
    double inequality = 0.0;
    double nonnegativity = 0.0;

    double max() const { return std::max(equality, std::max(inequality, nonnegativity)); }
};

struct Solution {
    Vec x;
    double value = 0.0;
    SolveStatus status = SolveStatus::Infeasible;
    Residuals residuals;
    std::string detail;  ///< diagnostic text (violated constraint set, etc.)

    bool feasible() const {
        return status == SolveStatus::Optimal || status == SolveStatus::FeasibleLocal;
    }
};

}  // namespace sdmc::optim
