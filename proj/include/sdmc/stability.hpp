#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

#include "sdmc/channel.hpp"
#include "sdmc/matrix.hpp"

namespace sdmc {

/// Error-growth and contraction constants feeding the MATI formulas. The
/// quadratic-bound constants are bookkeeping for the almost-sure stability
/// checklist; the toolkit cannot verify them for an arbitrary plant and the
/// outputs say so.
struct StabilityParams {
    double growth_rate = 0.0;  ///< L >= 0 (1/s)
    double coupling = 0.0;     ///< zeta > 0 (1/s)
    Vec lambdas;               ///< per-rate jump contraction factors, one per data rate

    struct QuadraticBounds {
        double alpha_w_lower = 0.0, alpha_w_upper = 0.0;
        double alpha_v_lower = 0.0, alpha_v_upper = 0.0;
        double rho = 0.0;
    };
    std::optional<QuadraticBounds> quadratic_bounds;  ///< asserted, never derived here

    void check(std::size_t num_rates) const {
        if (growth_rate < 0.0) throw std::invalid_argument("StabilityParams: L must be >= 0");
        if (!(coupling > 0.0)) throw std::invalid_argument("StabilityParams: zeta must be > 0");
        if (lambdas.size() != num_rates)
            throw std::invalid_argument("StabilityParams: need one lambda per data rate (" +
                                        std::to_string(num_rates) + " rates, " +
                                        std::to_string(lambdas.size()) + " lambdas)");
        for (double l : lambdas)
            if (!(l > 0.0)) throw std::invalid_argument("StabilityParams: lambdas must be positive");
    }
};

namespace detail {

inline Mat lambda_weighted(const StabilityParams& params, const RateMatrix& chain) {
    if (chain.rows() != params.lambdas.size() || chain.cols() != params.lambdas.size())
        throw std::invalid_argument("lambda threshold: rate chain dimension mismatch");
    Mat m = chain;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            m(i, j) *= params.lambdas[i] * params.lambdas[i];
    return m;
}

}  // namespace detail

/// sqrt of the max-row-sum norm of diag(lambda_i^2) * P-bar. Any contraction
/// parameter strictly above this value is admissible for the MATI bound.
inline double lambda_bar_threshold_inf(const StabilityParams& params, const RateMatrix& chain) {
    return std::sqrt(infinity_norm(detail::lambda_weighted(params, chain)));
}

/// 1-norm variant: sqrt(M_R * max-column-sum). Always >= the inf-norm
/// threshold; buying this extra conservatism makes the co-design constraints
/// linear.
inline double lambda_bar_threshold_one(const StabilityParams& params, const RateMatrix& chain) {
    return std::sqrt(static_cast<double>(chain.rows()) *
                     one_norm(detail::lambda_weighted(params, chain)));
}

/// Closed-form maximum allowable transmission interval. Three branches keyed
/// on zeta vs L; the branch test uses relative tolerance 1e-12 to avoid
/// chatter under floating-point inputs.
inline double mati_bound(const StabilityParams& params, double lambda_bar) {
    const double L = params.growth_rate, zeta = params.coupling;
    if (!(lambda_bar > 0.0) || !(lambda_bar < 1.0))
        throw std::invalid_argument("mati_bound: lambda_bar must lie in (0, 1); at or above 1 no "
                                    "positive MATI exists");
    if (!(zeta > 0.0)) throw std::invalid_argument("mati_bound: zeta must be positive");
    if (L < 0.0) throw std::invalid_argument("mati_bound: L must be >= 0");
    if (std::abs(zeta - L) <= 1e-12 * std::max(zeta, L))
        return (1.0 / L) * (1.0 - lambda_bar) / (1.0 + lambda_bar);
    const double ratio = zeta / L;
    const double eta = std::sqrt(std::abs(ratio * ratio - 1.0));
    const double arg = eta * (1.0 - lambda_bar) /
                       (2.0 * (lambda_bar / (1.0 + lambda_bar)) * (ratio - 1.0) + 1.0 + lambda_bar);
    if (zeta > L) return std::atan(arg) / (L * eta);
    return std::atanh(arg) / (L * eta);
}

/// Independent oracle for mati_bound: integrates
///     phi' = -2 L phi - zeta (phi^2 + 1),   phi(0) = 1 / lambda_bar
/// with fixed-step RK4 and returns the first time phi crosses lambda_bar
/// (linear interpolation inside the crossing step).
inline double mati_via_phi_ode(const StabilityParams& params, double lambda_bar, double step,
                               double horizon = 10.0) {
    const double L = params.growth_rate, zeta = params.coupling;
    if (!(lambda_bar > 0.0) || !(lambda_bar < 1.0))
        throw std::invalid_argument("mati_via_phi_ode: lambda_bar must lie in (0, 1)");
    if (!(step > 0.0)) throw std::invalid_argument("mati_via_phi_ode: step must be positive");
    auto f = [L, zeta](double phi) { return -2.0 * L * phi - zeta * (phi * phi + 1.0); };
    double phi = 1.0 / lambda_bar;
    double t = 0.0;
    while (t < horizon) {
        const double k1 = f(phi);
        const double k2 = f(phi + 0.5 * step * k1);
        const double k3 = f(phi + 0.5 * step * k2);
        const double k4 = f(phi + step * k3);
        const double next = phi + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (next <= lambda_bar)
            return t + step * (phi - lambda_bar) / (phi - next);
        phi = next;
        t += step;
    }
    throw std::runtime_error("mati_via_phi_ode: threshold not reached within horizon " +
                             std::to_string(horizon) + " s (parameter inconsistency?)");
}

}  // namespace sdmc
