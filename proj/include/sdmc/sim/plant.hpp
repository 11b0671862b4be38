#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "sdmc/matrix.hpp"

namespace sdmc {

/// LTI plant with a model-based remote controller: between transmissions
///   x'    = A x + B K xhat
///   xhat' = (A + B K) xhat
///   xi'   = |A| xi          (|A| = induced infinity norm)
/// so the estimation error obeys e' = A e regardless of K.
struct PlantConfig {
    Mat a;      ///< n x n
    Mat b;      ///< n x m
    Mat k;      ///< m x n feedback gain
    Vec x0;
    Vec xhat0;
    double xi0 = 0.0;

    std::size_t dim() const { return x0.size(); }

    void check() const {
        const std::size_t n = a.rows();
        if (a.cols() != n) throw std::invalid_argument("PlantConfig: A must be square");
        if (b.rows() != n) throw std::invalid_argument("PlantConfig: B row count mismatch");
        if (k.rows() != b.cols() || k.cols() != n)
            throw std::invalid_argument("PlantConfig: K must be m x n for B n x m");
        if (x0.size() != n || xhat0.size() != n)
            throw std::invalid_argument("PlantConfig: initial state dimension mismatch");
        if (!(xi0 > 0.0)) throw std::invalid_argument("PlantConfig: xi0 must be positive");
    }

    double box_growth_rate() const { return infinity_norm(a); }
};

struct HybridState {
    double t = 0.0;
    Vec x;
    Vec xhat;
    double xi = 0.0;
    std::size_t rate = 0;       ///< current rate index
    std::size_t env_state = 0;
    std::size_t power = 0;
    double cum_cost = 0.0;
    std::size_t escapes = 0;    ///< quantizer zoom-out events
    bool diverged = false;
    double blow_time = 0.0;

    Vec error() const {
        Vec e(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) e[i] = x[i] - xhat[i];
        return e;
    }
    double x_norm() const { return infinity_norm(x); }
    double e_norm() const { return infinity_norm(error()); }
};

/// Fixed-step RK4 over [t, t+T); the final partial step is shortened. Sets
/// the diverged flag (with the blow-up time) when the state stops being
/// finite. States entirely below 1e-250 are flushed to exact zero to keep
/// long runs out of denormal arithmetic.
inline HybridState step_continuous(HybridState state, const PlantConfig& plant, double T,
                                   double dt) {
    if (!(dt > 0.0) || dt > T + 1e-18)
        throw std::invalid_argument("step_continuous: need 0 < dt <= T");
    const std::size_t n = plant.dim();
    const double g = plant.box_growth_rate();
    Mat bk = plant.b * plant.k;

    auto deriv = [&](const Vec& x, const Vec& xh, Vec& dx, Vec& dxh) {
        Vec u = bk * xh;
        Vec ax = plant.a * x;
        Vec axh = plant.a * xh;
        for (std::size_t i = 0; i < n; ++i) {
            dx[i] = ax[i] + u[i];
            dxh[i] = axh[i] + u[i];
        }
    };

    double remaining = T;
    Vec k1x(n), k1h(n), k2x(n), k2h(n), k3x(n), k3h(n), k4x(n), k4h(n), tx(n), th(n);
    while (remaining > 1e-15) {
        const double h = std::min(dt, remaining);
        deriv(state.x, state.xhat, k1x, k1h);
        for (std::size_t i = 0; i < n; ++i) {
            tx[i] = state.x[i] + 0.5 * h * k1x[i];
            th[i] = state.xhat[i] + 0.5 * h * k1h[i];
        }
        deriv(tx, th, k2x, k2h);
        for (std::size_t i = 0; i < n; ++i) {
            tx[i] = state.x[i] + 0.5 * h * k2x[i];
            th[i] = state.xhat[i] + 0.5 * h * k2h[i];
        }
        deriv(tx, th, k3x, k3h);
        for (std::size_t i = 0; i < n; ++i) {
            tx[i] = state.x[i] + h * k3x[i];
            th[i] = state.xhat[i] + h * k3h[i];
        }
        deriv(tx, th, k4x, k4h);
        for (std::size_t i = 0; i < n; ++i) {
            state.x[i] += h / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
            state.xhat[i] += h / 6.0 * (k1h[i] + 2.0 * k2h[i] + 2.0 * k3h[i] + k4h[i]);
        }
        // exact per-substep growth of the box (the xi ODE is scalar linear)
        const double hg = h * g;
        state.xi *= 1.0 + hg + hg * hg / 2.0 + hg * hg * hg / 6.0 + hg * hg * hg * hg / 24.0;
        state.t += h;
        remaining -= h;
        for (std::size_t i = 0; i < n; ++i)
            if (!std::isfinite(state.x[i]) || !std::isfinite(state.xhat[i])) {
                if (!state.diverged) {
                    state.diverged = true;
                    state.blow_time = state.t;
                }
                return state;
            }
    }
    double mag = state.xi;
    for (std::size_t i = 0; i < n; ++i)
        mag = std::max(mag, std::max(std::abs(state.x[i]), std::abs(state.xhat[i])));
    if (mag < 1e-250) {
        for (std::size_t i = 0; i < n; ++i) state.x[i] = state.xhat[i] = 0.0;
        state.xi = 0.0;
    }
    return state;
}

}  // namespace sdmc
