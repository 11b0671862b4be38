#pragma once

#include <cmath>
#include <cstddef>

#include "sdmc/sim/plant.hpp"

namespace sdmc {

/// Box quantizer transmission with R bits per dimension: each axis of the
/// box [xhat - xi, xhat + xi] splits into 2^R equal cells, the estimate
/// moves to the center of the cell holding x, and the box shrinks by 2^R.
/// R = 0 leaves the state untouched. A state found outside the box (escape)
/// first zooms the box out to 2 * max(|e|_inf, xi) and is counted; the
/// containment |x - xhat'|_inf <= xi' then holds again after quantization.
inline HybridState quantizer_jump(HybridState state, unsigned bits) {
    if (bits == 0) return state;
    const std::size_t n = state.x.size();
    double einf = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        einf = std::max(einf, std::abs(state.x[i] - state.xhat[i]));
    if (einf == 0.0 && state.xi == 0.0) return state;  // exact estimate, nothing to send
    if (einf > state.xi) {
        state.xi = 2.0 * std::max(einf, state.xi);
        ++state.escapes;
    }
    if (state.xi < 1e-300) {  // box at fp-noise scale: cell width would underflow
        state.xi = 0.0;
        return state;
    }
    const double cells = std::pow(2.0, static_cast<double>(bits));
    const double width = 2.0 * state.xi / cells;
    for (std::size_t i = 0; i < n; ++i) {
        const double lo = state.xhat[i] - state.xi;
        double idx = std::floor((state.x[i] - lo) / width);
        idx = std::min(std::max(idx, 0.0), cells - 1.0);
        state.xhat[i] = lo + (idx + 0.5) * width;
    }
    state.xi /= cells;
    return state;
}

}  // namespace sdmc
