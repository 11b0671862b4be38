#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>

#include "sdmc/matrix.hpp"

namespace sdmc::optim {

struct EigenDecomposition {
    Vec values;   ///< ascending
    Mat vectors;  ///< column k pairs with values[k]
};

/// Cyclic Jacobi eigen-decomposition for symmetric matrices. Dimensions here
/// stay tiny, so simplicity and robustness beat speed.
inline EigenDecomposition jacobi_eigen(Mat a, std::size_t max_sweeps = 100) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw std::invalid_argument("jacobi_eigen: square matrix required");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(a(i, j) - a(j, i)) > 1e-9 * (1.0 + std::abs(a(i, j))))
                throw std::invalid_argument("jacobi_eigen: matrix not symmetric");
    Mat v = Mat::identity(n);
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (off < 1e-28) break;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
    }
    EigenDecomposition out;
    out.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.values[i] = a(i, i);
    // sort ascending, permuting the vectors accordingly
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return out.values[x] < out.values[y]; });
    Vec sorted(n);
    Mat vec(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        sorted[k] = out.values[order[k]];
        for (std::size_t i = 0; i < n; ++i) vec(i, k) = v(i, order[k]);
    }
    out.values = std::move(sorted);
    out.vectors = std::move(vec);
    return out;
}

/// True iff the smallest eigenvalue is >= -tol.
inline bool is_psd(const Mat& m, double tol = 1e-9) {
    return jacobi_eigen(m).values.front() >= -tol;
}

}  // namespace sdmc::optim
