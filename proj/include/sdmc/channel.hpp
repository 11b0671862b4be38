#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdmc/matrix.hpp"
#include "sdmc/validation.hpp"

namespace sdmc {

/// Column-stochastic rate transition matrix: entry (i, j) is the probability
/// of the next rate being rates[i] given the current rate rates[j].
using RateMatrix = Mat;
using Distribution = Vec;

inline constexpr double kStochasticTol = 1e-9;

/// State-dependent Markov channel: a finite chain over data rates whose
/// transition probabilities depend on an external environment state and the
/// chosen transmission power. Immutable after construction.
struct SdMcChannel {
    Vec rates;                             ///< ascending data rates (bits per sample)
    std::vector<std::string> env_states;   ///< labels for S
    std::vector<std::string> power_names;  ///< labels for the power set
    Vec power_values;                      ///< ascending physical power levels

    /// transitions[((i * M_R + j) * M_s + s) * M_p + p] = P(next = rates[i] |
    /// current = rates[j], env state s, power p). Column-stochastic in i.
    Vec transitions;

    std::size_t num_rates() const { return rates.size(); }
    std::size_t num_states() const { return env_states.size(); }
    std::size_t num_powers() const { return power_names.size(); }

    double prob(std::size_t next, std::size_t cur, std::size_t s, std::size_t p) const {
        return transitions[((next * num_rates() + cur) * num_states() + s) * num_powers() + p];
    }
    double& prob(std::size_t next, std::size_t cur, std::size_t s, std::size_t p) {
        return transitions[((next * num_rates() + cur) * num_states() + s) * num_powers() + p];
    }

    static SdMcChannel zeros(Vec rates, std::vector<std::string> env_states,
                             std::vector<std::string> power_names, Vec power_values = {}) {
        SdMcChannel c;
        c.rates = std::move(rates);
        c.env_states = std::move(env_states);
        c.power_names = std::move(power_names);
        c.power_values = std::move(power_values);
        if (c.power_values.empty())
            for (std::size_t p = 0; p < c.power_names.size(); ++p)
                c.power_values.push_back(static_cast<double>(p + 1));
        c.transitions.assign(c.num_rates() * c.num_rates() * c.num_states() * c.num_powers(), 0.0);
        return c;
    }

    /// The 2D slice for a fixed (s, p): entry (i, j) = prob(i, j, s, p).
    RateMatrix slice(std::size_t s, std::size_t p) const {
        RateMatrix m(num_rates(), num_rates());
        for (std::size_t i = 0; i < num_rates(); ++i)
            for (std::size_t j = 0; j < num_rates(); ++j) m(i, j) = prob(i, j, s, p);
        return m;
    }
};

/// Per-rate distribution over (state, power) pairs: P(s, p | r_j).
struct JointConditional {
    std::size_t num_states = 0;
    std::size_t num_powers = 0;
    /// given[j][s * num_powers + p] = P(s, p | rate j)
    std::vector<Vec> given;

    static JointConditional uniform(std::size_t rates, std::size_t states, std::size_t powers) {
        JointConditional c;
        c.num_states = states;
        c.num_powers = powers;
        c.given.assign(rates, Vec(states * powers, 1.0 / static_cast<double>(states * powers)));
        return c;
    }
};

inline ValidationReport validate_channel(const SdMcChannel& ch) {
    ValidationReport rep;
    if (ch.num_rates() < 1) rep.add("channel: no rates defined");
    if (ch.num_states() < 1) rep.add("channel: no environment states defined");
    if (ch.num_powers() < 1) rep.add("channel: no power levels defined");
    for (std::size_t i = 0; i + 1 < ch.num_rates(); ++i)
        if (!(ch.rates[i] < ch.rates[i + 1]))
            rep.add("channel: rates not strictly ascending at index " + std::to_string(i) +
                    " (" + std::to_string(ch.rates[i]) + " >= " + std::to_string(ch.rates[i + 1]) + ")");
    for (std::size_t p = 0; p + 1 < ch.power_values.size(); ++p)
        if (!(ch.power_values[p] < ch.power_values[p + 1]))
            rep.add("channel: power values not strictly ascending at index " + std::to_string(p));
    if (ch.transitions.size() != ch.num_rates() * ch.num_rates() * ch.num_states() * ch.num_powers()) {
        rep.add("channel: transition tensor size mismatch");
        return rep;
    }
    for (std::size_t j = 0; j < ch.num_rates(); ++j)
        for (std::size_t s = 0; s < ch.num_states(); ++s)
            for (std::size_t p = 0; p < ch.num_powers(); ++p) {
                double colsum = 0.0;
                for (std::size_t i = 0; i < ch.num_rates(); ++i) {
                    const double v = ch.prob(i, j, s, p);
                    if (v < -kStochasticTol || v > 1.0 + kStochasticTol)
                        rep.add("channel: probability out of [0,1] at (next=" + std::to_string(i) +
                                ", cur=" + std::to_string(j) + ", s=" + ch.env_states[s] +
                                ", p=" + ch.power_names[p] + "): " + std::to_string(v));
                    colsum += v;
                }
                if (std::abs(colsum - 1.0) > kStochasticTol)
                    rep.add("channel: non-stochastic slice at (cur=" + std::to_string(j) +
                            ", s=" + ch.env_states[s] + ", p=" + ch.power_names[p] +
                            "): column sums to " + std::to_string(colsum));
            }
    return rep;
}

/// Policy-induced rate chain: P-bar(i, j) = sum_{s,p} P(i|j,s,p) * cond(s,p|j).
inline RateMatrix induced_rate_chain(const SdMcChannel& ch, const JointConditional& cond) {
    const std::size_t nr = ch.num_rates();
    if (cond.given.size() != nr || cond.num_states != ch.num_states() ||
        cond.num_powers != ch.num_powers())
        throw std::invalid_argument("induced_rate_chain: conditional dimensions do not match channel");
    for (std::size_t j = 0; j < nr; ++j) {
        double s = 0.0;
        for (double v : cond.given[j]) {
            if (v < -kStochasticTol)
                throw std::invalid_argument("induced_rate_chain: negative conditional mass for "
                                            "rate " + std::to_string(j));
            s += v;
        }
        if (std::abs(s - 1.0) > kStochasticTol)
            throw std::invalid_argument("induced_rate_chain: conditional for rate " +
                                        std::to_string(j) + " sums to " + std::to_string(s));
    }
    RateMatrix out(nr, nr);
    for (std::size_t j = 0; j < nr; ++j)
        for (std::size_t i = 0; i < nr; ++i) {
            double acc = 0.0;
            for (std::size_t s = 0; s < ch.num_states(); ++s)
                for (std::size_t p = 0; p < ch.num_powers(); ++p)
                    acc += ch.prob(i, j, s, p) * cond.given[j][s * ch.num_powers() + p];
            out(i, j) = acc;
        }
    return out;
}

namespace detail {

/// Number of closed communicating classes of a column-stochastic matrix
/// (edges j -> i where m(i, j) > tol). A unique stationary distribution
/// requires exactly one.
inline std::size_t closed_class_count(const Mat& m, double tol = 1e-14) {
    const std::size_t n = m.rows();
    // reach[a][b]: b reachable from a
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (std::size_t a = 0; a < n; ++a) {
        std::vector<std::size_t> stack{a};
        reach[a][a] = true;
        while (!stack.empty()) {
            const std::size_t cur = stack.back();
            stack.pop_back();
            for (std::size_t i = 0; i < n; ++i)
                if (m(i, cur) > tol && !reach[a][i]) {
                    reach[a][i] = true;
                    stack.push_back(i);
                }
        }
    }
    std::size_t count = 0;
    std::vector<bool> seen(n, false);
    for (std::size_t a = 0; a < n; ++a) {
        if (seen[a]) continue;
        // class of a
        std::vector<std::size_t> cls;
        for (std::size_t b = 0; b < n; ++b)
            if (reach[a][b] && reach[b][a]) cls.push_back(b);
        bool closed = true;
        for (std::size_t b : cls)
            for (std::size_t i = 0; i < n; ++i)
                if (m(i, b) > tol && !(reach[a][i] && reach[i][a])) closed = false;
        for (std::size_t b : cls) seen[b] = true;
        if (closed) ++count;
    }
    return count;
}

}  // namespace detail

/// Stationary distribution of a column-stochastic matrix by power iteration
/// from the uniform start. Throws on reducible chains (non-unique recurrent
/// class) and on non-convergence within the iteration cap.
inline Distribution stationary_distribution(const RateMatrix& m, std::size_t max_iter = 200000,
                                            double residual_tol = 1e-10) {
    const std::size_t n = m.rows();
    if (m.cols() != n) throw std::invalid_argument("stationary_distribution: square matrix required");
    for (std::size_t j = 0; j < n; ++j) {
        double colsum = 0.0;
        for (std::size_t i = 0; i < n; ++i) colsum += m(i, j);
        if (std::abs(colsum - 1.0) > kStochasticTol)
            throw std::invalid_argument("stationary_distribution: column " + std::to_string(j) +
                                        " sums to " + std::to_string(colsum));
    }
    if (detail::closed_class_count(m) != 1)
        throw std::runtime_error("stationary_distribution: non-unique stationary distribution "
                                 "(multiple closed communicating classes)");
    Distribution pi(n, 1.0 / static_cast<double>(n));
    double residual = std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it < max_iter; ++it) {
        Distribution next = m * pi;
        const double total = sum(next);
        for (double& x : next) x /= total;
        residual = 0.0;
        for (std::size_t i = 0; i < n; ++i) residual = std::max(residual, std::abs(next[i] - pi[i]));
        pi = std::move(next);
        if (residual < residual_tol * 0.01) break;
    }
    Distribution check = m * pi;
    double fixed_residual = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        fixed_residual = std::max(fixed_residual, std::abs(check[i] - pi[i]));
    if (fixed_residual > residual_tol)
        throw std::runtime_error("stationary_distribution: power iteration did not converge "
                                 "(fixed-point residual " + std::to_string(fixed_residual) + ")");
    for (double& x : pi) x = std::max(x, 0.0);
    const double total = sum(pi);
    for (double& x : pi) x /= total;
    return pi;
}

}  // namespace sdmc
