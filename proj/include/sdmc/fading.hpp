#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdmc/channel.hpp"

namespace sdmc {

/// Physical description of a Rayleigh-faded link whose received SNR is
/// exponential with mean p * phi(s) / (N0 * B). Level crossings of the SNR
/// thresholds generate a tridiagonal rate chain per (s, p) pair.
struct FadingSpec {
    Vec power_values;                     ///< ascending transmission powers (W)
    std::vector<std::string> power_names;
    std::vector<std::string> env_states;
    Vec shadowing;                        ///< phi(s) in [0, 1], one per env state
    Vec rates;                            ///< ascending data rates, one per SNR interval
    Vec snr_thresholds;                   ///< Gamma_1 < ... < Gamma_{M_R+1}; last may be +inf
    double noise_density = 0.0;           ///< N0 (W/Hz)
    double bandwidth = 0.0;               ///< B (Hz)
    double doppler = 0.0;                 ///< f_D (Hz)
    double packet_period = 0.0;           ///< T_p (s)

    double avg_snr(std::size_t s, std::size_t p) const {
        return power_values[p] * shadowing[s] / (noise_density * bandwidth);
    }
};

inline ValidationReport validate_fading(const FadingSpec& spec) {
    ValidationReport rep;
    if (spec.rates.size() + 1 != spec.snr_thresholds.size())
        rep.add("fading: need exactly one more SNR threshold than rates");
    for (std::size_t i = 0; i + 1 < spec.snr_thresholds.size(); ++i)
        if (!(spec.snr_thresholds[i] < spec.snr_thresholds[i + 1]))
            rep.add("fading: SNR thresholds not strictly ascending at index " + std::to_string(i));
    if (!spec.snr_thresholds.empty() && spec.snr_thresholds.front() < 0.0)
        rep.add("fading: first SNR threshold negative");
    for (std::size_t s = 0; s < spec.shadowing.size(); ++s)
        if (spec.shadowing[s] < 0.0 || spec.shadowing[s] > 1.0)
            rep.add("fading: shadowing factor out of [0,1] for state " + spec.env_states[s]);
    if (spec.shadowing.size() != spec.env_states.size())
        rep.add("fading: one shadowing factor per environment state required");
    if (!(spec.noise_density * spec.bandwidth > 0.0)) rep.add("fading: N0 * B must be positive");
    if (!(spec.doppler > 0.0)) rep.add("fading: Doppler frequency must be positive");
    if (!(spec.packet_period > 0.0)) rep.add("fading: packet period must be positive");
    for (std::size_t i = 0; i + 1 < spec.rates.size(); ++i)
        if (!(spec.rates[i] < spec.rates[i + 1]))
            rep.add("fading: rates not strictly ascending at index " + std::to_string(i));
    return rep;
}

namespace detail {

/// Level-crossing rate of the threshold gamma at mean SNR gbar; zero at the
/// +inf sentinel and at gamma = 0 (no crossings below the floor).
inline double crossing_rate(double gamma, double gbar, double doppler) {
    if (!std::isfinite(gamma)) return 0.0;
    return std::sqrt(2.0 * M_PI * gamma / gbar) * doppler * std::exp(-gamma / gbar);
}

inline double interval_mass(double lo, double hi, double gbar) {
    const double a = std::isfinite(lo) ? std::exp(-lo / gbar) : 0.0;
    const double b = std::isfinite(hi) ? std::exp(-hi / gbar) : 0.0;
    return a - b;
}

}  // namespace detail

/// Builds the tridiagonal SD-MC from the level-crossing approximation. Rows
/// with a negative diagonal or a hop probability above one indicate the
/// packet period is too long for the fading speed; that is a hard model
/// error, not something to clamp.
inline SdMcChannel channel_from_fading(const FadingSpec& spec) {
    ValidationReport rep = validate_fading(spec);
    if (!rep.ok()) throw std::invalid_argument("channel_from_fading: invalid spec:\n" + rep.to_string());

    SdMcChannel ch = SdMcChannel::zeros(spec.rates, spec.env_states, spec.power_names,
                                        spec.power_values);
    const std::size_t nr = spec.rates.size();
    for (std::size_t s = 0; s < ch.num_states(); ++s)
        for (std::size_t p = 0; p < ch.num_powers(); ++p) {
            const double gbar = spec.avg_snr(s, p);
            if (!(gbar > 0.0))
                throw std::invalid_argument("channel_from_fading: nonpositive mean SNR at (s=" +
                                            spec.env_states[s] + ", p=" + spec.power_names[p] + ")");
            for (std::size_t i = 0; i < nr; ++i) {
                const double pi_i =
                    detail::interval_mass(spec.snr_thresholds[i], spec.snr_thresholds[i + 1], gbar);
                if (!(pi_i > 0.0))
                    throw std::invalid_argument(
                        "channel_from_fading: empty SNR interval " + std::to_string(i) + " at (s=" +
                        spec.env_states[s] + ", p=" + spec.power_names[p] + ")");
                double up = 0.0, down = 0.0;
                if (i + 1 < nr)
                    up = detail::crossing_rate(spec.snr_thresholds[i + 1], gbar, spec.doppler) *
                         spec.packet_period / pi_i;
                if (i > 0)
                    down = detail::crossing_rate(spec.snr_thresholds[i], gbar, spec.doppler) *
                           spec.packet_period / pi_i;
                const double stay = 1.0 - up - down;
                if (up > 1.0 || down > 1.0 || stay < 0.0)
                    throw std::runtime_error(
                        "channel_from_fading: approximation out of range at (s=" +
                        spec.env_states[s] + ", p=" + spec.power_names[p] + ", interval=" +
                        std::to_string(i) + "): stay=" + std::to_string(stay) +
                        " — packet period too large for the fading speed");
                if (i + 1 < nr) ch.prob(i + 1, i, s, p) = up;
                if (i > 0) ch.prob(i - 1, i, s, p) = down;
                ch.prob(i, i, s, p) = stay;
            }
        }
    return ch;
}

}  // namespace sdmc
