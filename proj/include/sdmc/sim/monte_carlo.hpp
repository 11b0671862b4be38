#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "sdmc/sim/trajectory.hpp"

namespace sdmc {

/// Pointwise max/min of |x|_inf across a run set, on a shared time grid.
/// Diverged runs contribute +inf from their blow-up time on.
struct Envelope {
    Vec t;
    Vec max_norm;
    Vec min_norm;
    Vec terminal_norms;   ///< per run
    std::size_t runs = 0;
    std::size_t diverged_runs = 0;
    std::size_t total_escapes = 0;
    double mean_final_cost = 0.0;     ///< average cum_cost at the horizon
    double mean_cost_per_slot = 0.0;  ///< mean_final_cost / transmissions
};

struct MonteCarloInputs {
    PlantConfig plant;
    SdMcChannel channel;
    EnvMdp mdp;
    ControlPolicy env_policy;
    PowerPolicy power_policy;
    SimOptions options;
    const Vec* joint_cost = nullptr;
};

/// Runs `options.runs` independent trajectories (per-run seed =
/// base_seed XOR run index) and aggregates the envelope. Runs execute on a
/// small thread pool; results merge by run index, so the output is
/// independent of scheduling.
inline Envelope monte_carlo(const MonteCarloInputs& in) {
    const SimOptions& opt = in.options;
    if (opt.runs < 1) throw std::invalid_argument("monte_carlo: need at least one run");
    const std::size_t slots = static_cast<std::size_t>(opt.horizon / opt.T + 0.5);
    const std::size_t points = slots / opt.sample_stride + 1;

    std::vector<Vec> norms(opt.runs);
    std::vector<double> finals(opt.runs, 0.0), costs(opt.runs, 0.0);
    std::vector<std::size_t> escapes(opt.runs, 0);
    std::vector<char> diverged(opt.runs, 0);
    std::vector<double> txs(opt.runs, 0.0);

    auto worker = [&](std::size_t begin, std::size_t end) {
        for (std::size_t run = begin; run < end; ++run) {
            SimOptions o = opt;
            o.seed = opt.seed ^ static_cast<std::uint64_t>(run);
            o.sample_stride = 1;  // envelopes aggregate per transmission instant
            Trajectory tr = run_trajectory(in.plant, in.channel, in.mdp, in.env_policy,
                                           in.power_policy, o, in.joint_cost);
            Vec& row = norms[run];
            row.assign(points, std::numeric_limits<double>::infinity());
            for (std::size_t i = 0; i < tr.t.size() && i < points; ++i) row[i] = tr.x_norm[i];
            if (tr.diverged) {
                diverged[run] = 1;
                // +inf from the blow-up point on (already inf past the recorded prefix)
                for (std::size_t i = 0; i < points; ++i)
                    if (i < tr.t.size() && tr.t[i] >= tr.blow_time)
                        row[i] = std::numeric_limits<double>::infinity();
            }
            finals[run] = row[points - 1];
            costs[run] = tr.cum_cost.empty() ? 0.0 : tr.cum_cost.back();
            escapes[run] = tr.escapes;
            txs[run] = static_cast<double>(tr.transmissions);
        }
    };

    const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    const std::size_t workers = std::min<std::size_t>(hw, opt.runs);
    if (workers <= 1) {
        worker(0, opt.runs);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (opt.runs + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t b = w * chunk, e = std::min(opt.runs, b + chunk);
            if (b < e) pool.emplace_back(worker, b, e);
        }
        for (auto& th : pool) th.join();
    }

    Envelope env;
    env.runs = opt.runs;
    env.t.resize(points);
    for (std::size_t i = 0; i < points; ++i) env.t[i] = static_cast<double>(i) * opt.T;
    env.max_norm.assign(points, 0.0);
    env.min_norm.assign(points, std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < points; ++i)
        for (std::size_t run = 0; run < opt.runs; ++run) {
            env.max_norm[i] = std::max(env.max_norm[i], norms[run][i]);
            env.min_norm[i] = std::min(env.min_norm[i], norms[run][i]);
        }
    env.terminal_norms = Vec(finals.begin(), finals.end());
    for (std::size_t run = 0; run < opt.runs; ++run) {
        env.diverged_runs += diverged[run];
        env.total_escapes += escapes[run];
        env.mean_final_cost += costs[run];
    }
    env.mean_final_cost /= static_cast<double>(opt.runs);
    const double mean_tx = std::accumulate(txs.begin(), txs.end(), 0.0) /
                           static_cast<double>(opt.runs);
    env.mean_cost_per_slot = mean_tx > 0.0 ? env.mean_final_cost / mean_tx : 0.0;
    return env;
}

struct AsasVerdict {
    bool consistent = false;
    std::optional<double> first_violation;  ///< earliest offending time in the tail

    std::string to_string() const {
        return consistent ? "consistent-with-ASAS"
                          : "violation-witnessed at t=" +
                                std::to_string(first_violation.value_or(-1.0));
    }
};

/// Falsification check, not a proof: consistent iff the max envelope stays
/// below epsilon over the final tail window (terminal point included).
inline AsasVerdict empirical_asas_check(const Envelope& env, double epsilon, double tail_window) {
    if (env.t.empty()) throw std::invalid_argument("empirical_asas_check: empty envelope");
    const double start = env.t.back() - tail_window;
    if (start < env.t.front())
        throw std::invalid_argument("empirical_asas_check: tail window exceeds horizon");
    AsasVerdict v;
    v.consistent = true;
    for (std::size_t i = 0; i < env.t.size(); ++i) {
        if (env.t[i] < start) continue;
        if (!(env.max_norm[i] < epsilon)) {
            v.consistent = false;
            v.first_violation = env.t[i];
            break;
        }
    }
    return v;
}

struct MatiSearchResult {
    double largest_stable = 0.0;
    double smallest_unstable = 0.0;   ///< bracketing partner
    bool unstable_endpoint_strict = false;  ///< both envelopes unbounded there
    std::size_t evaluations = 0;
};

/// Bisection for the empirical necessary MATI: largest transmission interval
/// the ASAS falsification check still accepts, on a fixed lattice so results
/// are reproducible. The range must bracket the transition. Instability at
/// the bracketing endpoint is additionally classified strictly (both max and
/// min envelopes unbounded).
inline MatiSearchResult mati_search(MonteCarloInputs in, double t_lo, double t_hi,
                                    double lattice = 0.0025) {
    if (!(t_lo > 0.0) || !(t_hi > t_lo)) throw std::invalid_argument("mati_search: bad range");
    const double x0n = infinity_norm(in.plant.x0);
    auto evaluate = [&](double T) {
        in.options.T = T;
        in.options.dt = 0.0;  // keep dt = T / 100 across the sweep
        Envelope env = monte_carlo(in);
        AsasVerdict v = empirical_asas_check(env, in.options.epsilon, in.options.tail_window);
        const double blow = in.options.divergence_factor * x0n;
        const bool strict = !env.max_norm.empty() && env.max_norm.back() > blow &&
                            env.min_norm.back() > blow;
        return std::make_pair(v.consistent, strict);
    };

    MatiSearchResult out;
    auto lo_eval = evaluate(t_lo);
    ++out.evaluations;
    if (!lo_eval.first)
        throw std::runtime_error("mati_search: lower endpoint " + std::to_string(t_lo) +
                                 " already unstable; no sign change in range");
    auto hi_eval = evaluate(t_hi);
    ++out.evaluations;
    if (hi_eval.first)
        throw std::runtime_error("mati_search: upper endpoint " + std::to_string(t_hi) +
                                 " still stable; no sign change in range");
    double lo = t_lo, hi = t_hi;
    bool hi_strict = hi_eval.second;
    while (hi - lo > lattice + 1e-12) {
        double mid = lattice * std::round(0.5 * (lo + hi) / lattice);
        if (mid <= lo + 1e-15 || mid >= hi - 1e-15) break;
        auto ev = evaluate(mid);
        ++out.evaluations;
        if (ev.first) {
            lo = mid;
        } else {
            hi = mid;
            hi_strict = ev.second;
        }
    }
    out.largest_stable = lo;
    out.smallest_unstable = hi;
    out.unstable_endpoint_strict = hi_strict;
    return out;
}

}  // namespace sdmc
