#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "sdmc/codesign.hpp"
#include "sdmc/environment.hpp"
#include "sdmc/io.hpp"

namespace sdmc {

struct SweepRow {
    double fading_level = 0.0;
    double cost_codesign_qcqp = std::numeric_limits<double>::infinity();
    double cost_codesign_lp = std::numeric_limits<double>::infinity();
    double cost_separation = std::numeric_limits<double>::infinity();
    double p_low_given_r0 = std::numeric_limits<double>::quiet_NaN();
    double p_low_given_r2 = std::numeric_limits<double>::quiet_NaN();
    double p_stay_given_s1 = std::numeric_limits<double>::quiet_NaN();
    double p_stay_given_s2 = std::numeric_limits<double>::quiet_NaN();
    bool feasible = false;
    std::string route;
};

/// Two-rate channel with the shadow-fading knob applied: the probability of
/// staying at the low rate under (state s, power p) becomes `level`.
inline SdMcChannel apply_fading_level(SdMcChannel ch, double level, std::size_t s, std::size_t p) {
    if (ch.num_rates() != 2)
        throw std::invalid_argument("apply_fading_level: two-rate channel required");
    if (!(level >= 0.0 && level <= 1.0))
        throw std::invalid_argument("apply_fading_level: level must lie in [0, 1]");
    ch.prob(0, 0, s, p) = level;
    ch.prob(1, 0, s, p) = 1.0 - level;
    return ch;
}

/// One grid point of the shadow-fading sweep: the co-design quadratic route
/// (gate-dispatched), its LP relaxation, the separation baseline, and the
/// policies realized from the co-design measure (power conditionals plus the
/// Theorem-6 control policy hitting the co-design environment marginal).
inline SweepRow sweep_point(const SdMcChannel& base, const EnvMdp& mdp, const CostModel& costs,
                            const StabilityParams& params, double lambda_bar, double level,
                            std::size_t fade_state, std::size_t fade_power,
                            std::size_t stay_action, BoundForm lp_form) {
    SweepRow row;
    row.fading_level = level;
    const SdMcChannel ch = apply_fading_level(base, level, fade_state, fade_power);
    CodesignResult cd = solve_codesign(ch, costs, params, lambda_bar, lp_form);
    row.route = cd.route;
    row.feasible = cd.solution.feasible();
    if (row.feasible) {
        row.cost_codesign_qcqp = cd.cost;
        row.p_low_given_r0 = cd.policies.power.given[0][0];
        row.p_low_given_r2 = cd.policies.power.given[1][0];
        ControlLpResult ctrl = solve_control_lp(mdp, cd.policies.env_marginal);
        if (ctrl.status == optim::SolveStatus::Optimal) {
            row.p_stay_given_s1 = ctrl.policy.given[0][stay_action];
            row.p_stay_given_s2 = ctrl.policy.given[1][stay_action];
        }
    }
    if (cd.lp_relaxation.status == optim::SolveStatus::Optimal)
        row.cost_codesign_lp = cd.lp_relaxation.value;
    SeparationResult sep = separation_baseline(ch, mdp, costs, params, lambda_bar);
    if (sep.feasible) row.cost_separation = sep.joint_cost;
    return row;
}

inline std::vector<SweepRow> sweep_fading(const SdMcChannel& base, const EnvMdp& mdp,
                                          const CostModel& costs, const StabilityParams& params,
                                          double lambda_bar, double from, double to, double step,
                                          std::size_t fade_state = 0, std::size_t fade_power = 1,
                                          std::size_t stay_action = 0,
                                          BoundForm lp_form = BoundForm::Proof) {
    if (!(step > 0.0)) throw std::invalid_argument("sweep_fading: step must be positive");
    std::vector<double> levels;
    for (double x = from; x <= to + 0.5 * step; x += step) levels.push_back(std::min(x, to));
    std::vector<SweepRow> rows(levels.size());
    const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    const std::size_t workers = std::min(hw, levels.size());
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            rows[i] = sweep_point(base, mdp, costs, params, lambda_bar, levels[i], fade_state,
                                  fade_power, stay_action, lp_form);
    };
    if (workers <= 1) {
        work(0, levels.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (levels.size() + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t b = w * chunk, e = std::min(levels.size(), b + chunk);
            if (b < e) pool.emplace_back(work, b, e);
        }
        for (auto& th : pool) th.join();
    }
    return rows;
}

inline CsvTable sweep_csv(const std::vector<SweepRow>& rows) {
    CsvTable t;
    t.header = {"fading_level",   "cost_codesign_qcqp", "cost_codesign_lp",
                "cost_separation", "p_low_given_r0",     "p_low_given_r2",
                "p_stay_given_s1", "p_stay_given_s2",    "feasible_flag"};
    for (const SweepRow& r : rows)
        t.rows.push_back({format_number(r.fading_level), format_number(r.cost_codesign_qcqp),
                          format_number(r.cost_codesign_lp), format_number(r.cost_separation),
                          format_number(r.p_low_given_r0), format_number(r.p_low_given_r2),
                          format_number(r.p_stay_given_s1), format_number(r.p_stay_given_s2),
                          r.feasible ? "1" : "0"});
    return t;
}

}  // namespace sdmc
