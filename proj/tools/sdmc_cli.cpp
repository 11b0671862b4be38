// Command-line front end: config validation, channel estimation, stability
// thresholds, MATI bounds, co-design solves, control LP, closed-loop
// simulation, empirical MATI search, and the shadow-fading sweep.
//
// Exit codes: 0 success, 1 validation failure, 2 solver infeasibility,
// 3 simulation divergence.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sdmc/sdmc.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitDiverged = 3;

struct OutputGuard {
    std::vector<std::string> written;
    bool committed = false;

    ~OutputGuard() {
        if (committed) return;
        for (const auto& p : written) {
            std::error_code ec;
            std::filesystem::remove(p, ec);
        }
    }
    void add(const std::string& p) { written.push_back(p); }
};

std::string out_path(const std::string& dir, const std::string& name) {
    if (dir.empty()) return name;
    std::filesystem::create_directories(dir);
    return (std::filesystem::path(dir) / name).string();
}

sdmc::RateMatrix resolve_rate_chain(const sdmc::Config& cfg, const sdmc::SdMcChannel& ch) {
    if (auto chain = sdmc::load_rate_chain(cfg)) {
        if (chain->rows() != ch.num_rates() || chain->cols() != ch.num_rates())
            throw std::runtime_error("[rate_chain] must be M_R x M_R");
        return *chain;
    }
    if (auto cond = sdmc::load_conditional(cfg, ch)) return sdmc::induced_rate_chain(ch, *cond);
    throw std::runtime_error(
        "no policy-induced rate chain available: add a [rate_chain] matrix or one "
        "[conditional \"<rate>\"] block per rate");
}

sdmc::CostModel resolve_costs(const sdmc::Config& cfg, const sdmc::EnvMdp& mdp,
                              const sdmc::SdMcChannel& ch) {
    return sdmc::load_costs(cfg, mdp, ch);
}

int cmd_validate(const std::string& config_path) {
    sdmc::Config cfg = sdmc::Config::parse_file(config_path);
    bool ok = true;
    sdmc::SdMcChannel ch;
    if (cfg.has("rates")) {
        ch = sdmc::load_channel(cfg);
        sdmc::ValidationReport rep = sdmc::validate_channel(ch);
        if (!rep.ok()) {
            std::cout << "channel: INVALID\n" << rep.to_string();
            ok = false;
        } else {
            std::cout << "channel: ok (" << ch.num_rates() << " rates, " << ch.num_states()
                      << " states, " << ch.num_powers() << " powers)\n";
        }
    }
    if (cfg.has("mdp.states")) {
        sdmc::EnvMdp mdp = sdmc::load_mdp(cfg);
        sdmc::ValidationReport rep = sdmc::validate_mdp(mdp);
        if (!rep.ok()) {
            std::cout << "mdp: INVALID\n" << rep.to_string();
            ok = false;
        } else {
            std::cout << "mdp: ok (" << mdp.num_states() << " states, " << mdp.num_actions()
                      << " actions)\n";
        }
        if (cfg.has("costs")) {
            resolve_costs(cfg, mdp, ch);
            std::cout << "costs: ok\n";
        }
        if (cfg.has("policy.env")) {
            sdmc::load_env_policy(cfg, mdp);
            std::cout << "policy.env: ok\n";
        }
    }
    if (cfg.has("stability")) {
        double lb = 0.0;
        sdmc::StabilityParams sp = sdmc::load_stability(cfg, &lb);
        if (cfg.has("rates")) sp.check(ch.num_rates());
        std::cout << "stability: ok (L=" << sdmc::format_number(sp.growth_rate)
                  << ", zeta=" << sdmc::format_number(sp.coupling) << ")\n";
    }
    if (cfg.has("plant")) {
        sdmc::load_plant(cfg);
        std::cout << "plant: ok\n";
    }
    if (cfg.has("policy.power") && cfg.has("rates")) {
        sdmc::load_power_policy(cfg, ch);
        std::cout << "policy.power: ok\n";
    }
    return ok ? kExitOk : kExitValidation;
}

int cmd_channel_from_fading(const std::string& config_path, const std::string& out_dir) {
    sdmc::Config cfg = sdmc::Config::parse_file(config_path);
    sdmc::SdMcChannel ch = sdmc::load_channel(cfg);  // [fading] route builds the table
    const std::string text = sdmc::channel_to_config(ch);
    std::cout << text;
    if (!out_dir.empty()) {
        OutputGuard guard;
        const std::string p = out_path(out_dir, "channel.cfg");
        std::ofstream f(p, std::ios::trunc);
        f << text;
        guard.add(p);
        guard.committed = true;
        std::cout << "# written to " << p << "\n";
    }
    return kExitOk;
}

int cmd_lambda_bar(const std::string& config_path) {
    sdmc::Config cfg = sdmc::Config::parse_file(config_path);
    sdmc::SdMcChannel ch = sdmc::load_channel(cfg);
    sdmc::StabilityParams sp = sdmc::load_stability(cfg);
    sp.check(ch.num_rates());
    sdmc::RateMatrix chain = resolve_rate_chain(cfg, ch);
    std::cout << "lambda_bar_threshold_inf = "
              << sdmc::format_number(sdmc::lambda_bar_threshold_inf(sp, chain)) << "\n";
    std::cout << "lambda_bar_threshold_one = "
              << sdmc::format_number(sdmc::lambda_bar_threshold_one(sp, chain)) << "\n";
    return kExitOk;
}

int cmd_mati(const std::string& config_path) {
    sdmc::Config cfg = sdmc::Config::parse_file(config_path);
    double lambda_bar = 0.0;
    sdmc::StabilityParams sp = sdmc::load_stability(cfg, &lambda_bar);
    const double closed = sdmc::mati_bound(sp, lambda_bar);
    const double oracle = sdmc::mati_via_phi_ode(sp, lambda_bar, 1e-7);
    std::cout << "lambda_bar            = " << sdmc::format_number(lambda_bar) << "\n";
    std::cout << "mati_closed_form      = " << sdmc::format_number(closed) << " s\n";
    std::cout << "mati_phi_ode_oracle   = " << sdmc::format_number(oracle) << " s\n";
    std::cout << "relative_discrepancy  = "
              << sdmc::format_number(std::abs(closed - oracle) / closed) << "\n";
    if (sp.quadratic_bounds)
        std::cout << "note: quadratic bounds (alpha_w/alpha_v/rho) are asserted by the config, "
                     "not verified here\n";
    return kExitOk;
}

int cmd_codesign(const std::string& config_path, const std::string& method,
                 const std::string& bound_form_name, double grid_resolution,
                 const std::string& trace_path) {
    sdmc::Config cfg = sdmc::Config::parse_file(config_path);
    sdmc::SdMcChannel ch = sdmc::load_channel(cfg);
    sdmc::EnvMdp mdp = sdmc::load_mdp(cfg);
    sdmc::CostModel costs = resolve_costs(cfg, mdp, ch);
    double lambda_bar = 0.0;
    sdmc::StabilityParams sp = sdmc::load_stability(cfg, &lambda_bar);
    sp.check(ch.num_rates());
    const sdmc::BoundForm form = bound_form_name == "theorem" ? sdmc::BoundForm::Theorem
                                                              : sdmc::BoundForm::Proof;

    std::ofstream trace_file;
    std::ostream* trace = nullptr;
    if (!trace_path.empty()) {
        trace_file.open(trace_path, std::ios::trunc);
        if (!trace_file) throw std::runtime_error("cannot open trace file " + trace_path);
        trace = &trace_file;
    }
    sdmc::optim::Solution sol;
    std::string route = method;
    sdmc::CpopProblem cpop = sdmc::build_cpop(ch, costs, sp, lambda_bar);
    if (method == "qcqp") {
        sdmc::CodesignResult cd = sdmc::solve_codesign(ch, costs, sp, lambda_bar, form);
        sol = cd.solution;
        route = cd.route + (cd.psd_gate_passed ? " (gate passed)" : " (gate failed)");
    } else if (method == "local") {
        sdmc::optim::LocalSolveOptions lopt;
        lopt.trace = trace;
        sol = sdmc::solve_cpop_local(cpop, {}, lopt);
    } else if (method == "lp") {
        sol = sdmc::optim::solve_lp(sdmc::build_lp_relaxation(ch, costs, sp, lambda_bar, form));
    } else if (method == "grid") {
        sol = sdmc::optim::grid_oracle(cpop.view(), grid_resolution);
    } else {
        throw CLI::ValidationError("--method must be qcqp | lp | local | grid");
    }

    std::cout << "method   = " << route << "\n";
    std::cout << "status   = " << sdmc::optim::to_string(sol.status) << "\n";
    if (!sol.feasible()) {
        if (!sol.detail.empty()) std::cout << "detail   = " << sol.detail << "\n";
        return kExitInfeasible;
    }
    std::cout << "cost     = " << sdmc::format_number(sol.value) << "\n";
    std::cout << "residual = eq " << sdmc::format_number(sol.residuals.equality) << ", ineq "
              << sdmc::format_number(sol.residuals.inequality) << ", nonneg "
              << sdmc::format_number(sol.residuals.nonnegativity) << "\n";
    sdmc::OccupationMeasure m = sdmc::measure_from_solution(cpop, sol.x);
    std::cout << "measure  =";
    for (double v : m.x) std::cout << ' ' << sdmc::format_number(v);
    std::cout << "\n";
    sdmc::ExtractedPolicies pol = sdmc::extract_policies(m);
    for (std::size_t r = 0; r < ch.num_rates(); ++r) {
        std::cout << "P(p|r=" << sdmc::format_number(ch.rates[r]) << ") =";
        for (std::size_t p = 0; p < ch.num_powers(); ++p)
            std::cout << ' ' << ch.power_names[p] << ':'
                      << sdmc::format_number(pol.power.given[r][p]);
        std::cout << "\n";
    }
    std::cout << "P(s)     =";
    for (std::size_t s = 0; s < ch.num_states(); ++s)
        std::cout << ' ' << ch.env_states[s] << ':' << sdmc::format_number(pol.env_marginal[s]);
    std::cout << "\n";
    if (!pol.zero_mass_rates.empty()) {
        std::cout << "note: uniform power conditional for zero-mass rate(s)";
        for (std::size_t r : pol.zero_mass_rates) std::cout << ' ' << r;
        std::cout << "\n";
    }
    if (method == "qcqp" || method == "local") {
        sdmc::Vec h = sdmc::eval_stability_polynomials(cpop, m);
        std::cout << "h        =";
        for (double v : h) std::cout << ' ' << sdmc::format_number(v);
        std::cout << "\n";
    }
    return kExitOk;
}

int cmd_control_lp(const std::string& config_path, std::vector<double> target_override) {
    sdmc::Config cfg = sdmc::Config::parse_file(config_path);
    sdmc::EnvMdp mdp = sdmc::load_mdp(cfg);
    sdmc::Distribution target =
        target_override.empty() ? sdmc::load_target(cfg) : sdmc::Distribution(target_override);
    sdmc::ControlLpResult res = sdmc::solve_control_lp(mdp, target);
    std::cout << "status = " << sdmc::optim::to_string(res.status) << "\n";
    if (res.status != sdmc::optim::SolveStatus::Optimal) {
        std::cout << "detail = " << res.detail << "\n";
        return kExitInfeasible;
    }
    std::cout << "cost   = " << sdmc::format_number(res.cost) << "\n";
    std::cout << "fixed_point_residual = " << sdmc::format_number(res.fixed_point_residual) << "\n";
    for (std::size_t s = 0; s < mdp.num_states(); ++s) {
        std::cout << "P(a|" << mdp.states[s] << ") =";
        for (std::size_t a = 0; a < mdp.num_actions(); ++a)
            std::cout << ' ' << mdp.actions[a] << ':'
                      << sdmc::format_number(res.policy.given[s][a]);
        std::cout << "\n";
    }
    return kExitOk;
}

sdmc::MonteCarloInputs gather_sim_inputs(const sdmc::Config& cfg) {
    sdmc::MonteCarloInputs in;
    in.plant = sdmc::load_plant(cfg);
    in.channel = sdmc::load_channel(cfg);
    in.mdp = sdmc::load_mdp(cfg);
    in.env_policy = sdmc::load_env_policy(cfg, in.mdp);
    in.power_policy = sdmc::load_power_policy(cfg, in.channel);
    in.options = sdmc::load_sim(cfg, in.mdp);
    return in;
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 std::uint64_t seed_override, bool has_seed) {
    sdmc::Config cfg = sdmc::Config::parse_file(config_path);
    sdmc::MonteCarloInputs in = gather_sim_inputs(cfg);
    if (has_seed) in.options.seed = seed_override;
    sdmc::CostModel costs = resolve_costs(cfg, in.mdp, in.channel);
    sdmc::Vec jc(in.channel.num_rates() * in.mdp.num_states() * in.channel.num_powers());
    for (std::size_t r = 0; r < in.channel.num_rates(); ++r)
        for (std::size_t s = 0; s < in.mdp.num_states(); ++s)
            for (std::size_t p = 0; p < in.channel.num_powers(); ++p)
                jc[(r * in.mdp.num_states() + s) * in.channel.num_powers() + p] =
                    costs.combined(r, s, p);
    in.joint_cost = &jc;

    OutputGuard guard;
    sdmc::SimOptions single = in.options;
    single.runs = 1;
    sdmc::Trajectory tr = sdmc::run_trajectory(in.plant, in.channel, in.mdp, in.env_policy,
                                               in.power_policy, single, &jc);
    const std::string tpath = out_path(out_dir, "trajectory.csv");
    sdmc::trajectory_csv(tr).write_file(tpath);
    guard.add(tpath);

    sdmc::Envelope env = sdmc::monte_carlo(in);
    const std::string epath = out_path(out_dir, "envelope.csv");
    sdmc::envelope_csv(env).write_file(epath);
    guard.add(epath);

    sdmc::AsasVerdict verdict =
        sdmc::empirical_asas_check(env, in.options.epsilon, in.options.tail_window);
    std::cout << "runs           = " << env.runs << "\n";
    std::cout << "diverged_runs  = " << env.diverged_runs << "\n";
    std::cout << "escapes        = " << env.total_escapes << "\n";
    std::cout << "max_norm_final = " << sdmc::format_number(env.max_norm.back()) << "\n";
    std::cout << "mean_cost_slot = " << sdmc::format_number(env.mean_cost_per_slot) << "\n";
    std::cout << "asas_check     = " << verdict.to_string() << "\n";
    std::cout << "wrote " << tpath << ", " << epath << "\n";
    guard.committed = true;
    return env.diverged_runs == 0 ? kExitOk : kExitDiverged;
}

int cmd_mati_search(const std::string& config_path, std::uint64_t seed_override, bool has_seed) {
    sdmc::Config cfg = sdmc::Config::parse_file(config_path);
    sdmc::MonteCarloInputs in = gather_sim_inputs(cfg);
    if (has_seed) in.options.seed = seed_override;
    sdmc::SearchRange range = sdmc::load_search(cfg);
    sdmc::MatiSearchResult r = sdmc::mati_search(in, range.t_low, range.t_high, range.lattice);
    std::cout << "largest_stable_T    = " << sdmc::format_number(r.largest_stable) << " s\n";
    std::cout << "smallest_unstable_T = " << sdmc::format_number(r.smallest_unstable) << " s\n";
    std::cout << "strict_instability  = " << (r.unstable_endpoint_strict ? "yes" : "no")
              << " (both envelopes beyond the divergence threshold)\n";
    std::cout << "evaluations         = " << r.evaluations << "\n";
    return kExitOk;
}

int cmd_sweep(const std::string& config_path, double from, double to, double step,
              const std::string& out_dir, const std::string& bound_form_name) {
    sdmc::Config cfg = sdmc::Config::parse_file(config_path);
    sdmc::SdMcChannel ch = sdmc::load_channel(cfg);
    sdmc::EnvMdp mdp = sdmc::load_mdp(cfg);
    sdmc::CostModel costs = resolve_costs(cfg, mdp, ch);
    double lambda_bar = 0.0;
    sdmc::StabilityParams sp = sdmc::load_stability(cfg, &lambda_bar);
    sp.check(ch.num_rates());
    const sdmc::BoundForm form = bound_form_name == "theorem" ? sdmc::BoundForm::Theorem
                                                              : sdmc::BoundForm::Proof;
    std::vector<sdmc::SweepRow> rows = sdmc::sweep_fading(
        ch, mdp, costs, sp, lambda_bar, from, to, step, 0, ch.num_powers() - 1, 0, form);
    OutputGuard guard;
    const std::string path = out_path(out_dir, "sweep_fading.csv");
    sdmc::sweep_csv(rows).write_file(path);
    guard.add(path);
    guard.committed = true;
    std::cout << sdmc::sweep_csv(rows).to_string();
    std::cout << "# wrote " << path << "\n";
    bool any_feasible = false;
    for (const auto& r : rows) any_feasible |= r.feasible;
    return any_feasible ? kExitOk : kExitInfeasible;
}

int cmd_compare(const std::string& config_path) {
    sdmc::Config cfg = sdmc::Config::parse_file(config_path);
    sdmc::SdMcChannel ch = sdmc::load_channel(cfg);
    sdmc::EnvMdp mdp = sdmc::load_mdp(cfg);
    sdmc::CostModel costs = resolve_costs(cfg, mdp, ch);
    double lambda_bar = 0.0;
    sdmc::StabilityParams sp = sdmc::load_stability(cfg, &lambda_bar);
    sp.check(ch.num_rates());
    sdmc::CodesignResult cd = sdmc::solve_codesign(ch, costs, sp, lambda_bar);
    sdmc::SeparationResult sep = sdmc::separation_baseline(ch, mdp, costs, sp, lambda_bar);
    std::cout << "codesign:   "
              << (cd.solution.feasible() ? "cost " + sdmc::format_number(cd.cost) + " (route " +
                                               cd.route + ")"
                                         : "infeasible")
              << "\n";
    std::cout << "separation: "
              << (sep.feasible ? "cost " + sdmc::format_number(sep.joint_cost)
                               : "infeasible — " + sep.detail)
              << "\n";
    if (cd.solution.feasible() && sep.feasible)
        std::cout << "advantage:  " << sdmc::format_number(sep.joint_cost - cd.cost) << "\n";
    if (!cd.solution.feasible()) return kExitInfeasible;
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"networked control over state-dependent Markov channels"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    if (const char* env = std::getenv("SDMC_OUTPUT_DIR")) out_dir = env;
    std::uint64_t seed_override = 0;
    bool has_seed = false;

    auto add_common = [&](CLI::App* cmd, bool with_out = false) {
        cmd->add_option("config", config_path, "structured-text config file")
            ->required()
            ->check(CLI::ExistingFile);
        if (with_out) cmd->add_option("-o,--out", out_dir, "output directory for artifacts");
        cmd->add_option_function<std::uint64_t>(
            "--seed", [&](std::uint64_t s) { seed_override = s; has_seed = true; },
            "override the config seed");
    };

    CLI::App* validate = app.add_subcommand("validate", "run every section validator, fail fast");
    add_common(validate);

    CLI::App* fading = app.add_subcommand("channel-from-fading",
                                          "estimate the SD-MC table from a [fading] section");
    add_common(fading, true);

    CLI::App* lbar = app.add_subcommand("lambda-bar", "inf- and 1-norm contraction thresholds");
    add_common(lbar);

    CLI::App* mati = app.add_subcommand("mati", "closed-form MATI bound and phi-ODE oracle");
    add_common(mati);

    CLI::App* codesign = app.add_subcommand("codesign", "solve the co-design program");
    std::string method = "qcqp";
    std::string bound_form = "proof";
    double grid_resolution = 0.02;
    codesign->add_option("--method", method, "qcqp | lp | local | grid")
        ->check(CLI::IsMember({"qcqp", "lp", "local", "grid"}));
    codesign->add_option("--bound-form", bound_form, "LP relaxation bound: proof | theorem")
        ->check(CLI::IsMember({"proof", "theorem"}));
    codesign->add_option("--resolution", grid_resolution, "grid oracle resolution");
    std::string trace_path;
    codesign->add_option("--trace", trace_path, "dump solver iteration trace CSV here");
    add_common(codesign);

    CLI::App* ctrl = app.add_subcommand("control-lp", "policy realizing a target distribution");
    std::vector<double> target_override;
    ctrl->add_option("--target", target_override, "target stationary distribution");
    add_common(ctrl);

    CLI::App* sim = app.add_subcommand("simulate", "trajectory and Monte Carlo envelope CSVs");
    add_common(sim, true);

    CLI::App* search = app.add_subcommand("mati-search", "empirical necessary MATI by bisection");
    add_common(search);

    CLI::App* sweep = app.add_subcommand("sweep-fading", "co-design vs separation across fading");
    double from = 0.0, to = 0.55, step = 0.05;
    sweep->add_option("--from", from, "first fading level");
    sweep->add_option("--to", to, "last fading level");
    sweep->add_option("--step", step, "grid step");
    sweep->add_option("--bound-form", bound_form, "LP relaxation bound: proof | theorem")
        ->check(CLI::IsMember({"proof", "theorem"}));
    add_common(sweep, true);

    CLI::App* compare = app.add_subcommand("compare", "co-design vs separation on one instance");
    add_common(compare);

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate(config_path);
        if (fading->parsed()) return cmd_channel_from_fading(config_path, out_dir);
        if (lbar->parsed()) return cmd_lambda_bar(config_path);
        if (mati->parsed()) return cmd_mati(config_path);
        if (codesign->parsed())
            return cmd_codesign(config_path, method, bound_form, grid_resolution, trace_path);
        if (ctrl->parsed()) return cmd_control_lp(config_path, target_override);
        if (sim->parsed()) return cmd_simulate(config_path, out_dir, seed_override, has_seed);
        if (search->parsed()) return cmd_mati_search(config_path, seed_override, has_seed);
        if (sweep->parsed()) return cmd_sweep(config_path, from, to, step, out_dir, bound_form);
        if (compare->parsed()) return cmd_compare(config_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitOk;
}
