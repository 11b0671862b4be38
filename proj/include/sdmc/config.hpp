#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdmc/channel.hpp"
#include "sdmc/codesign.hpp"
#include "sdmc/environment.hpp"
#include "sdmc/fading.hpp"
#include "sdmc/sim/trajectory.hpp"
#include "sdmc/stability.hpp"

namespace sdmc {

/// Structured-text config: INI-style sections with optional quoted
/// subsection names ([transition "s1/L"]), key = value lines, '#'/';'
/// comments. Repeated keys (matrix rows) keep their order. Loaders reject
/// unknown keys and unknown sections.
class Config {
public:
    struct Entry {
        std::string key;
        std::string value;
    };
    struct Section {
        std::string name;
        std::string subname;
        std::vector<Entry> entries;
        mutable bool consumed = false;
    };

    static Config parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("config: cannot open " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse_string(ss.str(), path);
    }

    static Config parse_string(const std::string& text, const std::string& origin = "<string>") {
        Config cfg;
        cfg.origin_ = origin;
        Section* cur = nullptr;
        std::istringstream in(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string t = strip(line);
            if (t.empty() || t[0] == '#' || t[0] == ';') continue;
            if (t.front() == '[') {
                if (t.back() != ']')
                    throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                             ": malformed section header");
                std::string inner = strip(t.substr(1, t.size() - 2));
                Section sec;
                const std::size_t quote = inner.find('"');
                if (quote != std::string::npos) {
                    const std::size_t close = inner.rfind('"');
                    if (close == quote)
                        throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                                 ": unterminated subsection quote");
                    sec.name = strip(inner.substr(0, quote));
                    sec.subname = inner.substr(quote + 1, close - quote - 1);
                } else {
                    sec.name = inner;
                }
                cfg.sections_.push_back(std::move(sec));
                cur = &cfg.sections_.back();
                continue;
            }
            const std::size_t eq = t.find('=');
            if (eq == std::string::npos || cur == nullptr)
                throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                         ": expected key = value inside a section");
            cur->entries.push_back({strip(t.substr(0, eq)), strip(t.substr(eq + 1))});
        }
        return cfg;
    }

    const Section* find(const std::string& name, const std::string& subname = "") const {
        for (const Section& s : sections_)
            if (s.name == name && s.subname == subname) {
                s.consumed = true;
                return &s;
            }
        return nullptr;
    }

    std::vector<const Section*> find_all(const std::string& name) const {
        std::vector<const Section*> out;
        for (const Section& s : sections_)
            if (s.name == name) {
                s.consumed = true;
                out.push_back(&s);
            }
        return out;
    }

    bool has(const std::string& name) const {
        for (const Section& s : sections_)
            if (s.name == name) return true;
        return false;
    }

    /// Sections nobody consumed; used to reject unknown content fail-fast.
    std::vector<std::string> unconsumed() const {
        std::vector<std::string> out;
        for (const Section& s : sections_)
            if (!s.consumed)
                out.push_back(s.subname.empty() ? s.name : s.name + " \"" + s.subname + "\"");
        return out;
    }

    const std::string& origin() const { return origin_; }

    // -- helpers on sections ------------------------------------------------

    static std::string require_value(const Section& s, const std::string& key) {
        for (const Entry& e : s.entries)
            if (e.key == key) return e.value;
        throw std::runtime_error("config section [" + s.name + "]: missing key '" + key + "'");
    }

    static std::optional<std::string> value(const Section& s, const std::string& key) {
        for (const Entry& e : s.entries)
            if (e.key == key) return e.value;
        return std::nullopt;
    }

    static void reject_unknown(const Section& s, std::initializer_list<const char*> allowed) {
        for (const Entry& e : s.entries) {
            bool ok = false;
            for (const char* a : allowed)
                if (e.key == a) ok = true;
            if (!ok)
                throw std::runtime_error("config section [" + s.name + (s.subname.empty() ? "" : " \"" + s.subname + "\"") +
                                         "]: unknown key '" + e.key + "'");
        }
    }

    static double parse_scalar(const std::string& v) {
        if (v == "inf" || v == "+inf" || v == "Inf")
            return std::numeric_limits<double>::infinity();
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (strip(v.substr(used)).size())
            throw std::runtime_error("config: trailing characters after number in '" + v + "'");
        return d;
    }

    static Vec parse_list(const std::string& v) {
        Vec out;
        std::istringstream in(v);
        std::string tok;
        while (in >> tok) out.push_back(parse_scalar(tok));
        return out;
    }

    static std::vector<std::string> parse_names(const std::string& v) {
        std::vector<std::string> out;
        std::istringstream in(v);
        std::string tok;
        while (in >> tok) out.push_back(tok);
        return out;
    }

    static Mat parse_matrix(const Section& s) {
        std::vector<Vec> rows;
        for (const Entry& e : s.entries) {
            if (e.key != "row")
                throw std::runtime_error("config section [" + s.name +
                                         "]: matrix blocks use repeated 'row =' lines, got '" +
                                         e.key + "'");
            rows.push_back(parse_list(e.value));
        }
        if (rows.empty()) throw std::runtime_error("config section [" + s.name + "]: empty matrix");
        Mat m(rows.size(), rows[0].size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != rows[0].size())
                throw std::runtime_error("config section [" + s.name + "]: ragged matrix");
            for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
        }
        return m;
    }

private:
    static std::string strip(const std::string& s) {
        std::size_t b = 0, e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
        return s.substr(b, e - b);
    }

    std::string origin_;
    std::vector<Section> sections_;
};

// ---------------------------------------------------------------------------
// typed loaders

inline SdMcChannel load_channel(const Config& cfg) {
    const Config::Section* rates = cfg.find("rates");
    const Config::Section* states = cfg.find("env_states");
    const Config::Section* powers = cfg.find("powers");
    if (!rates || !states || !powers)
        throw std::runtime_error("config: channel needs [rates], [env_states], [powers]");
    Config::reject_unknown(*rates, {"values"});
    Config::reject_unknown(*states, {"names"});
    Config::reject_unknown(*powers, {"names", "values"});
    Vec rate_vals = Config::parse_list(Config::require_value(*rates, "values"));
    auto state_names = Config::parse_names(Config::require_value(*states, "names"));
    auto power_names = Config::parse_names(Config::require_value(*powers, "names"));
    Vec power_vals;
    if (auto v = Config::value(*powers, "values")) power_vals = Config::parse_list(*v);

    if (cfg.has("fading")) {
        const Config::Section* f = cfg.find("fading");
        Config::reject_unknown(*f, {"noise_density", "bandwidth", "doppler", "packet_period",
                                    "snr_thresholds", "shadowing"});
        FadingSpec spec;
        spec.rates = rate_vals;
        spec.env_states = state_names;
        spec.power_names = power_names;
        spec.power_values = power_vals;
        if (spec.power_values.empty())
            throw std::runtime_error("config: [fading] requires [powers] values");
        spec.noise_density = Config::parse_scalar(Config::require_value(*f, "noise_density"));
        spec.bandwidth = Config::parse_scalar(Config::require_value(*f, "bandwidth"));
        spec.doppler = Config::parse_scalar(Config::require_value(*f, "doppler"));
        spec.packet_period = Config::parse_scalar(Config::require_value(*f, "packet_period"));
        spec.snr_thresholds = Config::parse_list(Config::require_value(*f, "snr_thresholds"));
        spec.shadowing = Config::parse_list(Config::require_value(*f, "shadowing"));
        return channel_from_fading(spec);
    }

    SdMcChannel ch = SdMcChannel::zeros(rate_vals, state_names, power_names, power_vals);
    std::size_t blocks = 0;
    for (const Config::Section* t : cfg.find_all("transition")) {
        const std::size_t slash = t->subname.find('/');
        if (slash == std::string::npos)
            throw std::runtime_error("config: [transition] subsection must be \"<state>/<power>\"");
        const std::string sname = t->subname.substr(0, slash);
        const std::string pname = t->subname.substr(slash + 1);
        const auto si = std::find(state_names.begin(), state_names.end(), sname);
        const auto pi = std::find(power_names.begin(), power_names.end(), pname);
        if (si == state_names.end())
            throw std::runtime_error("config: unknown env state '" + sname + "' in transition block");
        if (pi == power_names.end())
            throw std::runtime_error("config: unknown power '" + pname + "' in transition block");
        Mat m = Config::parse_matrix(*t);
        if (m.rows() != ch.num_rates() || m.cols() != ch.num_rates())
            throw std::runtime_error("config: transition block \"" + t->subname +
                                     "\" must be M_R x M_R");
        const std::size_t s = static_cast<std::size_t>(si - state_names.begin());
        const std::size_t p = static_cast<std::size_t>(pi - power_names.begin());
        for (std::size_t i = 0; i < ch.num_rates(); ++i)
            for (std::size_t j = 0; j < ch.num_rates(); ++j) ch.prob(i, j, s, p) = m(i, j);
        ++blocks;
    }
    if (blocks != ch.num_states() * ch.num_powers())
        throw std::runtime_error("config: need one [transition \"<s>/<p>\"] block per (state, "
                                 "power) pair (" + std::to_string(blocks) + " found)");
    return ch;
}

inline EnvMdp load_mdp(const Config& cfg) {
    const Config::Section* st = cfg.find("mdp.states");
    const Config::Section* ac = cfg.find("mdp.actions");
    const Config::Section* co = cfg.find("mdp.costs");
    if (!st || !ac || !co)
        throw std::runtime_error("config: MDP needs [mdp.states], [mdp.actions], [mdp.costs]");
    Config::reject_unknown(*st, {"names", "initial"});
    Config::reject_unknown(*ac, {"names"});
    auto states = Config::parse_names(Config::require_value(*st, "names"));
    auto actions = Config::parse_names(Config::require_value(*ac, "names"));
    EnvMdp m = EnvMdp::zeros(states, actions);
    if (auto init = Config::value(*st, "initial")) {
        const auto it = std::find(states.begin(), states.end(), *init);
        if (it == states.end())
            throw std::runtime_error("config: unknown initial MDP state '" + *init + "'");
        m.initial_state = static_cast<std::size_t>(it - states.begin());
    }
    std::size_t blocks = 0;
    for (const Config::Section* t : cfg.find_all("mdp.transition")) {
        const auto ai = std::find(actions.begin(), actions.end(), t->subname);
        if (ai == actions.end())
            throw std::runtime_error("config: unknown action '" + t->subname +
                                     "' in mdp.transition block");
        Mat q = Config::parse_matrix(*t);
        if (q.rows() != m.num_states() || q.cols() != m.num_states())
            throw std::runtime_error("config: mdp.transition \"" + t->subname +
                                     "\" must be M_s x M_s");
        const std::size_t a = static_cast<std::size_t>(ai - actions.begin());
        for (std::size_t next = 0; next < m.num_states(); ++next)
            for (std::size_t cur = 0; cur < m.num_states(); ++cur)
                m.prob(next, cur, a) = q(next, cur);
        ++blocks;
    }
    if (blocks != m.num_actions())
        throw std::runtime_error("config: need one [mdp.transition \"<action>\"] block per action");
    for (std::size_t s = 0; s < m.num_states(); ++s) {
        const auto v = Config::value(*co, states[s]);
        if (!v) throw std::runtime_error("config: [mdp.costs] missing state '" + states[s] + "'");
        Vec row = Config::parse_list(*v);
        if (row.size() != m.num_actions())
            throw std::runtime_error("config: [mdp.costs] row for '" + states[s] +
                                     "' must list one cost per action");
        for (std::size_t a = 0; a < m.num_actions(); ++a) m.costs[s * m.num_actions() + a] = row[a];
    }
    for (const auto& e : co->entries)
        if (std::find(states.begin(), states.end(), e.key) == states.end())
            throw std::runtime_error("config: [mdp.costs] unknown state '" + e.key + "'");
    return m;
}

inline CostModel load_costs(const Config& cfg, const EnvMdp& mdp, const SdMcChannel& ch) {
    const Config::Section* c = cfg.find("costs");
    if (!c) throw std::runtime_error("config: missing [costs] section");
    Config::reject_unknown(*c, {"power", "rate"});
    CostModel out;
    out.env_cost = Mat(mdp.num_states(), mdp.num_actions());
    for (std::size_t s = 0; s < mdp.num_states(); ++s)
        for (std::size_t a = 0; a < mdp.num_actions(); ++a) out.env_cost(s, a) = mdp.cost(s, a);
    out.power_cost = Config::parse_list(Config::require_value(*c, "power"));
    out.rate_cost = Config::parse_list(Config::require_value(*c, "rate"));
    if (out.power_cost.size() != ch.num_powers())
        throw std::runtime_error("config: [costs] power list must match the power set");
    if (out.rate_cost.size() != ch.num_rates())
        throw std::runtime_error("config: [costs] rate list must match the rate set");
    return out;
}

inline StabilityParams load_stability(const Config& cfg, double* lambda_bar_out = nullptr) {
    const Config::Section* s = cfg.find("stability");
    if (!s) throw std::runtime_error("config: missing [stability] section");
    Config::reject_unknown(*s, {"L", "zeta", "lambdas", "lambda_bar", "alpha_w", "alpha_v", "rho"});
    StabilityParams p;
    p.growth_rate = Config::parse_scalar(Config::require_value(*s, "L"));
    p.coupling = Config::parse_scalar(Config::require_value(*s, "zeta"));
    p.lambdas = Config::parse_list(Config::require_value(*s, "lambdas"));
    const auto aw = Config::value(*s, "alpha_w");
    const auto av = Config::value(*s, "alpha_v");
    const auto rho = Config::value(*s, "rho");
    if (aw || av || rho) {
        StabilityParams::QuadraticBounds qb;
        if (aw) {
            Vec v = Config::parse_list(*aw);
            if (v.size() != 2) throw std::runtime_error("config: alpha_w wants 'lower upper'");
            qb.alpha_w_lower = v[0];
            qb.alpha_w_upper = v[1];
        }
        if (av) {
            Vec v = Config::parse_list(*av);
            if (v.size() != 2) throw std::runtime_error("config: alpha_v wants 'lower upper'");
            qb.alpha_v_lower = v[0];
            qb.alpha_v_upper = v[1];
        }
        if (rho) qb.rho = Config::parse_scalar(*rho);
        p.quadratic_bounds = qb;
    }
    if (lambda_bar_out) {
        const auto lb = Config::value(*s, "lambda_bar");
        if (!lb) throw std::runtime_error("config: [stability] missing lambda_bar");
        *lambda_bar_out = Config::parse_scalar(*lb);
    }
    return p;
}

inline PlantConfig load_plant(const Config& cfg) {
    const Config::Section* p = cfg.find("plant");
    const Config::Section* a = cfg.find("plant.A");
    const Config::Section* b = cfg.find("plant.B");
    const Config::Section* k = cfg.find("plant.K");
    if (!p || !a || !b || !k)
        throw std::runtime_error("config: plant needs [plant], [plant.A], [plant.B], [plant.K]");
    Config::reject_unknown(*p, {"x0", "xhat0", "xi0"});
    PlantConfig out;
    out.a = Config::parse_matrix(*a);
    out.b = Config::parse_matrix(*b);
    out.k = Config::parse_matrix(*k);
    out.x0 = Config::parse_list(Config::require_value(*p, "x0"));
    out.xhat0 = Config::parse_list(Config::require_value(*p, "xhat0"));
    out.xi0 = Config::parse_scalar(Config::require_value(*p, "xi0"));
    out.check();
    return out;
}

inline SimOptions load_sim(const Config& cfg, const EnvMdp& mdp) {
    const Config::Section* s = cfg.find("sim");
    if (!s) throw std::runtime_error("config: missing [sim] section");
    Config::reject_unknown(*s, {"T", "horizon", "dt", "runs", "seed", "init_perturb", "epsilon",
                                "tail_window", "divergence_factor", "initial_rate",
                                "initial_env_state", "sample_stride"});
    SimOptions o;
    o.T = Config::parse_scalar(Config::require_value(*s, "T"));
    o.horizon = Config::parse_scalar(Config::require_value(*s, "horizon"));
    if (auto v = Config::value(*s, "dt")) o.dt = Config::parse_scalar(*v);
    if (auto v = Config::value(*s, "runs")) o.runs = static_cast<std::size_t>(Config::parse_scalar(*v));
    if (auto v = Config::value(*s, "seed")) o.seed = static_cast<std::uint64_t>(Config::parse_scalar(*v));
    if (auto v = Config::value(*s, "init_perturb")) o.init_perturb = Config::parse_scalar(*v);
    if (auto v = Config::value(*s, "epsilon")) o.epsilon = Config::parse_scalar(*v);
    if (auto v = Config::value(*s, "tail_window")) o.tail_window = Config::parse_scalar(*v);
    if (auto v = Config::value(*s, "divergence_factor"))
        o.divergence_factor = Config::parse_scalar(*v);
    if (auto v = Config::value(*s, "initial_rate"))
        o.initial_rate = static_cast<std::size_t>(Config::parse_scalar(*v));
    if (auto v = Config::value(*s, "initial_env_state")) {
        const auto it = std::find(mdp.states.begin(), mdp.states.end(), *v);
        if (it == mdp.states.end())
            throw std::runtime_error("config: unknown initial_env_state '" + *v + "'");
        o.initial_env_state = static_cast<std::size_t>(it - mdp.states.begin());
    }
    if (auto v = Config::value(*s, "sample_stride"))
        o.sample_stride = static_cast<std::size_t>(Config::parse_scalar(*v));
    return o;
}

inline PowerPolicy load_power_policy(const Config& cfg, const SdMcChannel& ch) {
    const Config::Section* s = cfg.find("policy.power");
    if (!s) throw std::runtime_error("config: missing [policy.power] section");
    Mat m = Config::parse_matrix(*s);  // rows = power levels, cols = rates
    if (m.rows() != ch.num_powers() || m.cols() != ch.num_rates())
        throw std::runtime_error("config: [policy.power] must be M_p x M_R (row = power, col = rate)");
    PowerPolicy pol;
    pol.num_powers = ch.num_powers();
    pol.given.assign(ch.num_rates(), Vec(ch.num_powers(), 0.0));
    for (std::size_t r = 0; r < ch.num_rates(); ++r) {
        double total = 0.0;
        for (std::size_t p = 0; p < ch.num_powers(); ++p) {
            pol.given[r][p] = m(p, r);
            total += m(p, r);
        }
        if (std::abs(total - 1.0) > kStochasticTol)
            throw std::runtime_error("config: [policy.power] column for rate " + std::to_string(r) +
                                     " sums to " + std::to_string(total));
    }
    return pol;
}

inline ControlPolicy load_env_policy(const Config& cfg, const EnvMdp& mdp) {
    const Config::Section* s = cfg.find("policy.env");
    if (!s) throw std::runtime_error("config: missing [policy.env] section");
    Mat m = Config::parse_matrix(*s);  // rows = actions, cols = states
    if (m.rows() != mdp.num_actions() || m.cols() != mdp.num_states())
        throw std::runtime_error("config: [policy.env] must be M_a x M_s (row = action, col = state)");
    ControlPolicy pol;
    pol.num_actions = mdp.num_actions();
    pol.given.assign(mdp.num_states(), Vec(mdp.num_actions(), 0.0));
    for (std::size_t st = 0; st < mdp.num_states(); ++st)
        for (std::size_t a = 0; a < mdp.num_actions(); ++a) pol.given[st][a] = m(a, st);
    ValidationReport rep = validate_policy(pol);
    if (!rep.ok()) throw std::runtime_error("config: [policy.env] invalid:\n" + rep.to_string());
    return pol;
}

inline std::optional<RateMatrix> load_rate_chain(const Config& cfg) {
    const Config::Section* s = cfg.find("rate_chain");
    if (!s) return std::nullopt;
    return Config::parse_matrix(*s);
}

inline std::optional<JointConditional> load_conditional(const Config& cfg, const SdMcChannel& ch) {
    auto blocks = cfg.find_all("conditional");
    if (blocks.empty()) return std::nullopt;
    JointConditional cond;
    cond.num_states = ch.num_states();
    cond.num_powers = ch.num_powers();
    cond.given.assign(ch.num_rates(), Vec(ch.num_states() * ch.num_powers(), 0.0));
    std::size_t filled = 0;
    for (const Config::Section* b : blocks) {
        // subsection is the rate index, e.g. [conditional "0"]
        const std::size_t r = static_cast<std::size_t>(std::stoul(b->subname));
        if (r >= ch.num_rates())
            throw std::runtime_error("config: [conditional] rate index out of range");
        Mat m = Config::parse_matrix(*b);  // rows = states, cols = powers
        if (m.rows() != ch.num_states() || m.cols() != ch.num_powers())
            throw std::runtime_error("config: [conditional] block must be M_s x M_p");
        for (std::size_t s2 = 0; s2 < ch.num_states(); ++s2)
            for (std::size_t p = 0; p < ch.num_powers(); ++p)
                cond.given[r][s2 * ch.num_powers() + p] = m(s2, p);
        ++filled;
    }
    if (filled != ch.num_rates())
        throw std::runtime_error("config: need one [conditional \"<rate>\"] block per rate");
    return cond;
}

inline Distribution load_target(const Config& cfg) {
    const Config::Section* s = cfg.find("target");
    if (!s) throw std::runtime_error("config: missing [target] section");
    Config::reject_unknown(*s, {"distribution"});
    return Config::parse_list(Config::require_value(*s, "distribution"));
}

struct SearchRange {
    double t_low = 0.005;
    double t_high = 0.125;
    double lattice = 0.0025;
};

inline SearchRange load_search(const Config& cfg) {
    SearchRange out;
    const Config::Section* s = cfg.find("search");
    if (!s) return out;
    Config::reject_unknown(*s, {"t_low", "t_high", "lattice"});
    if (auto v = Config::value(*s, "t_low")) out.t_low = Config::parse_scalar(*v);
    if (auto v = Config::value(*s, "t_high")) out.t_high = Config::parse_scalar(*v);
    if (auto v = Config::value(*s, "lattice")) out.lattice = Config::parse_scalar(*v);
    return out;
}

}  // namespace sdmc
