#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdmc/channel.hpp"
#include "sdmc/sim/monte_carlo.hpp"
#include "sdmc/sim/trajectory.hpp"

namespace sdmc {

/// 10-significant-digit rendering used for every numeric CSV cell; stable
/// across reruns, and "inf" round-trips through the config/CSV readers.
inline std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string to_string() const {
        std::ostringstream out;
        for (std::size_t i = 0; i < header.size(); ++i)
            out << header[i] << (i + 1 == header.size() ? "" : ",");
        out << '\n';
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i)
                out << row[i] << (i + 1 == row.size() ? "" : ",");
            out << '\n';
        }
        return out.str();
    }

    static CsvTable parse(const std::string& text) {
        CsvTable t;
        std::istringstream in(text);
        std::string line;
        bool first = true;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::vector<std::string> cells;
            std::istringstream ls(line);
            std::string cell;
            while (std::getline(ls, cell, ',')) cells.push_back(cell);
            if (first) {
                t.header = cells;
                first = false;
            } else {
                t.rows.push_back(cells);
            }
        }
        return t;
    }

    static CsvTable read_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("csv: cannot open " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

    void write_file(const std::string& path) const {
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw std::runtime_error("csv: cannot write " + path);
        out << to_string();
    }

    double number(std::size_t row, const std::string& col) const {
        for (std::size_t j = 0; j < header.size(); ++j)
            if (header[j] == col) {
                const std::string& c = rows[row][j];
                if (c == "inf") return std::numeric_limits<double>::infinity();
                if (c == "-inf") return -std::numeric_limits<double>::infinity();
                return std::stod(c);
            }
        throw std::runtime_error("csv: no column '" + col + "'");
    }
};

inline CsvTable trajectory_csv(const Trajectory& tr) {
    CsvTable t;
    t.header = {"t", "x_norm", "e_norm", "xi", "rate", "env_state", "power", "cum_cost"};
    for (std::size_t i = 0; i < tr.t.size(); ++i)
        t.rows.push_back({format_number(tr.t[i]), format_number(tr.x_norm[i]),
                          format_number(tr.e_norm[i]), format_number(tr.xi[i]),
                          std::to_string(tr.rate[i]), std::to_string(tr.env_state[i]),
                          std::to_string(tr.power[i]), format_number(tr.cum_cost[i])});
    return t;
}

inline CsvTable envelope_csv(const Envelope& env) {
    CsvTable t;
    t.header = {"t", "max_norm", "min_norm"};
    for (std::size_t i = 0; i < env.t.size(); ++i)
        t.rows.push_back({format_number(env.t[i]), format_number(env.max_norm[i]),
                          format_number(env.min_norm[i])});
    return t;
}

/// Channel table in the structured-text config schema; re-parseable by
/// load_channel.
inline std::string channel_to_config(const SdMcChannel& ch) {
    std::ostringstream out;
    out << "[rates]\nvalues =";
    for (double r : ch.rates) out << ' ' << format_number(r);
    out << "\n\n[env_states]\nnames =";
    for (const auto& s : ch.env_states) out << ' ' << s;
    out << "\n\n[powers]\nnames =";
    for (const auto& p : ch.power_names) out << ' ' << p;
    out << "\nvalues =";
    for (double p : ch.power_values) out << ' ' << format_number(p);
    out << "\n";
    for (std::size_t s = 0; s < ch.num_states(); ++s)
        for (std::size_t p = 0; p < ch.num_powers(); ++p) {
            out << "\n[transition \"" << ch.env_states[s] << '/' << ch.power_names[p] << "\"]\n";
            for (std::size_t i = 0; i < ch.num_rates(); ++i) {
                out << "row =";
                for (std::size_t j = 0; j < ch.num_rates(); ++j)
                    out << ' ' << format_number(ch.prob(i, j, s, p));
                out << '\n';
            }
        }
    return out.str();
}

}  // namespace sdmc
