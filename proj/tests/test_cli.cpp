#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "sdmc/config.hpp"
#include "sdmc/io.hpp"

namespace {

struct CliResult {
    int exit_code = -1;
    std::string output;
};

CliResult run_cli(const std::string& args) {
    const std::string cmd = std::string(SDMC_CLI_PATH) + " " + args + " 2>&1";
    std::array<char, 4096> buf{};
    CliResult res;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    while (std::fgets(buf.data(), buf.size(), pipe)) res.output += buf.data();
    const int status = pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

std::string preset(const std::string& name) {
    return std::string(SDMC_SOURCE_DIR) + "/presets/" + name;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// shipped config with the [sim] section swapped for a quick variant
std::string small_sim_config(const std::filesystem::path& dir) {
    std::string text = slurp(preset("batch_reactor_sV.cfg"));
    const std::string needle = "[sim]";
    const std::size_t pos = text.find(needle);
    REQUIRE(pos != std::string::npos);
    const std::size_t end = text.find("\n[", pos);
    text.replace(pos, end - pos,
                 "[sim]\nT = 0.01\nhorizon = 1.5\nruns = 8\nseed = 4242\n"
                 "epsilon = 2\ntail_window = 0.5\ninitial_rate = 0\ninitial_env_state = s1\n");
    const std::filesystem::path p = dir / "small.cfg";
    std::ofstream out(p);
    out << text;
    return p.string();
}

}  // namespace

TEST_CASE("validate") {
    SECTION("shipped preset passes") {
        CliResult r = run_cli("validate " + preset("batch_reactor_sV.cfg"));
        INFO(r.output);
        CHECK(r.exit_code == 0);
        CHECK(r.output.find("channel: ok") != std::string::npos);
        CHECK(r.output.find("mdp: ok") != std::string::npos);
    }
    SECTION("broken slice exits 1 and names the indices") {
        auto dir = std::filesystem::temp_directory_path() / "sdmc_cli_test";
        std::filesystem::create_directories(dir);
        std::string text = slurp(preset("batch_reactor_sV.cfg"));
        const std::size_t pos = text.find("row = 0.8 0.8");
        REQUIRE(pos != std::string::npos);
        std::string broken = text;
        broken.replace(pos, 13, "row = 0.8 0.7");
        const auto path = dir / "broken.cfg";
        std::ofstream(path) << broken;
        CliResult r = run_cli("validate " + path.string());
        CHECK(r.exit_code == 1);
        CHECK(r.output.find("non-stochastic") != std::string::npos);
        CHECK(r.output.find("cur=1") != std::string::npos);
    }
    SECTION("unknown flags are rejected") {
        CliResult r = run_cli("validate --bogus " + preset("batch_reactor_sV.cfg"));
        CHECK(r.exit_code != 0);
    }
}

TEST_CASE("lambda-bar and mati on the shipped preset") {
    CliResult lb = run_cli("lambda-bar " + preset("batch_reactor_sV.cfg"));
    INFO(lb.output);
    CHECK(lb.exit_code == 0);
    CHECK(lb.output.find("0.632455532") != std::string::npos);
    CHECK(lb.output.find("0.894427191") != std::string::npos);

    CliResult m = run_cli("mati " + preset("batch_reactor_sV.cfg"));
    INFO(m.output);
    CHECK(m.exit_code == 0);
    CHECK(m.output.find("mati_closed_form") != std::string::npos);
    CHECK(m.output.find("mati_phi_ode_oracle") != std::string::npos);
    CHECK(m.output.find("relative_discrepancy") != std::string::npos);
    CHECK(m.output.find("0.00985") != std::string::npos);
}

TEST_CASE("codesign subcommand") {
    SECTION("quadratic route solves the shipped instance") {
        CliResult r = run_cli("codesign " + preset("batch_reactor_sV.cfg"));
        INFO(r.output);
        CHECK(r.exit_code == 0);
        CHECK(r.output.find("cost     = 1.562") != std::string::npos);
        CHECK(r.output.find("gate failed") != std::string::npos);
    }
    SECTION("LP relaxation is infeasible at the shipped contraction parameter") {
        CliResult r = run_cli("codesign --method lp " + preset("batch_reactor_sV.cfg"));
        CHECK(r.exit_code == 2);
        CHECK(r.output.find("infeasible") != std::string::npos);
    }
}

TEST_CASE("control-lp subcommand") {
    CliResult r = run_cli("control-lp --target 0.5 0.5 " + preset("batch_reactor_sV.cfg"));
    INFO(r.output);
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("cost   = 0.5") != std::string::npos);
    CliResult bad = run_cli("control-lp --target 0 1 " + preset("batch_reactor_sV.cfg"));
    CHECK(bad.exit_code == 2);
}

TEST_CASE("channel-from-fading emits a re-parseable table") {
    auto dir = std::filesystem::temp_directory_path() / "sdmc_cli_fading";
    std::filesystem::create_directories(dir);
    CliResult r = run_cli("channel-from-fading -o " + dir.string() + " " +
                          preset("fading_example.cfg"));
    INFO(r.output);
    CHECK(r.exit_code == 0);
    sdmc::Config cfg = sdmc::Config::parse_file((dir / "channel.cfg").string());
    sdmc::SdMcChannel ch = sdmc::load_channel(cfg);
    CHECK(sdmc::validate_channel(ch).ok());
}

TEST_CASE("simulate writes re-parseable, reproducible artifacts") {
    auto dir = std::filesystem::temp_directory_path() / "sdmc_cli_sim";
    std::filesystem::create_directories(dir);
    const std::string cfg = small_sim_config(dir);
    CliResult r1 = run_cli("simulate -o " + dir.string() + " " + cfg);
    INFO(r1.output);
    CHECK(r1.exit_code == 0);
    const std::string traj1 = slurp((dir / "trajectory.csv").string());
    const std::string env1 = slurp((dir / "envelope.csv").string());

    sdmc::CsvTable traj = sdmc::CsvTable::parse(traj1);
    REQUIRE(traj.header.size() == 8);
    CHECK(traj.header[0] == "t");
    CHECK(traj.header[7] == "cum_cost");
    CHECK(traj.number(0, "t") == 0.0);
    sdmc::CsvTable env = sdmc::CsvTable::parse(env1);
    CHECK(env.header == std::vector<std::string>{"t", "max_norm", "min_norm"});
    for (std::size_t i = 0; i < env.rows.size(); ++i)
        CHECK(env.number(i, "max_norm") >= env.number(i, "min_norm"));

    CliResult r2 = run_cli("simulate -o " + dir.string() + " " + cfg);
    CHECK(r2.exit_code == 0);
    CHECK(slurp((dir / "trajectory.csv").string()) == traj1);
    CHECK(slurp((dir / "envelope.csv").string()) == env1);

    SECTION("seed override changes the artifacts") {
        CliResult r3 = run_cli("simulate --seed 99 -o " + dir.string() + " " + cfg);
        CHECK(r3.exit_code == 0);
        CHECK(slurp((dir / "trajectory.csv").string()) != traj1);
    }
}

TEST_CASE("sweep-fading emits the pinned column order") {
    auto dir = std::filesystem::temp_directory_path() / "sdmc_cli_sweep";
    std::filesystem::create_directories(dir);
    CliResult r = run_cli("sweep-fading --from 0 --to 0.1 --step 0.05 -o " + dir.string() + " " +
                          preset("batch_reactor_sV.cfg"));
    INFO(r.output);
    CHECK(r.exit_code == 0);
    sdmc::CsvTable t = sdmc::CsvTable::read_file((dir / "sweep_fading.csv").string());
    CHECK(t.header ==
          std::vector<std::string>{"fading_level", "cost_codesign_qcqp", "cost_codesign_lp",
                                   "cost_separation", "p_low_given_r0", "p_low_given_r2",
                                   "p_stay_given_s1", "p_stay_given_s2", "feasible_flag"});
    REQUIRE(t.rows.size() == 3);
    CHECK(t.number(0, "feasible_flag") == 1.0);
    CHECK(std::isinf(t.number(0, "cost_separation")));
}

TEST_CASE("compare reports both designs") {
    CliResult r = run_cli("compare " + preset("batch_reactor_sV.cfg"));
    INFO(r.output);
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("codesign:   cost 1.562") != std::string::npos);
    CHECK(r.output.find("separation: infeasible") != std::string::npos);
}
