#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "epcc/commands.hpp"
#include "epcc/errors.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace epcc;

namespace {

RunConfig parse(const std::string& text)
{
    std::istringstream in(text);
    return parse_config(in);
}

std::string config_path(const char* name)
{
    return std::string(EPCC_CONFIG_DIR) + "/" + name;
}

std::vector<std::vector<std::string>> read_csv(const std::string& text)
{
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

double num(const std::string& s)
{
    return std::stod(s);
}

std::string write_temp(const std::string& name, const std::string& text)
{
    const auto path = std::filesystem::temp_directory_path() / ("epcc_test_" + name);
    std::ofstream(path) << text;
    return path.string();
}

// Runs the CLI and returns its exit status.
int run_cli(const std::string& args)
{
    const std::string cmd = std::string(EPCC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kCenter = R"(
[center]
sigma_n_cm2 = 1e-15
sigma_p_cm2 = 3.2e-14
tau_r_s = 17e-9
eta = 0.3

[environment]
n_cm3 = 1e17
p_cm3 = 1e17
)";

} // namespace

TEST_CASE("config parsing")
{
    SUBCASE("values and defaults")
    {
        const auto cfg = parse(kCenter);
        CHECK(cfg.center.tau0() == doctest::Approx(5.1e-9));
        CHECK(cfg.environment.n == 1e17);
        CHECK(cfg.environment.T == 300.0);
        CHECK_FALSE(cfg.three_level);
        CHECK_FALSE(cfg.device);
        CHECK(cfg.sweep.n_points == 25);
        CHECK_THROWS_AS(cfg.require_device(), ConfigError);
        CHECK_THROWS_AS(cfg.require_three_level(), ConfigError);
    }

    SUBCASE("unknown keys and sections are rejected with their path")
    {
        try {
            parse("[center]\nsigma_n_cm = 1e-15\n");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("center.sigma_n_cm") != std::string::npos);
        }
        try {
            parse("[layer.n]\nmu_p = 150\n");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("layer.n.mu_p") != std::string::npos);
        }
        CHECK_THROWS_AS(parse("[centre]\neta = 0.3\n"), ConfigError);
        CHECK_THROWS_AS(parse("eta = 0.3\n"), ConfigError);
    }

    SUBCASE("malformed values")
    {
        CHECK_THROWS_AS(parse("[center]\neta = 0.3x\n"), ConfigError);
        CHECK_THROWS_AS(parse("[center]\neta = \n"), ConfigError);
        CHECK_THROWS_AS(parse("[sweep]\nn_points = 2.5\n"), ConfigError);
        CHECK_THROWS_AS(parse("[layer.p]\ndoping_type = boron\n"), ConfigError);
        CHECK_THROWS_AS(parse("[three_level]\nshelving_capture = maybe\n"), ConfigError);
        CHECK(parse("[monte_carlo]\nmax_events = 1e6\n").monte_carlo.max_events == 1000000);
    }

    SUBCASE("validation failures name the section")
    {
        try {
            parse("[center]\neta = 1.5\n");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("[center]") != std::string::npos);
        }
        CHECK_THROWS_AS(parse("[environment]\nn_cm3 = -1\n"), ConfigError);
        CHECK_THROWS_AS(parse("[three_level]\ntau_s_s = 3e-9\n"), ConfigError); // tau_nr missing
    }

    SUBCASE("device sections fall back to the p-i-n defaults")
    {
        const auto cfg = parse("[device]\nmesh_nodes = 1500\n[layer.i]\nmu_n_cm2_per_Vs = 2000\n");
        REQUIRE(cfg.device);
        const auto ref = DeviceSpec::diamond_pin();
        CHECK(cfg.device->mesh_nodes == 1500);
        CHECK(cfg.device->layers[1].mu_n == 2000.0);
        CHECK(cfg.device->layers[1].mu_p == ref.layers[1].mu_p);
        CHECK(cfg.device->layers[2].E_act == ref.layers[2].E_act);
        CHECK(cfg.device->probe_depth == ref.probe_depth);
    }

    SUBCASE("shipped configs load")
    {
        CHECK_NOTHROW(load_config(config_path("density_map.ini")));
        const auto diode = load_config(config_path("diode.ini"));
        REQUIRE(diode.device);
        CHECK(diode.center.eta == 0.78);
        const auto diode3 = load_config(config_path("diode_three_level.ini"));
        REQUIRE(diode3.three_level);
        CHECK(diode3.three_level->eta() == doctest::Approx(0.78).epsilon(1e-3));
        CHECK(diode3.three_level->tau_s == 3e-9);
        CHECK_THROWS_AS(load_config("/nonexistent/epcc.ini"), ConfigError);
    }
}

TEST_CASE("g2 command")
{
    const auto cfg = parse(kCenter);
    std::ostringstream a, b;
    cmd_g2(cfg, a);
    cmd_g2(cfg, b);
    CHECK(a.str() == b.str());

    const auto rows = read_csv(a.str());
    REQUIRE(rows.size() == 202);
    CHECK(rows[0] == std::vector<std::string>{"tau_s", "g2_analytic", "g2_ode"});
    CHECK(num(rows[1][0]) == 0.0);
    CHECK(num(rows[1][1]) == 0.0);
    CHECK(std::abs(num(rows[1][2])) < 1e-12);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        REQUIRE(rows[i].size() == 3);
        CHECK(std::abs(num(rows[i][1]) - num(rows[i][2])) < 1e-6);
    }
    // Full round-trip precision.
    const auto times = char_times_closed_form(assemble_rates(cfg.center, cfg.environment));
    CHECK(num(rows[2][0]) == delay_grid(times.tau2.real())[1]);
}

TEST_CASE("g2 command with Monte Carlo columns")
{
    auto cfg = parse(std::string(kCenter) + "[monte_carlo]\ntarget_photons = 2e5\nseed = 7\n");
    cfg.environment.n = cfg.environment.p = 1e15;
    std::ostringstream a, b;
    cmd_g2(cfg, a, true);
    cmd_g2(cfg, b, true);
    CHECK(a.str() == b.str());

    const auto rows = read_csv(a.str());
    CHECK(rows[0] ==
          std::vector<std::string>{"tau_s", "g2_analytic", "g2_ode", "g2_mc", "g2_mc_stderr"});
    REQUIRE(rows.size() == 102);
    CHECK(num(rows[1][0]) == 0.0);
    CHECK(rows[1][3] == "nan");
    int outliers = 0;
    for (std::size_t i = 2; i < rows.size(); ++i)
        if (std::abs(num(rows[i][3]) - num(rows[i][1])) > 4.0 * num(rows[i][4])) ++outliers;
    CHECK(outliers <= 2);

    cfg.monte_carlo.seed = 8;
    std::ostringstream c;
    cmd_g2(cfg, c, true);
    CHECK(c.str() != a.str());
}

TEST_CASE("times map")
{
    const auto cfg = load_config(config_path("density_map.ini"));
    std::ostringstream out;
    cmd_times_map(cfg, out);
    const auto rows = read_csv(out.str());
    REQUIRE(rows.size() == 1 + 25 * 25);
    CHECK(rows[0] == std::vector<std::string>{"n_cm3", "p_cm3", "re_tau1_s", "im_tau1_s",
                                              "re_tau2_s", "im_tau2_s", "g2_max"});
    CHECK(num(rows[1][0]) == 1e12);
    CHECK(num(rows[1][1]) == 1e12);
    CHECK(num(rows.back()[0]) == 1e18);

    double g_max = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) g_max = std::max(g_max, num(rows[i][6]));
    CHECK(g_max >= 1.0);
    CHECK(g_max <= 1.010);

    // n = p = 1e17 sits at grid index 20.
    const auto& cell = rows[1 + 20 * 25 + 20];
    REQUIRE(num(cell[0]) == doctest::Approx(1e17));
    REQUIRE(num(cell[1]) == doctest::Approx(1e17));
    CHECK(num(cell[2]) >= 13e-12);
    CHECK(num(cell[2]) <= 52e-12);
    CHECK(num(cell[4]) >= 0.25e-9);
    CHECK(num(cell[4]) <= 1.0e-9);

    // At the lowest n, Re(tau1) sits near tau0 while C_p << gamma0 and drops
    // well below it once C_p >> gamma0.
    const double tau0 = cfg.center.tau0();
    const auto& low_p = rows[1];
    const auto& high_p = rows[25];
    CHECK(num(low_p[2]) == doctest::Approx(tau0).epsilon(0.01));
    CHECK(num(high_p[2]) < 0.1 * tau0);
}

TEST_CASE("fit command")
{
    SUBCASE("round trip on g2 output")
    {
        auto cfg = parse(kCenter);
        const auto rates = assemble_rates(cfg.center, cfg.environment);
        const auto times = char_times_closed_form(rates);
        REQUIRE(times.tau1.imag() == 0.0);
        REQUIRE(times.tau2.imag() == 0.0);
        std::ostringstream g2;
        cmd_g2(cfg, g2);
        std::istringstream in(g2.str());
        std::ostringstream report;
        const auto r = cmd_fit(in, "g2.csv", {}, report);
        CHECK(r.a == doctest::Approx(times.a.real()).epsilon(0.05));
        CHECK(r.tau1 == doctest::Approx(times.tau1.real()).epsilon(0.05));
        CHECK(r.tau2 == doctest::Approx(times.tau2.real()).epsilon(0.05));

        const auto rows = read_csv(report.str());
        REQUIRE(rows.size() == 2);
        CHECK(rows[0].size() == 10);
        CHECK(rows[0][8] == "capture_sum_per_s");
        CHECK(num(rows[1][8]) == doctest::Approx(1.0 / r.tau2));
        CHECK(num(rows[1][9]) == r.tau1);
    }

    SUBCASE("low-injection report recovers the capture sum and tau0")
    {
        auto cfg = parse(kCenter);
        cfg.environment.n = cfg.environment.p = 1e13;
        const auto rates = assemble_rates(cfg.center, cfg.environment);
        std::ostringstream g2;
        cmd_g2(cfg, g2);
        std::istringstream in(g2.str());
        std::ostringstream report;
        FitInit init;
        init.tau1 = 5e-9;
        const auto r = cmd_fit(in, "g2.csv", init, report);
        CHECK(1.0 / r.tau2 == doctest::Approx(rates.C_n + rates.C_p).epsilon(0.05));
        CHECK(r.tau1 == doctest::Approx(cfg.center.tau0()).epsilon(0.05));
    }

    SUBCASE("missing column")
    {
        std::istringstream in("tau_s,counts\n0,0\n");
        std::ostringstream out;
        try {
            cmd_fit(in, "data.csv", {}, out);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("'g2'") != std::string::npos);
        }
        std::istringstream in2("t,g2\n0,0\n");
        CHECK_THROWS_WITH_AS(cmd_fit(in2, "data.csv", {}, out), doctest::Contains("'tau_s'"),
                             ConfigError);
    }

    SUBCASE("single row")
    {
        std::istringstream in("tau_s,g2\n0,0\n");
        std::ostringstream out;
        CHECK_THROWS_AS(cmd_fit(in, "data.csv", {}, out), InsufficientData);
    }

    SUBCASE("malformed cells")
    {
        std::istringstream in("tau_s,g2\n0,zero\n");
        std::ostringstream out;
        CHECK_THROWS_AS(cmd_fit(in, "data.csv", {}, out), ConfigError);
        std::istringstream in2("tau_s,g2\n-1,0\n");
        CHECK_THROWS_AS(cmd_fit(in2, "data.csv", {}, out), ConfigError);
    }
}

TEST_CASE("mc command")
{
    auto cfg = parse(std::string(kCenter) + "[monte_carlo]\ntarget_photons = 1e4\nseed = 3\n");
    std::ostringstream a, b;
    cmd_mc(cfg, a);
    cmd_mc(cfg, b);
    CHECK(a.str() == b.str());
    const auto rows = read_csv(a.str());
    REQUIRE(rows.size() > 1000);
    CHECK(rows[0] == std::vector<std::string>{"index", "timestamp_s"});
    for (std::size_t i = 1; i < rows.size(); ++i) {
        REQUIRE(rows[i][0] == std::to_string(i - 1));
        if (i > 1) REQUIRE(num(rows[i][1]) > num(rows[i - 1][1]));
    }

    std::ostringstream c;
    cmd_mc(cfg, c, true);
    const auto hist = read_csv(c.str());
    CHECK(hist[0] == std::vector<std::string>{"tau_s", "g2", "stderr"});
    CHECK(hist.size() == 101);
}

TEST_CASE("device commands")
{
    const auto cfg = load_config(config_path("diode_three_level.ini"));

    SUBCASE("device-g2 trends")
    {
        const auto rows = device_g2_rows(cfg);
        REQUIRE(rows.size() == 50);
        const double J_max = rows.back().J;
        double t1_lo = INFINITY, t1_hi = 0.0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            CAPTURE(rows[i].V);
            if (i > 0) CHECK(rows[i].times.tau2.real() < rows[i - 1].times.tau2.real());
            t1_lo = std::min(t1_lo, rows[i].times.tau1.real());
            t1_hi = std::max(t1_hi, rows[i].times.tau1.real());
            if (rows[i].J >= 0.1 * J_max)
                CHECK(rows[i].times.tau2.real() * rows[i].rates.C_p ==
                      doctest::Approx(1.0).epsilon(0.2));
        }
        CHECK(t1_hi < 1.2 * t1_lo);

        std::ostringstream out;
        cmd_device_g2(cfg, out);
        const auto csv = read_csv(out.str());
        CHECK(csv[0] == std::vector<std::string>{"V", "J_Acm2", "n_probe", "p_probe", "re_tau1_s",
                                                 "re_tau2_s", "tau_half_s"});
        CHECK(csv.size() == 51);
    }

    SUBCASE("compare-models")
    {
        const auto rows = compare_models_rows(cfg);
        REQUIRE(rows.size() == 49);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& r = rows[i];
            CAPTURE(r.J);
            CHECK(r.tau_half_2level > 0.0);
            CHECK(std::abs(r.tau_half_3level - r.tau_half_2level) < 0.1 * r.tau_half_2level);
            if (i > 0) {
                CHECK(r.J > rows[i - 1].J);
                CHECK(r.tau_half_2level < rows[i - 1].tau_half_2level);
                CHECK(r.tau_half_3level < rows[i - 1].tau_half_3level);
                CHECK(r.tau_half_3level_10x < rows[i - 1].tau_half_3level_10x);
            }
        }
        const auto& top = rows.back();
        CHECK(std::abs(top.tau_half_3level_10x - top.tau_half_2level) >
              std::abs(top.tau_half_3level - top.tau_half_2level));
    }

    SUBCASE("compare-models needs the three-level section")
    {
        const auto diode = load_config(config_path("diode.ini"));
        std::ostringstream out;
        CHECK_THROWS_AS(cmd_compare_models(diode, out), ConfigError);
        CHECK_THROWS_AS(cmd_device_g2(parse(kCenter), out), ConfigError);
    }
}

TEST_CASE("CLI exit codes and output files")
{
    const std::string good = write_temp("good.ini", kCenter);
    const std::string out = (std::filesystem::temp_directory_path() / "epcc_test_out.csv").string();
    std::filesystem::remove(out);
    CHECK(run_cli("g2 --config " + good + " --out " + out) == 0);
    CHECK(std::filesystem::file_size(out) > 0);

    CHECK(run_cli("g2 --config " + write_temp("typo.ini", "[center]\netta = 0.3\n")) == 2);
    CHECK(run_cli("g2 --config /nonexistent.ini") == 2);
    CHECK(run_cli("frobnicate") == 2);
    CHECK(run_cli("fit " + write_temp("one.csv", "tau_s,g2\n0,0\n")) == 2);

    // Too small an event budget is a solver-side failure.
    const std::string capped =
        write_temp("capped.ini", std::string(kCenter) + "[monte_carlo]\nmax_events = 10\n");
    CHECK(run_cli("mc --config " + capped) == 3);

    // --seed overrides the configured seed.
    const std::string mc_cfg =
        write_temp("mc.ini", std::string(kCenter) + "[monte_carlo]\ntarget_photons = 1e3\n");
    const std::string o1 = out + ".1", o2 = out + ".2";
    CHECK(run_cli("mc --config " + mc_cfg + " --seed 5 --out " + o1) == 0);
    CHECK(run_cli("mc --config " + mc_cfg + " --seed 5 --out " + o2) == 0);
    std::ifstream f1(o1), f2(o2);
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    CHECK(s1.str() == s2.str());
    auto cfg = parse(std::string(kCenter) + "[monte_carlo]\ntarget_photons = 1e3\nseed = 5\n");
    std::ostringstream direct;
    cmd_mc(cfg, direct);
    CHECK(direct.str() == s1.str());
}
