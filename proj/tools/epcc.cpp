#include "epcc/commands.hpp"
#include "epcc/errors.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace {

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_path;
    bool mc = false;
    bool correlation = false;
    std::string data_path;
    epcc::FitInit init;
};

epcc::RunConfig load(const Options& o)
{
    epcc::RunConfig cfg = epcc::load_config(o.config_path);
    if (o.seed) cfg.monte_carlo.seed = *o.seed;
    return cfg;
}

template <class F>
void with_output(const Options& o, F&& f)
{
    if (o.out_path.empty() || o.out_path == "-") {
        f(std::cout);
        std::cout.flush();
        return;
    }
    std::ofstream file(o.out_path);
    if (!file) throw epcc::ConfigError("cannot open output file '" + o.out_path + "'");
    f(file);
    file.close();
    if (!file) throw epcc::ConfigError("failed writing '" + o.out_path + "'");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Charge-cycle photon statistics of color centers"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* c = sub->add_option("--config", o.config_path, "INI configuration file");
        if (needs_config) c->required()->check(CLI::ExistingFile);
        sub->add_option("--out", o.out_path, "output CSV (default stdout)");
    };

    auto* g2 = app.add_subcommand("g2", "g2 curve from the analytic and ODE routes");
    add_common(g2, true);
    g2->add_option("--seed", o.seed, "Monte Carlo seed (overrides the config)");
    g2->add_flag("--mc", o.mc, "add a Monte Carlo histogram");

    auto* times = app.add_subcommand("times-map", "characteristic times over the density grid");
    add_common(times, true);

    auto* device = app.add_subcommand("device-g2", "characteristic times along the diode sweep");
    add_common(device, true);

    auto* compare = app.add_subcommand("compare-models", "two- vs three-level half-rise times");
    add_common(compare, true);

    auto* fit = app.add_subcommand("fit", "fit the bunching model to measured g2 data");
    fit->add_option("data", o.data_path, "CSV with tau_s and g2 columns")
        ->required()
        ->check(CLI::ExistingFile);
    fit->add_option("--out", o.out_path, "output CSV (default stdout)");
    fit->add_option("--a0", o.init.a, "initial a");
    fit->add_option("--tau1", o.init.tau1, "initial tau1 in s");
    fit->add_option("--tau2", o.init.tau2, "initial tau2 in s");

    auto* mc = app.add_subcommand("mc", "export one Monte Carlo trajectory");
    add_common(mc, true);
    mc->add_option("--seed", o.seed, "seed (overrides the config)");
    mc->add_flag("--correlation", o.correlation, "write the coincidence histogram instead");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*g2) {
            const auto cfg = load(o);
            with_output(o, [&](std::ostream& out) { epcc::cmd_g2(cfg, out, o.mc); });
        } else if (*times) {
            const auto cfg = load(o);
            with_output(o, [&](std::ostream& out) { epcc::cmd_times_map(cfg, out); });
        } else if (*device) {
            const auto cfg = load(o);
            with_output(o, [&](std::ostream& out) { epcc::cmd_device_g2(cfg, out); });
        } else if (*compare) {
            const auto cfg = load(o);
            with_output(o, [&](std::ostream& out) { epcc::cmd_compare_models(cfg, out); });
        } else if (*fit) {
            std::ifstream in(o.data_path);
            if (!in) throw epcc::ConfigError("cannot open '" + o.data_path + "'");
            with_output(o, [&](std::ostream& out) { epcc::cmd_fit(in, o.data_path, o.init, out); });
        } else if (*mc) {
            const auto cfg = load(o);
            with_output(o, [&](std::ostream& out) { epcc::cmd_mc(cfg, out, o.correlation); });
        }
    } catch (const epcc::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.family() == epcc::Error::Family::input ? 2 : 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
