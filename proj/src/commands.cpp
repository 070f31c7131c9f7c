#include "epcc/commands.hpp"

#include "epcc/csv.hpp"
#include "epcc/errors.hpp"
#include "epcc/stochastic.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace epcc {

namespace {

std::vector<double> log_grid(double lo, double hi, std::size_t n)
{
    if (n == 1) return {lo};
    std::vector<double> v(n);
    const double l0 = std::log(lo), l1 = std::log(hi);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = std::exp(l0 + (l1 - l0) * static_cast<double>(i) / static_cast<double>(n - 1));
    v.front() = lo;
    v.back() = hi;
    return v;
}

Environment environment_at(const Environment& base, double n, double p)
{
    Environment env = base;
    env.n = n;
    env.p = p;
    return env;
}

// Probe densities with the effective masses of [environment].
Environment probe_environment(const RunConfig& config, const DeviceState& state,
                              const DeviceSpec& spec)
{
    Environment env = probe(state, spec);
    env.m_eff_n = config.environment.m_eff_n;
    env.m_eff_p = config.environment.m_eff_p;
    return env;
}

TrajectoryConfig trajectory_for(const MonteCarloConfig& mc, const RateSet& rates)
{
    TrajectoryConfig tc;
    tc.seed = mc.seed;
    tc.max_events = mc.max_events;
    if (mc.duration > 0.0) {
        tc.duration = mc.duration;
    } else {
        const Populations ss = steady_state(rates);
        tc.duration = mc.target_photons / (ss.x * rates.gamma0);
    }
    return tc;
}

CorrelationEstimate histogram(const MonteCarloConfig& mc, const RateSet& rates,
                              const PhotonRecord& record)
{
    const double t2 = char_times_closed_form(rates).tau2.real();
    const double width = mc.bin_width > 0.0 ? mc.bin_width : t2 / 20.0;
    const double max_delay = mc.max_delay > 0.0 ? mc.max_delay : 5.0 * t2;
    return correlate(record, width, max_delay);
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

} // namespace

void cmd_g2(const RunConfig& config, std::ostream& out, bool monte_carlo)
{
    const RateSet rates = assemble_rates(config.center, config.environment);
    const CharTimes times = char_times_closed_form(rates);

    if (!monte_carlo) {
        const auto taus = delay_grid(times.tau2.real(), config.sweep.delay_points,
                                     config.sweep.delay_lo_factor, config.sweep.delay_hi_factor);
        const auto analytic = g2_analytic(times, taus);
        const auto ode = g2_ode(rates, taus);
        csv::header(out, {"tau_s", "g2_analytic", "g2_ode"});
        for (std::size_t i = 0; i < taus.size(); ++i)
            csv::row(out, {taus[i], analytic.values[i], ode.values[i]});
        return;
    }

    const auto record = simulate(rates, trajectory_for(config.monte_carlo, rates));
    const auto est = histogram(config.monte_carlo, rates, record);
    std::vector<double> taus{0.0};
    for (std::size_t i = 0; i < est.bins(); ++i) taus.push_back(est.center(i));
    const auto analytic = g2_analytic(times, taus);
    const auto ode = g2_ode(rates, taus);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    csv::header(out, {"tau_s", "g2_analytic", "g2_ode", "g2_mc", "g2_mc_stderr"});
    for (std::size_t i = 0; i < taus.size(); ++i) {
        const double mc = i == 0 ? nan : est.g2[i - 1];
        const double se = i == 0 ? nan : est.std_error[i - 1];
        csv::row(out, {taus[i], analytic.values[i], ode.values[i], mc, se});
    }
}

void cmd_times_map(const RunConfig& config, std::ostream& out)
{
    const auto& s = config.sweep;
    const auto ns = log_grid(s.n_min, s.n_max, s.n_points);
    const auto ps = log_grid(s.p_min, s.p_max, s.p_points);
    csv::header(out, {"n_cm3", "p_cm3", "re_tau1_s", "im_tau1_s", "re_tau2_s", "im_tau2_s",
                      "g2_max"});
    for (double n : ns) {
        for (double p : ps) {
            const RateSet rates = assemble_rates(config.center, environment_at(config.environment, n, p));
            const CharTimes t = char_times_closed_form(rates);
            csv::row(out, {n, p, t.tau1.real(), t.tau1.imag(), t.tau2.real(), t.tau2.imag(),
                           g2_max(rates)});
        }
    }
}

std::vector<DeviceG2Row> device_g2_rows(const RunConfig& config)
{
    const DeviceSpec& spec = config.require_device();
    const auto sweep = iv_sweep(spec, config.sweep.biases());
    std::vector<DeviceG2Row> rows;
    rows.reserve(sweep.size());
    for (const auto& pt : sweep) {
        DeviceG2Row row;
        row.V = pt.V;
        row.J = pt.J;
        row.env = probe_environment(config, pt.state, spec);
        row.rates = assemble_rates(config.center, row.env);
        row.times = char_times_closed_form(row.rates);
        row.tau_half = half_rise_time(row.rates);
        rows.push_back(row);
    }
    return rows;
}

void cmd_device_g2(const RunConfig& config, std::ostream& out)
{
    const auto rows = device_g2_rows(config);
    csv::header(out, {"V", "J_Acm2", "n_probe", "p_probe", "re_tau1_s", "re_tau2_s", "tau_half_s"});
    for (const auto& r : rows)
        csv::row(out, {r.V, r.J, r.env.n, r.env.p, r.times.tau1.real(), r.times.tau2.real(),
                       r.tau_half});
}

std::vector<CompareRow> compare_models_rows(const RunConfig& config)
{
    const ThreeLevelModel& model = config.require_three_level();
    const DeviceSpec& spec = config.require_device();
    const CenterModel two = model.two_level();
    ThreeLevelModel slow = model;
    slow.tau_s *= 10.0;

    const auto sweep = iv_sweep(spec, config.sweep.biases());
    std::vector<CompareRow> rows;
    for (const auto& pt : sweep) {
        if (!(pt.J > 0.0)) continue;
        const Environment env = probe_environment(config, pt.state, spec);
        CompareRow row;
        row.J = pt.J;
        row.tau_half_2level = half_rise_time(assemble_rates(two, env));
        row.tau_half_3level = half_rise_time_3l(model, env);
        row.tau_half_3level_10x = half_rise_time_3l(slow, env);
        rows.push_back(row);
    }
    return rows;
}

void cmd_compare_models(const RunConfig& config, std::ostream& out)
{
    const auto rows = compare_models_rows(config);
    csv::header(out, {"J_Acm2", "tau_half_2level", "tau_half_3level", "tau_half_3level_10x_tau_s"});
    for (const auto& r : rows)
        csv::row(out, {r.J, r.tau_half_2level, r.tau_half_3level, r.tau_half_3level_10x});
}

G2Samples read_g2_samples(std::istream& in, const std::string& source)
{
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(source + ": empty file");
    const auto head = split(line);
    std::size_t tau_col = head.size(), g2_col = head.size(), alias_col = head.size();
    for (std::size_t i = 0; i < head.size(); ++i) {
        if (head[i] == "tau_s") tau_col = i;
        if (head[i] == "g2") g2_col = i;
        if (head[i] == "g2_analytic") alias_col = i;
    }
    if (g2_col == head.size()) g2_col = alias_col;
    if (tau_col == head.size()) throw ConfigError(source + ": missing column 'tau_s'");
    if (g2_col == head.size()) throw ConfigError(source + ": missing column 'g2'");

    G2Samples data;
    std::size_t line_no = 1;
    auto number = [&](const std::string& cell, const char* column) {
        double v = 0.0;
        const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size() ||
            !std::isfinite(v))
            throw ConfigError(source + ":" + std::to_string(line_no) + ": column '" + column +
                              "' is not a finite number: '" + cell + "'");
        return v;
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split(line);
        if (cells.size() != head.size())
            throw ConfigError(source + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(head.size()) + " cells");
        const double tau = number(cells[tau_col], "tau_s");
        if (tau < 0.0)
            throw ConfigError(source + ":" + std::to_string(line_no) + ": negative tau_s");
        data.taus.push_back(tau);
        data.g2.push_back(number(cells[g2_col], "g2"));
    }
    return data;
}

FitResult cmd_fit(std::istream& data, const std::string& source, const FitInit& init,
                  std::ostream& out)
{
    const G2Samples s = read_g2_samples(data, source);
    if (s.taus.size() < 8)
        throw InsufficientData(source + ": " + std::to_string(s.taus.size()) +
                               " samples, at least 8 are needed");
    FitResult start = initial_guess(s.taus, s.g2);
    if (init.a) start.a = *init.a;
    if (init.tau1) start.tau1 = *init.tau1;
    if (init.tau2) start.tau2 = *init.tau2;
    if (!(start.tau1 > 0.0) || !(start.tau2 > 0.0))
        throw InvalidParameter("initial tau1 and tau2 must be > 0");

    const FitResult r = fit_g2(s.taus, s.g2, start);
    csv::header(out, {"a", "tau1_s", "tau2_s", "rss", "a_stderr", "tau1_stderr_s",
                      "tau2_stderr_s", "iterations", "capture_sum_per_s", "tau0_s"});
    out << csv::format(r.a) << ',' << csv::format(r.tau1) << ',' << csv::format(r.tau2) << ','
        << csv::format(r.rss) << ',' << csv::format(r.std_errors[0]) << ','
        << csv::format(r.std_errors[1]) << ',' << csv::format(r.std_errors[2]) << ','
        << r.iterations << ',' << csv::format(1.0 / r.tau2) << ',' << csv::format(r.tau1) << '\n';
    return r;
}

void cmd_mc(const RunConfig& config, std::ostream& out, bool correlation)
{
    const RateSet rates = assemble_rates(config.center, config.environment);
    const auto record = simulate(rates, trajectory_for(config.monte_carlo, rates));
    if (!correlation) {
        csv::header(out, {"index", "timestamp_s"});
        for (std::size_t i = 0; i < record.timestamps.size(); ++i)
            out << i << ',' << csv::format(record.timestamps[i]) << '\n';
        return;
    }
    const auto est = histogram(config.monte_carlo, rates, record);
    csv::header(out, {"tau_s", "g2", "stderr"});
    for (std::size_t i = 0; i < est.bins(); ++i) csv::row(out, {est.center(i), est.g2[i], est.std_error[i]});
}

} // namespace epcc
