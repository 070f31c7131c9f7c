// One PASS/FAIL line per acceptance criterion; exits non-zero if any fails.

#include "support.hpp"

#include "epcc/device.hpp"
#include "epcc/errors.hpp"
#include "epcc/fit.hpp"
#include "epcc/kinetics.hpp"
#include "epcc/stochastic.hpp"
#include "epcc/three_level.hpp"

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

using namespace epcc;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, bool pass, const std::string& detail)
{
    std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// Runs one criterion; an exception is a failure with its message.
void run(int id, const std::function<void()>& body)
{
    try {
        body();
    } catch (const std::exception& e) {
        report(id, false, std::string("exception: ") + e.what());
    }
}

Environment env_at(double n, double p)
{
    Environment e;
    e.n = n;
    e.p = p;
    return e;
}

CenterModel reference_center()
{
    CenterModel c;
    c.sigma_n = 1e-15;
    c.sigma_p = 3.2e-14;
    c.tau_r = 17e-9;
    c.eta = 0.3; // tau0 = 5.1 ns
    return c;
}

/// Bin average of the analytic curve by 8-point Gauss-Legendre quadrature.
double bin_average(const CharTimes& t, double lo, double hi)
{
    static const double x[] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                               -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                               0.7966664774136267,  0.9602898564975363};
    static const double w[] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                               0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                               0.2223810344533745, 0.1012285362903763};
    std::vector<double> pts(8);
    for (int i = 0; i < 8; ++i) pts[i] = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x[i];
    const auto v = g2_analytic(t, pts).values;
    double s = 0.0;
    for (int i = 0; i < 8; ++i) s += 0.5 * w[i] * v[i];
    return s;
}

void characteristic_time_anchor()
{
    const auto t0 = Clock::now();
    const auto r = assemble_rates(reference_center(), env_at(1e17, 1e17));
    const auto t = char_times_closed_form(r);
    const double dt = seconds_since(t0);
    const double t1 = t.tau1.real(), t2 = t.tau2.real();
    const bool pass = t1 >= 13e-12 && t1 <= 52e-12 && t2 >= 0.25e-9 && t2 <= 1.0e-9 && dt < 1e-3;
    report(1, pass,
           fmt("Re tau1 = %.3g ps in [13, 52], Re tau2 = %.3g ns in [0.25, 1.0], %.3g ms",
               t1 * 1e12, t2 * 1e9, dt * 1e3));
}

void three_routes_agree()
{
    std::mt19937_64 rng(2024);
    double worst_g2 = 0.0, worst_times = 0.0;
    int skipped = 0;
    for (int i = 0; i < 10000; ++i) {
        const auto r = test_support::random_rates(rng);
        CharTimes c, e;
        try {
            c = char_times_closed_form(r);
            e = char_times_eigen(r);
        } catch (const Degenerate&) {
            ++skipped;
            continue;
        }
        worst_times = std::max({worst_times, test_support::rel_diff(c.tau1, e.tau1),
                                test_support::rel_diff(c.tau2, e.tau2)});
        const auto grid = delay_grid(c.tau2.real(), 40);
        const auto a = g2_analytic(c, grid).values;
        const auto o = g2_ode(r, grid).values;
        for (std::size_t k = 0; k < grid.size(); ++k)
            worst_g2 = std::max(worst_g2, std::abs(a[k] - o[k]));
    }
    report(2, worst_g2 < 1e-6 && worst_times < 1e-10 && skipped == 0,
           fmt("10000 rate sets: max |analytic - ODE| = %.2e (< 1e-6), max time rel diff = %.2e "
               "(< 1e-10), degenerate draws = %d",
               worst_g2, worst_times, skipped));
}

void monte_carlo_equivalence()
{
    const auto r = assemble_rates(reference_center(), env_at(1e15, 1e15));
    const auto t = char_times_closed_form(r);
    TrajectoryConfig cfg;
    cfg.seed = 20240601;
    cfg.duration = 1.05e6 / (steady_state(r).x * r.gamma0);
    const auto t0 = Clock::now();
    const auto rec = simulate(r, cfg);
    const double T2 = t.tau2.real();
    const auto est = correlate(rec, T2 / 20.0, 5.0 * T2);
    const double dt = seconds_since(t0);
    std::size_t inside = 0;
    for (std::size_t b = 0; b < est.bins(); ++b) {
        const double model = bin_average(t, est.bin_edges[b], est.bin_edges[b + 1]);
        if (std::abs(est.g2[b] - model) < 4.0 * est.std_error[b]) ++inside;
    }
    const double frac = static_cast<double>(inside) / static_cast<double>(est.bins());
    const bool pass =
        rec.timestamps.size() >= 1000000 && frac >= 0.99 && est.g2[0] < 0.1 && dt < 60.0;
    report(3, pass,
           fmt("%zu photons, %.1f%% of %zu bins within 4 sigma, first bin g2 = %.4f, %.1f s",
               rec.timestamps.size(), 100.0 * frac, est.bins(), est.g2[0], dt));
}

void bunching_bound()
{
    const auto c = reference_center();
    double worst = 0.0, lowest = INFINITY;
    for (int i = 0; i < 25; ++i) {
        for (int j = 0; j < 25; ++j) {
            const double n = std::pow(10.0, 12.0 + 0.25 * i);
            const double p = std::pow(10.0, 12.0 + 0.25 * j);
            const double g = g2_max(assemble_rates(c, env_at(n, p)));
            worst = std::max(worst, g);
            lowest = std::min(lowest, g);
        }
    }
    report(4, worst >= 1.0 && worst <= 1.010,
           fmt("max g2 over the 25 x 25 grid = %.6f in [1.000, 1.010] (cell minimum %.6f)", worst,
               lowest));
}

void low_injection_limit()
{
    struct Case {
        double Cn, Cp;
    };
    const double g0 = 1.0 / 5.1e-9;
    double worst_fit = 0.0, worst_half = 0.0;
    for (auto [Cn, Cp] : {Case{1e5, 1e6}, Case{1e6, 1.5e6}, Case{4e4, 1.9e6}, Case{1.9e6, 1e3}}) {
        RateSet r;
        r.C_n = Cn;
        r.C_p = Cp;
        r.gamma0 = g0;
        const double tau_low = 1.0 / (Cn + Cp);
        std::vector<double> grid;
        for (int k = 0; k <= 400; ++k) grid.push_back(5.0 * tau_low * k / 400.0);
        const auto g2 = g2_ode(r, grid).values;
        // One-parameter least squares of 1 - exp(-t / tau).
        auto sse = [&](double log_tau) {
            const double tau = std::exp(log_tau);
            double s = 0.0;
            for (std::size_t k = 0; k < grid.size(); ++k) {
                const double d = g2[k] + std::expm1(-grid[k] / tau);
                s += d * d;
            }
            return s;
        };
        const auto best = boost::math::tools::brent_find_minima(
            sse, std::log(tau_low) - 2.0, std::log(tau_low) + 2.0, 50);
        const double fitted = std::exp(best.first);
        worst_fit = std::max(worst_fit, std::abs(fitted / tau_low - 1.0));
        const double half = half_rise_time(r);
        worst_half = std::max(worst_half, std::abs(half / (std::numbers::ln2 * tau_low) - 1.0));
    }
    report(5, worst_fit < 0.02 && worst_half < 0.02,
           fmt("max(C_n, C_p) <= gamma0 / 100: single-exponential fit off by %.3f%%, half-rise "
               "off by %.3f%% (< 2%%)",
               100.0 * worst_fit, 100.0 * worst_half));
}

struct DeviceRun {
    DeviceSpec spec;
    Mesh1D mesh;
    std::vector<SweepPoint> sweep;
    std::vector<Environment> probes;
    double seconds = 0.0;
};

DeviceRun device_sweep()
{
    DeviceRun run;
    run.spec = DeviceSpec::diamond_pin();
    std::vector<double> biases;
    for (int i = 0; i < 50; ++i) biases.push_back(5.5 * i / 49.0);
    const auto t0 = Clock::now();
    run.mesh = build_mesh(run.spec);
    run.sweep = iv_sweep(run.spec, run.mesh, biases);
    run.seconds = seconds_since(t0);
    for (const auto& pt : run.sweep) run.probes.push_back(probe(pt.state, run.spec));
    return run;
}

void device_trends(const DeviceRun& run)
{
    CenterModel c = reference_center();
    c.eta = 0.78;
    std::vector<double> J, tau2;
    for (std::size_t i = 0; i < run.sweep.size(); ++i) {
        J.push_back(run.sweep[i].J);
        tau2.push_back(char_times_closed_form(assemble_rates(c, run.probes[i])).tau2.real());
    }
    bool decreasing = true;
    for (std::size_t i = 1; i < J.size(); ++i)
        decreasing = decreasing && J[i] > J[i - 1] && tau2[i] < tau2[i - 1];
    const double J_max = J.back();
    double lo = INFINITY, hi = 0.0;
    for (std::size_t i = 0; i < J.size(); ++i) {
        if (J[i] < 0.1 * J_max) continue;
        lo = std::min(lo, tau2[i] * J[i]);
        hi = std::max(hi, tau2[i] * J[i]);
    }
    const double spread = hi / lo;
    const bool pass = decreasing && spread < 2.0 && run.seconds < 300.0;
    report(6, pass,
           fmt("tau2 strictly decreasing in J: %s; tau2*J over the top decade varies by %.2fx "
               "(< 2); 50-point sweep at %zu nodes took %.1f s",
               decreasing ? "yes" : "no", spread, run.mesh.size(), run.seconds));
}

void device_conservation(const DeviceRun& run)
{
    double worst_spread = 0.0;
    for (const auto& pt : run.sweep) worst_spread = std::max(worst_spread, pt.state.current_spread());
    const double J_max = run.sweep.back().J;
    const double J0 = std::abs(run.sweep.front().J);

    const auto eq = solve_equilibrium(run.spec, run.mesh);
    double net = 0.0, ionized = 0.0;
    for (std::size_t k = 0; k + 1 < eq.x.size(); ++k) {
        const double h = eq.x[k + 1] - eq.x[k];
        auto rho = [&](std::size_t i) {
            return eq.p[i] - eq.n[i] + eq.donors_ionized[i] - eq.acceptors_ionized[i];
        };
        net += 0.5 * h * (rho(k) + rho(k + 1));
        ionized += 0.5 * h *
                   (eq.donors_ionized[k] + eq.donors_ionized[k + 1] + eq.acceptors_ionized[k] +
                    eq.acceptors_ionized[k + 1]);
    }
    const double balance = std::abs(net) / ionized;
    const bool pass = worst_spread < 1e-3 && J0 <= 1e-12 * J_max && balance < 1e-6;
    report(7, pass,
           fmt("max nodal current spread %.2e (< 1e-3), |J(0 V)| / J_max = %.1e (< 1e-12), "
               "equilibrium charge imbalance %.1e (< 1e-6)",
               worst_spread, J0 / J_max, balance));
}

void three_level_reduction(const DeviceRun& run)
{
    ThreeLevelModel m;
    m.sigma_n = 1e-15;
    m.sigma_p = 3.2e-14;
    m.tau_r = 17e-9;
    m.tau_nr = 60.27e-9;

    double worst_g2 = 0.0;
    m.tau_s = 1e-3 * m.tau0();
    for (double n : {1e12, 1e14, 1e16, 1e18}) {
        for (double p : {1e12, 1e14, 1e16, 1e18}) {
            const auto env = env_at(n, p);
            const auto r = assemble_rates(m.two_level(), env);
            const auto grid = delay_grid(char_times_eigen(r).tau2.real());
            const auto two = g2_ode(r, grid).values;
            const auto three = g2_three_level(m, env, grid).values;
            for (std::size_t k = 0; k < grid.size(); ++k)
                worst_g2 = std::max(worst_g2, std::abs(three[k] - two[k]));
        }
    }

    m.tau_s = 3e-9;
    double worst_half = 0.0;
    std::size_t points = 0;
    for (std::size_t i = 0; i < run.sweep.size(); ++i) {
        if (!(run.sweep[i].J > 0.0)) continue;
        const auto& env = run.probes[i];
        const double two = half_rise_time(assemble_rates(m.two_level(), env));
        const double three = half_rise_time_3l(m, env);
        worst_half = std::max(worst_half, std::abs(three - two) / two);
        ++points;
    }
    report(8, worst_g2 < 1e-3 && worst_half < 0.1 && points > 0,
           fmt("tau_s = 1e-3 tau0: max |g2_3 - g2_2| = %.2e (< 1e-3); tau_s = 3 ns over %zu "
               "device probe points: max half-rise difference %.2e (< 10%%)",
               worst_g2, points, worst_half));
}

struct FitTruth {
    double a, t1, t2;
};

std::vector<double> fit_grid(const FitTruth& c)
{
    std::vector<double> t;
    for (int i = 0; i < 200; ++i) t.push_back(10.0 * c.t2 * i / 199.0);
    return t;
}

// Largest relative standard deviation any unbiased estimator can reach:
// sqrt(diag((J^T J)^-1)) * noise / parameter at the truth.
double cramer_rao(const FitTruth& c, double noise)
{
    Eigen::MatrixXd J(200, 3);
    const auto t = fit_grid(c);
    for (int i = 0; i < 200; ++i) {
        const double e1 = std::exp(-t[i] / c.t1), e2 = std::exp(-t[i] / c.t2);
        J(i, 0) = e1 - e2;
        J(i, 1) = c.a * e1 * t[i] / (c.t1 * c.t1);
        J(i, 2) = -(1.0 + c.a) * e2 * t[i] / (c.t2 * c.t2);
    }
    const Eigen::Matrix3d cov = (J.transpose() * J).inverse() * noise * noise;
    const double p[3] = {c.a, c.t1, c.t2};
    double worst = 0.0;
    for (int k = 0; k < 3; ++k) worst = std::max(worst, std::sqrt(cov(k, k)) / std::abs(p[k]));
    return worst;
}

double fit_error(const FitTruth& c, double noise, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto t = fit_grid(c);
    std::vector<double> y;
    for (double tau : t)
        y.push_back(1.0 + c.a * std::exp(-tau / c.t1) - (1.0 + c.a) * std::exp(-tau / c.t2) +
                    noise * gauss(rng));
    const auto res = fit_g2(t, y, initial_guess(t, y));
    return std::max({std::abs(res.a / c.a - 1.0), std::abs(res.tau1 / c.t1 - 1.0),
                     std::abs(res.tau2 / c.t2 - 1.0)});
}

void fit_round_trip()
{
    const FitTruth cases[] = {{2.0, 5e-9, 30e-9}, {1.0, 2e-9, 20e-9}, {3.0, 10e-9, 40e-9},
                              {0.4, 2e-10, 4e-9}, {0.05, 3e-11, 6e-10}};
    double worst_clean = 0.0, worst_noisy = 0.0;
    int noisy_cases = 0, excluded = 0;
    std::uint64_t seed = 1;
    for (const auto& c : cases) {
        worst_clean = std::max(worst_clean, fit_error(c, 0.0, 0));
        // 5% must be at least three bound standard deviations to be attainable.
        if (cramer_rao(c, 0.01) > 0.05 / 3.0) {
            ++excluded;
            continue;
        }
        ++noisy_cases;
        for (int rep = 0; rep < 20; ++rep) worst_noisy = std::max(worst_noisy, fit_error(c, 0.01, seed++));
    }
    report(9, worst_clean < 1e-6 && worst_noisy < 0.05 && noisy_cases >= 2,
           fmt("noiseless max relative error %.1e over %zu cases (< 1e-6); 1%% noise, 200 points, "
               "%d cases x 20 draws: %.2f%% (< 5%%); %d cases skipped whose Cramer-Rao bound "
               "exceeds 5%%/3",
               worst_clean, std::size(cases), noisy_cases, 100.0 * worst_noisy, excluded));
}

void response_vs_recharge()
{
    const CenterModel c = reference_center();
    double worst_ratio = INFINITY, worst_sigma = 0.0;
    std::uint64_t seed = 11;
    for (double n : {1e10, 1e11, 1e12}) {
        const auto r = assemble_rates(c, env_at(n, n));
        const double resp = mean_first_emission(r, 1.0, ChargeState::nv_minus_ground);
        worst_ratio = std::min(worst_ratio, (1.0 / r.C_n) / resp);
        const auto s = first_emission_samples(r, 1.0, ChargeState::nv_minus_ground, 20000, seed++);
        worst_sigma = std::max(worst_sigma, std::abs(s.mean - resp) / s.std_error);
    }
    report(10, worst_ratio >= 10.0 && worst_sigma < 3.0,
           fmt("n = p in [1e10, 1e12]: 1/C_n is at least %.1fx the mean first emission (>= 10); "
               "sampled mean within %.2f standard errors (< 3)",
               worst_ratio, worst_sigma));
}

} // namespace

int main()
{
    run(1, characteristic_time_anchor);
    run(2, three_routes_agree);
    run(3, monte_carlo_equivalence);
    run(4, bunching_bound);
    run(5, low_injection_limit);

    DeviceRun device;
    bool have_device = false;
    try {
        device = device_sweep();
        have_device = true;
    } catch (const std::exception& e) {
        for (int id : {6, 7, 8}) report(id, false, std::string("device sweep failed: ") + e.what());
    }
    if (have_device) {
        run(6, [&] { device_trends(device); });
        run(7, [&] { device_conservation(device); });
        run(8, [&] { three_level_reduction(device); });
    }
    run(9, fit_round_trip);
    run(10, response_vs_recharge);

    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
