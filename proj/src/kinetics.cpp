#include "epcc/kinetics.hpp"

#include "epcc/constants.hpp"
#include "epcc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

namespace epcc {

namespace {

void require(bool ok, const std::string& what)
{
    if (!ok)
        throw InvalidParameter(what);
}

bool nonneg(double v) { return v >= 0.0 && std::isfinite(v); }
bool positive(double v) { return v > 0.0 && std::isfinite(v); }

// Sum of the nine spanning-tree products; equals det of the 2x2 system
// matrix and 1/(tau1 tau2).
double determinant(const RateSet& r)
{
    return r.C_p * r.C_n + r.C_p * r.e_r + r.e_p * r.e_n + r.e_p * r.C_n + r.e_p * r.e_r +
           r.gamma0 * r.e_n + r.gamma0 * r.C_n + r.e_r * r.e_n + r.C_p * r.gamma0;
}

double total_rate(const RateSet& r)
{
    return r.gamma0 + r.C_n + r.C_p + r.e_r + r.e_n + r.e_p;
}

} // namespace

void CenterModel::validate() const
{
    require(positive(sigma_n), "sigma_n must be > 0");
    require(positive(sigma_p), "sigma_p must be > 0");
    require(positive(tau_r), "tau_r must be > 0");
    require(eta > 0.0 && eta <= 1.0, "eta must lie in (0, 1]");
    require(nonneg(e_n) && nonneg(e_p) && nonneg(e_r), "emission constants must be >= 0");
    require(!c_n || nonneg(*c_n), "c_n override must be >= 0");
    require(!c_p || nonneg(*c_p), "c_p override must be >= 0");
}

void Environment::validate() const
{
    require(nonneg(n) && nonneg(p), "carrier densities must be >= 0");
    require(positive(T), "temperature must be > 0");
    require(positive(m_eff_n) && positive(m_eff_p), "effective masses must be > 0");
}

void RateSet::validate() const
{
    require(nonneg(C_n) && nonneg(C_p) && nonneg(e_n) && nonneg(e_p) && nonneg(e_r),
            "rates must be finite and >= 0");
    require(positive(gamma0), "gamma0 must be > 0");
}

RateSet RateSet::scaled(double k) const
{
    return {C_n * k, C_p * k, e_n * k, e_p * k, e_r * k, gamma0 * k};
}

double thermal_velocity(double T, double m_eff)
{
    using namespace constants;
    return 100.0 * std::sqrt(8.0 * k_B * T / (pi * m_eff * m0));
}

double emission_constant(double capture_constant, double band_dos, double level_depth_eV,
                         double T)
{
    require(nonneg(capture_constant) && nonneg(band_dos) && nonneg(level_depth_eV) && positive(T),
            "emission constant inputs must be >= 0 (T > 0)");
    return capture_constant * band_dos * std::exp(-level_depth_eV / (constants::k_B_eV * T));
}

RateSet assemble_rates(const CenterModel& center, const Environment& env)
{
    center.validate();
    env.validate();
    const double c_n = center.c_n ? *center.c_n : center.sigma_n * thermal_velocity(env.T, env.m_eff_n);
    const double c_p = center.c_p ? *center.c_p : center.sigma_p * thermal_velocity(env.T, env.m_eff_p);
    RateSet r;
    r.C_n = c_n * env.n;
    r.C_p = c_p * env.p;
    r.e_n = center.e_n;
    r.e_p = center.e_p;
    r.e_r = center.e_r;
    r.gamma0 = 1.0 / center.tau0();
    return r;
}

Populations steady_state(const RateSet& r)
{
    r.validate();
    const double wx = r.C_p * r.C_n + r.C_p * r.e_r + r.e_n * r.e_r;
    const double wf = r.gamma0 * (r.e_n + r.C_p) + r.e_n * r.e_p;
    const double wg = r.C_n * (r.e_p + r.gamma0) + r.e_p * r.e_r;
    if (wx == 0.0)
        throw NoEmission("no pumping path into the excited state");
    const double total = wx + wf + wg;
    return {wx / total, wf / total, wg / total};
}

double emission_rate(const Populations& pops, const CenterModel& center)
{
    return pops.x / center.tau_r;
}

CharTimes char_times_closed_form(const RateSet& r)
{
    r.validate();
    using cd = std::complex<double>;
    const double S = total_rate(r);
    const double bracket = r.C_n - r.C_p - r.gamma0 + r.e_n + r.e_r - r.e_p;
    const double cross = r.C_p * r.gamma0 - (r.C_p * r.e_n + r.e_r * r.gamma0 - r.e_n * r.e_r);
    const cd root = std::sqrt(cd(bracket * bracket - 4.0 * cross, 0.0));
    const double det = determinant(r);

    CharTimes t;
    t.tau1 = 2.0 / (S + root);
    // '-' branch in conjugate form: 2/(S - root) = (S + root)/(2 det).
    t.tau2 = (S + root) / (2.0 * det);
    // tau2 - tau1 = root * tau1 * tau2 = root / det, free of cancellation.
    const cd gap = root / det;
    if (std::abs(gap) < 1e-9 * std::abs(t.tau2))
        throw Degenerate("tau1 and tau2 coincide; use the ODE route");

    const double denom = r.C_n * r.C_p + (r.C_p + r.e_n) * r.e_r;
    cd shift = 0.0;
    if (r.e_r > 0.0) {
        if (denom == 0.0)
            throw NoEmission("no pumping path into the excited state");
        shift = r.e_r / denom;
    }
    t.a = (t.tau1 - shift) / gap;
    return t;
}

G2Curve g2_analytic(const CharTimes& times, std::span<const double> taus)
{
    if (!(times.tau1.real() > 0.0) || !(times.tau2.real() > 0.0))
        throw InvalidParameter("characteristic times need positive real parts");
    const auto a = times.a;
    const double tol = 1e-9 * (1.0 + std::abs(a) + std::abs(1.0 + a));
    G2Curve out;
    out.taus.assign(taus.begin(), taus.end());
    out.values.reserve(taus.size());
    for (double tau : taus) {
        const double at = std::abs(tau);
        const auto v = 1.0 + a * std::exp(-at / times.tau1) - (1.0 + a) * std::exp(-at / times.tau2);
        if (std::abs(v.imag()) > tol)
            throw ComplexResidual("imaginary part " + std::to_string(v.imag()) + " at tau = " +
                                  std::to_string(tau));
        out.values.push_back(v.real());
    }
    return out;
}

markov::Chain two_level::chain(const RateSet& r)
{
    markov::Chain c;
    c.n_states = 3;
    c.transitions = {
        {g, x, r.C_p, false}, {g, f, r.e_n, false}, {f, g, r.C_n, false},
        {f, x, r.e_r, false}, {x, f, r.gamma0, true}, {x, g, r.e_p, false},
    };
    return c;
}

markov::Chain two_level::chain(const RateSet& r, double eta)
{
    require(eta > 0.0 && eta <= 1.0, "eta must lie in (0, 1]");
    markov::Chain c;
    c.n_states = 3;
    c.transitions = {
        {g, x, r.C_p, false}, {g, f, r.e_n, false},
        {f, g, r.C_n, false}, {f, x, r.e_r, false},
        {x, f, eta * r.gamma0, true}, {x, f, (1.0 - eta) * r.gamma0, false},
        {x, g, r.e_p, false},
    };
    return c;
}

int two_level::state_index(ChargeState s)
{
    switch (s) {
    case ChargeState::nv_minus_ground: return g;
    case ChargeState::nv0_ground: return f;
    case ChargeState::nv0_excited: return x;
    }
    throw InvalidParameter("unknown charge state");
}

G2Curve g2_ode(const RateSet& r, std::span<const double> taus)
{
    const Populations ss = steady_state(r);
    const std::vector<double> pi{ss.g, ss.f, ss.x};
    const auto rel = markov::relative_occupation(two_level::chain(r), pi, two_level::f, taus);
    G2Curve out;
    out.taus.assign(taus.begin(), taus.end());
    out.values.reserve(taus.size());
    for (const auto& row : rel)
        out.values.push_back(row[two_level::x]);
    return out;
}

G2Curve g2_low_injection(const RateSet& r, std::span<const double> taus)
{
    r.validate();
    const double k = r.C_n + r.C_p;
    G2Curve out;
    out.taus.assign(taus.begin(), taus.end());
    out.values.reserve(taus.size());
    for (double tau : taus)
        out.values.push_back(-std::expm1(-k * std::abs(tau)));
    return out;
}

double half_rise_time(const RateSet& r)
{
    const Populations ss = steady_state(r);
    const std::vector<double> pi{ss.g, ss.f, ss.x};
    const auto chain = two_level::chain(r);
    auto g2 = [&](double tau) {
        const double t[1] = {tau};
        return markov::relative_occupation(chain, pi, two_level::f, t)[0][two_level::x];
    };
    return detail::half_rise(g2, 1e-3 / total_rate(r));
}

double mean_first_emission(const RateSet& r, double eta, ChargeState start)
{
    r.validate();
    return markov::mean_time_to_photon(two_level::chain(r, eta), two_level::state_index(start));
}

std::vector<double> delay_grid(double tau_ref, std::size_t points, double lo_factor,
                               double hi_factor)
{
    require(positive(tau_ref), "delay grid reference time must be > 0");
    require(positive(lo_factor) && hi_factor > lo_factor, "delay grid needs 0 < lo < hi");
    require(points >= 2, "delay grid needs at least two points");
    std::vector<double> grid{0.0};
    const double l0 = std::log(lo_factor * tau_ref);
    const double l1 = std::log(hi_factor * tau_ref);
    for (std::size_t i = 0; i < points; ++i)
        grid.push_back(std::exp(l0 + (l1 - l0) * static_cast<double>(i) / (points - 1)));
    return grid;
}

double g2_max(const RateSet& r)
{
    r.validate();
    std::function<double(double)> g2;
    double t_lo, t_hi;
    CharTimes ct;
    bool analytic = true;
    try {
        ct = char_times_closed_form(r);
    } catch (const Degenerate&) {
        analytic = false;
    }
    const Populations ss = steady_state(r);
    const std::vector<double> pi{ss.g, ss.f, ss.x};
    const auto chain = two_level::chain(r);
    if (analytic) {
        g2 = [&](double tau) {
            const double t[1] = {tau};
            return g2_analytic(ct, t).values[0];
        };
        t_lo = 1e-3 * std::min(std::abs(ct.tau1), std::abs(ct.tau2));
        t_hi = 1e3 * std::max(std::abs(ct.tau1), std::abs(ct.tau2));
    } else {
        g2 = [&](double tau) {
            const double t[1] = {tau};
            return markov::relative_occupation(chain, pi, two_level::f, t)[0][two_level::x];
        };
        t_lo = 1e-3 * 2.0 / total_rate(r);
        t_hi = 1e3 * 2.0 / total_rate(r);
    }

    constexpr int n = 400;
    const double step = std::log(t_hi / t_lo) / (n - 1);
    int best = 0;
    double best_v = -1.0;
    for (int i = 0; i < n; ++i) {
        const double v = g2(t_lo * std::exp(step * i));
        if (v > best_v) {
            best_v = v;
            best = i;
        }
    }
    // Golden-section refinement in log tau around the best sample.
    double a = std::log(t_lo) + step * std::max(best - 1, 0);
    double b = std::log(t_lo) + step * std::min(best + 1, n - 1);
    const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - ratio * (b - a);
    double d = a + ratio * (b - a);
    double fc = g2(std::exp(c));
    double fd = g2(std::exp(d));
    for (int it = 0; it < 60; ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = g2(std::exp(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = g2(std::exp(d));
        }
    }
    return std::max({best_v, fc, fd, 1.0});
}

} // namespace epcc
