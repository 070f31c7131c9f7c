#include "epcc/three_level.hpp"

#include "epcc/errors.hpp"

#include <cmath>

namespace epcc {

void ThreeLevelModel::validate() const
{
    auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
    if (!positive(tau_r) || !positive(tau_nr) || !positive(tau_s))
        throw InvalidParameter("tau_r, tau_nr and tau_s must be > 0");
    two_level().validate();
}

CenterModel ThreeLevelModel::two_level() const
{
    CenterModel c;
    c.sigma_n = sigma_n;
    c.sigma_p = sigma_p;
    c.tau_r = tau_r;
    c.eta = eta();
    c.e_n = e_n;
    c.e_p = e_p;
    c.e_r = e_r;
    return c;
}

markov::Chain three_level::chain(const ThreeLevelModel& m, const Environment& env)
{
    m.validate();
    const RateSet r = assemble_rates(m.two_level(), env);
    markov::Chain c;
    c.n_states = 4;
    c.transitions = {
        {g, x_e, r.C_p, false},
        {g, f, r.e_n, false},
        {f, g, r.C_n, false},
        {f, x_e, r.e_r, false},
        {x_e, f, 1.0 / m.tau_r, true},
        {x_e, x_s, 1.0 / m.tau_nr, false},
        {x_e, g, r.e_p, false},
        {x_s, f, 1.0 / m.tau_s, false},
    };
    if (m.shelving_capture)
        c.transitions.push_back({x_s, g, r.C_n, false});
    return c;
}

Populations4 steady_state_3l(const ThreeLevelModel& model, const Environment& env)
{
    const auto pi = markov::stationary(three_level::chain(model, env));
    if (pi[three_level::x_e] == 0.0)
        throw NoEmission("no pumping path into the excited state");
    return {pi[three_level::x_e], pi[three_level::x_s], pi[three_level::f], pi[three_level::g]};
}

double emission_rate_3l(const Populations4& pops, const ThreeLevelModel& model)
{
    return pops.x_e / model.tau_r;
}

namespace {

std::vector<double> stationary_checked(const markov::Chain& c)
{
    auto pi = markov::stationary(c);
    if (pi[three_level::x_e] == 0.0)
        throw NoEmission("no pumping path into the excited state");
    return pi;
}

} // namespace

G2Curve g2_three_level(const ThreeLevelModel& model, const Environment& env,
                       std::span<const double> taus)
{
    const auto c = three_level::chain(model, env);
    const auto pi = stationary_checked(c);
    const auto rel = markov::relative_occupation(c, pi, three_level::f, taus);
    G2Curve out;
    out.taus.assign(taus.begin(), taus.end());
    for (const auto& row : rel)
        out.values.push_back(row[three_level::x_e]);
    return out;
}

double half_rise_time_3l(const ThreeLevelModel& model, const Environment& env)
{
    const auto c = three_level::chain(model, env);
    const auto pi = stationary_checked(c);
    double total = 0.0;
    for (int s = 0; s < c.n_states; ++s)
        total += c.exit_rate(s);
    auto g2 = [&](double tau) {
        const double t[1] = {tau};
        return markov::relative_occupation(c, pi, three_level::f, t)[0][three_level::x_e];
    };
    return detail::half_rise(g2, 1e-3 / total);
}

} // namespace epcc
