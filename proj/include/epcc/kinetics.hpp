#pragma once

#include "epcc/markov.hpp"

#include <complex>
#include <optional>
#include <span>
#include <vector>

namespace epcc {

/// Intrinsic emitter parameters of the two-level charge cycle.
struct CenterModel {
    double sigma_n = 1e-15;   // cm^2
    double sigma_p = 3.2e-14; // cm^2
    double tau_r = 17e-9;     // s
    double eta = 0.3;
    double e_n = 0.0;         // s^-1
    double e_p = 0.0;         // s^-1
    double e_r = 0.0;         // s^-1
    std::optional<double> c_n; // cm^3/s, overrides sigma_n * <v_n>
    std::optional<double> c_p; // cm^3/s, overrides sigma_p * <v_p>

    double tau0() const { return eta * tau_r; }
    void validate() const;
};

/// Carrier environment at the emitter.
struct Environment {
    double n = 0.0;       // cm^-3
    double p = 0.0;       // cm^-3
    double T = 300.0;     // K
    double m_eff_n = 0.57;
    double m_eff_p = 0.80;

    void validate() const;
};

/// Transition rates of the two-level model, all in s^-1.
struct RateSet {
    double C_n = 0.0;
    double C_p = 0.0;
    double e_n = 0.0;
    double e_p = 0.0;
    double e_r = 0.0;
    double gamma0 = 0.0;

    void validate() const;
    RateSet scaled(double k) const;
};

struct Populations {
    double x = 0.0; // NV0 excited
    double f = 0.0; // NV0 ground
    double g = 0.0; // NV- ground
};

struct CharTimes {
    std::complex<double> tau1;
    std::complex<double> tau2;
    std::complex<double> a;
};

struct G2Curve {
    std::vector<double> taus;
    std::vector<double> values;
};

enum class ChargeState { nv_minus_ground, nv0_ground, nv0_excited };

/// Mean thermal speed sqrt(8 kT / (pi m)), cm/s.
double thermal_velocity(double T, double m_eff);

/// Detailed-balance emission constant c * N_band * exp(-dE / kT), s^-1.
double emission_constant(double capture_constant, double band_dos, double level_depth_eV,
                         double T);

RateSet assemble_rates(const CenterModel& center, const Environment& env);

/// Unique fixed point of the rate equations (matrix-tree form, no
/// cancellation). Throws NoEmission when the excited state is unreachable.
Populations steady_state(const RateSet& rates);

/// Radiative decays per second, x / tau_r.
double emission_rate(const Populations& pops, const CenterModel& center);

CharTimes char_times_closed_form(const RateSet& rates);

/// Independent route: eigenvalues and spectral projection of the 2x2 system
/// matrix, evaluated in extended precision.
CharTimes char_times_eigen(const RateSet& rates);

G2Curve g2_analytic(const CharTimes& times, std::span<const double> taus);
G2Curve g2_ode(const RateSet& rates, std::span<const double> taus);
G2Curve g2_low_injection(const RateSet& rates, std::span<const double> taus);

double half_rise_time(const RateSet& rates);

double mean_first_emission(const RateSet& rates, double eta, ChargeState start);

/// Largest g2 value over all delays.
double g2_max(const RateSet& rates);

/// Log-spaced delays from lo_factor * tau_ref to hi_factor * tau_ref with
/// tau = 0 prepended.
std::vector<double> delay_grid(double tau_ref, std::size_t points = 200, double lo_factor = 1e-3,
                               double hi_factor = 1e3);

namespace two_level {
inline constexpr int g = 0; // NV- ground
inline constexpr int f = 1; // NV0 ground
inline constexpr int x = 2; // NV0 excited

/// The charge cycle as a Markov chain; every excited-state decay is marked
/// as a photon.
markov::Chain chain(const RateSet& rates);

/// As above with the decay split into a radiative (photon) channel of
/// weight eta and a dark channel.
markov::Chain chain(const RateSet& rates, double eta);

int state_index(ChargeState s);
} // namespace two_level

namespace detail {
/// Smallest tau > 0 with g2(tau) = 1/2 for a curve rising from 0. The scan
/// starts at `tau_start` and grows geometrically; the bracket is refined by
/// bisection to 1e-10 relative.
template <class F>
double half_rise(F&& g2, double tau_start);
} // namespace detail

} // namespace epcc

#include "epcc/detail/half_rise.hpp"
