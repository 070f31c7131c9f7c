#pragma once

#include "epcc/kinetics.hpp"
#include "epcc/markov.hpp"

#include <span>

namespace epcc {

/// Charge cycle with a dark shelving level below the NV0 excited state.
struct ThreeLevelModel {
    double tau_r = 17e-9;   // s, radiative lifetime
    double tau_nr = 0.0;    // s, excited -> shelving
    double tau_s = 0.0;     // s, shelving -> NV0 ground
    double sigma_n = 1e-15; // cm^2
    double sigma_p = 3.2e-14;
    double e_n = 0.0;
    double e_p = 0.0;
    double e_r = 0.0;
    bool shelving_capture = false; // electron capture out of the shelving level

    double eta() const { return tau_nr / (tau_r + tau_nr); }
    double tau0() const { return 1.0 / (1.0 / tau_r + 1.0 / tau_nr); }
    void validate() const;

    /// Two-level center with the same capture and the implied efficiency.
    CenterModel two_level() const;
};

struct Populations4 {
    double x_e = 0.0;
    double x_s = 0.0;
    double f = 0.0;
    double g = 0.0;
};

namespace three_level {
inline constexpr int g = 0;   // NV- ground
inline constexpr int f = 1;   // NV0 ground
inline constexpr int x_e = 2; // NV0 excited
inline constexpr int x_s = 3; // NV0 shelving

/// Only the radiative channel is marked as a photon.
markov::Chain chain(const ThreeLevelModel& model, const Environment& env);
} // namespace three_level

Populations4 steady_state_3l(const ThreeLevelModel& model, const Environment& env);

/// Radiative photons per second, x_e / tau_r.
double emission_rate_3l(const Populations4& pops, const ThreeLevelModel& model);

G2Curve g2_three_level(const ThreeLevelModel& model, const Environment& env,
                       std::span<const double> taus);

double half_rise_time_3l(const ThreeLevelModel& model, const Environment& env);

} // namespace epcc
