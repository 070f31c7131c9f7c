#pragma once

#include "epcc/device.hpp"
#include "epcc/kinetics.hpp"
#include "epcc/three_level.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace epcc {

struct SweepConfig {
    double n_min = 1e12, n_max = 1e18; // cm^-3
    std::size_t n_points = 25;
    double p_min = 1e12, p_max = 1e18; // cm^-3
    std::size_t p_points = 25;
    double V_max = 5.5;                // V, biases are 0..V_max
    std::size_t V_points = 50;
    std::size_t delay_points = 200;
    double delay_lo_factor = 1e-3;     // times Re(tau2)
    double delay_hi_factor = 1e3;

    void validate() const;
    std::vector<double> biases() const;
};

struct MonteCarloConfig {
    double duration = 0.0;      // s; 0 picks target_photons / emission rate
    double target_photons = 1e6;
    std::uint64_t seed = 1;
    double bin_width = 0.0;     // s; 0 picks Re(tau2) / 20
    double max_delay = 0.0;     // s; 0 picks 5 Re(tau2)
    std::uint64_t max_events = 100000000;

    void validate() const;
};

/// Everything a command can read from an INI file.
///
/// Sections: [center], [environment], [three_level], [material],
/// [layer.p], [layer.i], [layer.n], [device], [sweep], [monte_carlo].
/// Keys carry their unit as a suffix. Unknown sections or keys are
/// rejected with their path. Device keys not given fall back to the
/// diamond p-i-n defaults.
struct RunConfig {
    CenterModel center;
    Environment environment;
    std::optional<ThreeLevelModel> three_level;
    std::optional<DeviceSpec> device;
    SweepConfig sweep;
    MonteCarloConfig monte_carlo;

    void validate() const;
    const ThreeLevelModel& require_three_level() const;
    const DeviceSpec& require_device() const;
};

RunConfig parse_config(std::istream& in, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);

} // namespace epcc
