#pragma once

#include "epcc/kinetics.hpp"
#include "epcc/markov.hpp"
#include "epcc/three_level.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace epcc {

struct TrajectoryConfig {
    double duration = 1e-3;              // s
    std::uint64_t seed = 1;
    std::uint64_t max_events = 100000000; // transitions
};

struct PhotonRecord {
    std::vector<double> timestamps; // s, strictly increasing
    double duration = 0.0;          // s
    std::uint64_t seed = 0;
    std::string generator;          // random engine used
    std::vector<double> occupancy;  // time spent in each chain state, s
};

struct CorrelationEstimate {
    std::vector<double> bin_edges; // s, size = bins + 1
    std::vector<double> g2;
    std::vector<double> std_error;
    std::vector<std::uint64_t> counts;

    std::size_t bins() const { return g2.size(); }
    double center(std::size_t i) const { return 0.5 * (bin_edges[i] + bin_edges[i + 1]); }
};

/// Gillespie simulation of a chain started from its stationary
/// distribution; a timestamp is recorded whenever a photon channel fires.
PhotonRecord simulate(const markov::Chain& chain, const TrajectoryConfig& config);

/// Two-level model; every excited-state decay counts as a photon.
PhotonRecord simulate(const RateSet& rates, const TrajectoryConfig& config);

/// Three-level model; only radiative decays count.
PhotonRecord simulate(const ThreeLevelModel& model, const Environment& env,
                      const TrajectoryConfig& config);

/// Keeps each timestamp independently with probability `keep`.
PhotonRecord thin(const PhotonRecord& record, double keep, std::uint64_t seed);

/// Normalized coincidence histogram over all ordered photon pairs.
///
/// Bins of width `bin_width` cover [0, max_delay). Counts are normalized by
/// r^2 T w (T - tau_c) / T with r = N / T. The standard error is Poisson,
/// sqrt(max(C, 1)) over the same normalization, so an empty bin still
/// reports the resolution of a single count. Throws InsufficientData when
/// fewer than `min_pairs` pairs fall inside max_delay.
CorrelationEstimate correlate(const PhotonRecord& record, double bin_width, double max_delay,
                              std::uint64_t min_pairs = 100);

struct SampleMean {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
};

/// Repeated first-passage runs from `start` until the first radiative decay.
SampleMean first_emission_samples(const RateSet& rates, double eta, ChargeState start,
                                  std::size_t n_samples, std::uint64_t seed);

} // namespace epcc
