#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace epcc::markov {

struct Transition {
    int from;
    int to;
    double rate;          // s^-1
    bool photon = false;  // a photon is recorded when this channel fires
};

/// Finite continuous-time Markov chain given as a list of channels.
struct Chain {
    int n_states = 0;
    std::vector<Transition> transitions;

    double exit_rate(int state) const;
    double rate(int from, int to) const;
};

/// Stationary distribution by Grassmann-Taksar-Heyman elimination.
///
/// Subtraction-free, so every component carries full relative accuracy
/// even when it is many orders of magnitude below the others. Throws
/// NoEmission if elimination meets a state with no path back to the
/// lower-numbered states (reducible chain).
std::vector<double> stationary(const Chain& chain);

/// Populations at each delay after starting in `start` with certainty.
///
/// The generator is balanced by the stationary distribution `pi` before
/// exponentiation, which bounds every matrix entry by the largest exit rate
/// and keeps ratios p_i(t)/pi_i accurate for rare states. The result holds
/// p(t)/pi componentwise: entry [k][i] = p_i(taus[k]) / pi[i].
std::vector<std::vector<double>> relative_occupation(const Chain& chain,
                                                     std::span<const double> pi,
                                                     int start,
                                                     std::span<const double> taus);

/// Expected time until a photon channel fires, starting in `start`.
///
/// Photon channels are treated as absorbing; throws NoEmission if no photon
/// channel is reachable from `start`.
double mean_time_to_photon(const Chain& chain, int start);

} // namespace epcc::markov
