#include "epcc/stochastic.hpp"

#include "epcc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace epcc {

namespace {

constexpr const char* engine_name = "std::mt19937_64";

// Uniform on (0, 1]; never returns 0, so -log(u) is always finite. Written
// out instead of std::uniform_real_distribution to keep streams identical
// across standard library implementations.
class Stream {
  public:
    explicit Stream(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53; }
    double exponential(double rate) { return -std::log(uniform()) / rate; }

  private:
    std::mt19937_64 engine_;
};

struct Channel {
    int to;
    double cumulative; // running sum of rates out of the state
    bool photon;
};

struct Table {
    std::vector<std::vector<Channel>> out;
    std::vector<double> exit;
};

Table tabulate(const markov::Chain& chain)
{
    Table t;
    t.out.resize(chain.n_states);
    t.exit.assign(chain.n_states, 0.0);
    for (const auto& tr : chain.transitions) {
        if (tr.rate <= 0.0 || tr.from == tr.to)
            continue;
        t.exit[tr.from] += tr.rate;
        t.out[tr.from].push_back({tr.to, t.exit[tr.from], tr.photon});
    }
    return t;
}

const Channel& pick(const std::vector<Channel>& channels, double total, Stream& rng)
{
    const double target = rng.uniform() * total;
    for (const auto& c : channels)
        if (target <= c.cumulative)
            return c;
    return channels.back();
}

} // namespace

PhotonRecord simulate(const markov::Chain& chain, const TrajectoryConfig& config)
{
    if (!(config.duration > 0.0) || !std::isfinite(config.duration))
        throw InvalidParameter("trajectory duration must be > 0");
    if (config.max_events == 0)
        throw InvalidParameter("max_events must be > 0");

    const auto pi = markov::stationary(chain);
    const Table table = tabulate(chain);
    Stream rng(config.seed);

    PhotonRecord rec;
    rec.duration = config.duration;
    rec.seed = config.seed;
    rec.generator = engine_name;
    rec.occupancy.assign(chain.n_states, 0.0);

    int state = chain.n_states - 1;
    {
        const double u = rng.uniform();
        double acc = 0.0;
        for (int i = 0; i < chain.n_states; ++i) {
            acc += pi[i];
            if (u <= acc) {
                state = i;
                break;
            }
        }
    }

    double t = 0.0;
    std::uint64_t events = 0;
    for (;;) {
        const double q = table.exit[state];
        const double dt = q > 0.0 ? rng.exponential(q) : INFINITY;
        if (t + dt >= config.duration) {
            rec.occupancy[state] += config.duration - t;
            break;
        }
        if (++events > config.max_events)
            throw EventCapExceeded("reached " + std::to_string(config.max_events) +
                                   " transitions at t = " + std::to_string(t) + " s");
        rec.occupancy[state] += dt;
        t += dt;
        const Channel& c = pick(table.out[state], q, rng);
        if (c.photon && (rec.timestamps.empty() || t > rec.timestamps.back()))
            rec.timestamps.push_back(t);
        state = c.to;
    }
    return rec;
}

PhotonRecord simulate(const RateSet& rates, const TrajectoryConfig& config)
{
    rates.validate();
    return simulate(two_level::chain(rates), config);
}

PhotonRecord simulate(const ThreeLevelModel& model, const Environment& env,
                      const TrajectoryConfig& config)
{
    return simulate(three_level::chain(model, env), config);
}

PhotonRecord thin(const PhotonRecord& record, double keep, std::uint64_t seed)
{
    if (!(keep > 0.0 && keep <= 1.0))
        throw InvalidParameter("keep probability must lie in (0, 1]");
    Stream rng(seed);
    PhotonRecord out = record;
    out.timestamps.clear();
    for (double t : record.timestamps)
        if (rng.uniform() <= keep)
            out.timestamps.push_back(t);
    return out;
}

CorrelationEstimate correlate(const PhotonRecord& record, double bin_width, double max_delay,
                              std::uint64_t min_pairs)
{
    if (!(bin_width > 0.0) || !(max_delay >= bin_width))
        throw InvalidParameter("need 0 < bin_width <= max_delay");
    if (!(max_delay < record.duration))
        throw InvalidParameter("max_delay must be shorter than the record");
    const auto& ts = record.timestamps;
    if (ts.size() < 2)
        throw InsufficientData("record holds fewer than two photons");

    // A ratio a rounding error short of an integer keeps its last bin.
    const double ratio = max_delay / bin_width;
    const auto bins = static_cast<std::size_t>(std::floor(ratio * (1.0 + 1e-12)));
    const double span = bins * bin_width;
    CorrelationEstimate est;
    est.counts.assign(bins, 0);
    std::uint64_t pairs = 0;
    std::size_t hi = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        hi = std::max(hi, i + 1);
        while (hi < ts.size() && ts[hi] - ts[i] < span)
            ++hi;
        for (std::size_t j = i + 1; j < hi; ++j) {
            const auto b = static_cast<std::size_t>((ts[j] - ts[i]) / bin_width);
            if (b < bins) {
                ++est.counts[b];
                ++pairs;
            }
        }
    }
    if (pairs < min_pairs)
        throw InsufficientData(std::to_string(pairs) + " photon pairs within max_delay, need " +
                               std::to_string(min_pairs));

    const double T = record.duration;
    const double rate = static_cast<double>(ts.size()) / T;
    est.bin_edges.resize(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b)
        est.bin_edges[b] = b * bin_width;
    est.g2.resize(bins);
    est.std_error.resize(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        const double norm = rate * rate * bin_width * (T - est.center(b));
        const double c = static_cast<double>(est.counts[b]);
        est.g2[b] = c / norm;
        est.std_error[b] = std::sqrt(std::max(c, 1.0)) / norm;
    }
    return est;
}

SampleMean first_emission_samples(const RateSet& rates, double eta, ChargeState start,
                                  std::size_t n_samples, std::uint64_t seed)
{
    rates.validate();
    if (n_samples < 2)
        throw InvalidParameter("need at least two samples");
    const auto chain = two_level::chain(rates, eta);
    // Reachability and certainty of emission.
    mean_first_emission(rates, eta, start);
    const Table table = tabulate(chain);
    Stream rng(seed);

    double mean = 0.0, m2 = 0.0;
    for (std::size_t k = 0; k < n_samples; ++k) {
        int state = two_level::state_index(start);
        double t = 0.0;
        for (;;) {
            const double q = table.exit[state];
            t += rng.exponential(q);
            const Channel& c = pick(table.out[state], q, rng);
            if (c.photon)
                break;
            state = c.to;
        }
        // Welford update.
        const double d = t - mean;
        mean += d / static_cast<double>(k + 1);
        m2 += d * (t - mean);
    }
    SampleMean s;
    s.mean = mean;
    s.samples = n_samples;
    s.std_error = std::sqrt(m2 / static_cast<double>(n_samples - 1) / static_cast<double>(n_samples));
    return s;
}

} // namespace epcc
