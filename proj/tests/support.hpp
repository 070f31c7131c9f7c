#pragma once

#include "epcc/kinetics.hpp"

#include <cmath>
#include <random>

namespace test_support {

/// Rates log-uniform in [lo, hi]; each emission term is zero with
/// probability 1/2.
inline epcc::RateSet random_rates(std::mt19937_64& rng, double lo = 1e3, double hi = 1e12)
{
    std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
    std::bernoulli_distribution coin(0.5);
    auto draw = [&] { return std::exp(u(rng)); };
    epcc::RateSet r;
    r.C_n = draw();
    r.C_p = draw();
    r.gamma0 = draw();
    r.e_n = coin(rng) ? 0.0 : draw();
    r.e_p = coin(rng) ? 0.0 : draw();
    r.e_r = coin(rng) ? 0.0 : draw();
    return r;
}

inline double rel_diff(std::complex<double> a, std::complex<double> b)
{
    return std::abs(a - b) / std::max(std::abs(a), std::abs(b));
}

/// Right-hand side of the two-level rate equations.
inline void rate_rhs(const epcc::RateSet& r, double x, double f, double& dx, double& df)
{
    const double g = 1.0 - x - f;
    dx = r.C_p * g - r.e_p * x + r.e_r * f - r.gamma0 * x;
    df = r.e_n * g - r.C_n * f + r.gamma0 * x - r.e_r * f;
}

} // namespace test_support
