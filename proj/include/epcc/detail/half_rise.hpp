#pragma once

#include "epcc/errors.hpp"

#include <cmath>

namespace epcc::detail {

template <class F>
double half_rise(F&& g2, double tau_start)
{
    double lo = 0.0;
    double hi = tau_start;
    int steps = 0;
    while (g2(hi) < 0.5) {
        lo = hi;
        hi *= 1.25;
        if (++steps > 2000 || !std::isfinite(hi))
            throw NoConvergence("g2 never reaches 1/2");
    }
    while (hi - lo > 1e-10 * 0.5 * (lo + hi)) {
        const double mid = 0.5 * (lo + hi);
        if (g2(mid) < 0.5)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace epcc::detail
