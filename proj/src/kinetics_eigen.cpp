// Eigen-decomposition route for the characteristic times.
//
// The 2x2 system matrix has entries that are plain sums of rates, so in a
// 113-bit significand every entry, the trace, the determinant and the
// discriminant are exact or nearly so. That leaves only the square root and
// a few divisions, which keeps the small eigenvalue accurate even when the
// two rates differ by eight orders of magnitude.

#include "epcc/kinetics.hpp"

#include "epcc/errors.hpp"

#include <cmath>

namespace epcc {

namespace {

#if defined(__SIZEOF_FLOAT128__)
using wide = __float128;
#else
using wide = long double;
#endif

wide wsqrt(wide v)
{
    if (v <= 0)
        return 0;
    wide s = std::sqrt(static_cast<long double>(v));
    s = (s + v / s) / 2;
    return s;
}

struct wcomplex {
    wide re = 0;
    wide im = 0;
};

wcomplex operator+(wcomplex a, wcomplex b) { return {a.re + b.re, a.im + b.im}; }
wcomplex operator-(wcomplex a, wcomplex b) { return {a.re - b.re, a.im - b.im}; }
wcomplex operator/(wcomplex a, wcomplex b)
{
    const wide d = b.re * b.re + b.im * b.im;
    return {(a.re * b.re + a.im * b.im) / d, (a.im * b.re - a.re * b.im) / d};
}

std::complex<double> narrow(wcomplex z)
{
    return {static_cast<double>(z.re), static_cast<double>(z.im)};
}

} // namespace

CharTimes char_times_eigen(const RateSet& r)
{
    r.validate();
    const wide Cn = r.C_n, Cp = r.C_p, en = r.e_n, ep = r.e_p, er = r.e_r, g0 = r.gamma0;

    // d(x, f)/dt = A (x, f) + const
    const wide a11 = -(Cp + ep + g0);
    const wide a12 = er - Cp;
    const wide a21 = g0 - en;
    const wide a22 = -(Cn + en + er);

    const wide tr = a11 + a22;
    const wide det = a11 * a22 - a12 * a21;
    const wide disc = (a11 - a22) * (a11 - a22) + 4 * a12 * a21;
    if (det <= 0)
        throw NoEmission("singular system matrix");

    // lambda_big carries the larger modulus; lambda_small follows from Vieta.
    wcomplex big, root;
    if (disc >= 0) {
        root = {wsqrt(disc), 0};
        big = {(tr - root.re) / 2, 0};
    } else {
        root = {0, wsqrt(-disc)};
        big = {tr / 2, -root.im / 2};
    }
    const wcomplex small = wcomplex{det, 0} / big;
    const wcomplex lam1 = big;
    const wcomplex lam2 = small;

    const wcomplex diff = lam1 - lam2;
    const wide mod1 = wsqrt(lam1.re * lam1.re + lam1.im * lam1.im);
    const wide moddiff = wsqrt(diff.re * diff.re + diff.im * diff.im);
    // |tau2 - tau1| / |tau2| = |lam1 - lam2| / |lam1|
    if (moddiff < wide(1e-9) * mod1)
        throw Degenerate("tau1 and tau2 coincide; use the ODE route");

    // Deviation from steady state at the emission instant: (0, 1) - (xs, fs).
    // Its x component relaxes as A1 e^{lam1 t} + A2 e^{lam2 t}; the spectral
    // projector onto lam1 is (A - lam2 I) / (lam1 - lam2), so
    //   a = A1 / xs = [-(a11 - lam2) + a12 (xs + gs) / xs] / (lam1 - lam2).
    // xs and gs are taken as unnormalized spanning-tree weights; for er = 0
    // the factor Cp shared by a12 and wx is cancelled by hand, which keeps
    // the amplitude defined when hole capture vanishes.
    const wide wx = Cp * Cn + Cp * er + en * er;
    const wide wg = Cn * (ep + g0) + ep * er;
    wide k;
    if (r.e_r == 0.0) {
        if (r.C_n == 0.0)
            throw NoEmission("no electron capture and no thermal excitation");
        k = -1 / Cn;
    } else {
        if (wx == 0)
            throw NoEmission("no pumping path into the excited state");
        k = a12 / wx;
    }
    const wcomplex A1 = lam2 - wcomplex{a11, 0} + wcomplex{k * (wx + wg), 0};
    const wcomplex amp = A1 / diff;

    CharTimes t;
    t.tau1 = narrow(wcomplex{-1, 0} / lam1);
    t.tau2 = narrow(wcomplex{-1, 0} / lam2);
    t.a = narrow(amp);
    return t;
}

} // namespace epcc
