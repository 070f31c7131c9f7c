#include "epcc/markov.hpp"

#include "epcc/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace epcc::markov {

double Chain::exit_rate(int state) const
{
    double total = 0.0;
    for (const auto& t : transitions)
        if (t.from == state && t.to != state)
            total += t.rate;
    return total;
}

double Chain::rate(int from, int to) const
{
    double total = 0.0;
    for (const auto& t : transitions)
        if (t.from == from && t.to == to)
            total += t.rate;
    return total;
}

namespace {

void check_chain(const Chain& chain)
{
    if (chain.n_states < 1)
        throw InvalidParameter("chain needs at least one state");
    for (const auto& t : chain.transitions) {
        if (t.from < 0 || t.from >= chain.n_states || t.to < 0 || t.to >= chain.n_states)
            throw InvalidParameter("transition references a state outside the chain");
        if (!(t.rate >= 0.0) || !std::isfinite(t.rate))
            throw InvalidParameter("transition rates must be finite and nonnegative");
    }
}

template <int N>
using Mat = Eigen::Matrix<double, N, N>;

/// exp(G t) for a row-convention generator G (nonnegative off-diagonal,
/// rows summing to zero).
///
/// G + cI is entrywise nonnegative for c = max exit rate, so a Taylor series
/// of the shifted matrix over a step with c h <= 1 and repeated squaring
/// never subtract. Every entry, however small, then carries a relative error
/// of order 2^s eps rather than an absolute one. Rows are renormalized after
/// each stage so the unit eigenvalue cannot drift.
template <int N>
Mat<N> stochastic_exp(const Mat<N>& gen, double t)
{
    const int n = static_cast<int>(gen.rows());
    Mat<N> p = gen;
    double c = 0.0;
    for (int i = 0; i < n; ++i)
        c = std::max(c, -gen(i, i));
    Mat<N> e = Mat<N>::Identity(n, n);
    if (c == 0.0 || t == 0.0)
        return e;

    int squarings = 0;
    double h = t;
    if (c * t > 1.0) {
        squarings = static_cast<int>(std::ceil(std::log2(c * t)));
        h = std::ldexp(t, -squarings);
    }
    for (int i = 0; i < n; ++i)
        p(i, i) = c + gen(i, i);
    p *= h;

    Mat<N> term = e;
    for (int k = 1; k <= 24; ++k) {
        term = (term * p) / static_cast<double>(k);
        e += term;
    }
    e *= std::exp(-c * h);

    auto normalize = [&] {
        for (int i = 0; i < n; ++i)
            e.row(i) /= e.row(i).sum();
    };
    normalize();
    for (int k = 0; k < squarings; ++k) {
        e = (e * e).eval();
        normalize();
    }
    return e;
}

template <int N>
std::vector<std::vector<double>> propagate(const Chain& chain, std::span<const double> pi,
                                           int start, std::span<const double> taus)
{
    const int n = chain.n_states;
    bool recurrent = true;
    for (int i = 0; i < n; ++i)
        recurrent = recurrent && pi[i] > 0.0;

    // Row-convention generator. With every state recurrent we exponentiate
    // the time-reversed chain, G^_ij = pi_j G_ji / pi_i, whose entries are
    // bounded by the exit rates; then p_i(t) / pi_i = exp(G^ t)_{i,start} /
    // pi_start with full relative accuracy.
    Mat<N> gen = Mat<N>::Zero(n, n);
    for (const auto& tr : chain.transitions) {
        if (tr.from == tr.to)
            continue;
        if (recurrent)
            gen(tr.to, tr.from) += tr.rate * (pi[tr.from] / pi[tr.to]);
        else
            gen(tr.from, tr.to) += tr.rate;
    }
    for (int i = 0; i < n; ++i)
        gen(i, i) = -(gen.row(i).sum() - gen(i, i));

    std::vector<std::vector<double>> out;
    out.reserve(taus.size());
    for (double tau : taus) {
        if (!(tau >= 0.0) || !std::isfinite(tau))
            throw InvalidParameter("delays must be finite and nonnegative");
        const Mat<N> e = stochastic_exp<N>(gen, tau);
        std::vector<double> rel(n);
        double total = 0.0;
        bool finite = true;
        for (int i = 0; i < n; ++i) {
            double p;
            if (recurrent) {
                rel[i] = e(i, start) / pi[start];
                p = pi[i] * rel[i];
            } else {
                p = e(start, i);
                rel[i] = pi[i] > 0.0 ? p / pi[i] : p;
            }
            finite = finite && std::isfinite(p);
            total += p;
        }
        if (!finite || std::abs(total - 1.0) > 1e-6) {
            std::ostringstream msg;
            msg.precision(17);
            msg << "propagation to tau = " << tau << " s lost probability: population sum "
                << total;
            throw IntegrationFailure(msg.str());
        }
        out.push_back(std::move(rel));
    }
    return out;
}

} // namespace

std::vector<double> stationary(const Chain& chain)
{
    check_chain(chain);
    const int n = chain.n_states;
    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
    for (const auto& t : chain.transitions)
        if (t.from != t.to)
            a[t.from][t.to] += t.rate;

    for (int k = n - 1; k >= 1; --k) {
        double s = 0.0;
        for (int j = 0; j < k; ++j)
            s += a[k][j];
        if (s <= 0.0)
            throw NoEmission("chain is reducible: state " + std::to_string(k) +
                             " cannot return to lower states");
        for (int i = 0; i < k; ++i)
            a[i][k] /= s;
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j)
                if (i != j)
                    a[i][j] += a[i][k] * a[k][j];
    }

    std::vector<double> pi(n, 0.0);
    pi[0] = 1.0;
    double total = 1.0;
    for (int j = 1; j < n; ++j) {
        double v = 0.0;
        for (int i = 0; i < j; ++i)
            v += pi[i] * a[i][j];
        pi[j] = v;
        total += v;
    }
    for (double& v : pi)
        v /= total;
    return pi;
}

std::vector<std::vector<double>> relative_occupation(const Chain& chain,
                                                     std::span<const double> pi,
                                                     int start,
                                                     std::span<const double> taus)
{
    check_chain(chain);
    if (static_cast<int>(pi.size()) != chain.n_states)
        throw InvalidParameter("stationary vector size does not match the chain");
    if (start < 0 || start >= chain.n_states)
        throw InvalidParameter("start state outside the chain");
    switch (chain.n_states) {
    case 2: return propagate<2>(chain, pi, start, taus);
    case 3: return propagate<3>(chain, pi, start, taus);
    case 4: return propagate<4>(chain, pi, start, taus);
    default: return propagate<Eigen::Dynamic>(chain, pi, start, taus);
    }
}

double mean_time_to_photon(const Chain& chain, int start)
{
    check_chain(chain);
    const int n = chain.n_states;
    if (start < 0 || start >= n)
        throw InvalidParameter("start state outside the chain");

    std::vector<char> emits(n, 0);
    for (const auto& t : chain.transitions)
        if (t.photon && t.rate > 0.0)
            emits[t.from] = 1;

    // States visited before absorption.
    std::vector<char> seen(n, 0);
    std::deque<int> queue{start};
    seen[start] = 1;
    while (!queue.empty()) {
        const int s = queue.front();
        queue.pop_front();
        for (const auto& t : chain.transitions)
            if (t.from == s && !t.photon && t.rate > 0.0 && !seen[t.to]) {
                seen[t.to] = 1;
                queue.push_back(t.to);
            }
    }
    // Every visited state must keep a path to a photon channel, otherwise the
    // walk can get stuck forever with positive probability.
    std::vector<char> good(emits);
    for (bool changed = true; changed;) {
        changed = false;
        for (const auto& t : chain.transitions)
            if (!t.photon && t.rate > 0.0 && good[t.to] && !good[t.from]) {
                good[t.from] = 1;
                changed = true;
            }
    }
    std::vector<int> index(n, -1);
    int m = 0;
    for (int i = 0; i < n; ++i) {
        if (!seen[i])
            continue;
        if (!good[i])
            throw NoEmission("emitting state is not reachable with certainty from state " +
                             std::to_string(start));
        index[i] = m++;
    }

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd b = Eigen::VectorXd::Ones(m);
    for (const auto& t : chain.transitions) {
        if (t.from == t.to || index[t.from] < 0)
            continue;
        a(index[t.from], index[t.from]) += t.rate;
        if (!t.photon)
            a(index[t.from], index[t.to]) -= t.rate;
    }
    const Eigen::VectorXd times = a.partialPivLu().solve(b);
    return times(index[start]);
}

} // namespace epcc::markov
