#include "epcc/fit.hpp"

#include "epcc/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

namespace epcc {

namespace {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Parameters are handled internally as (a, tau1 / u, tau2 / u) with u the
// initial tau2, so all three are of order one.
struct Model {
    std::span<const double> t; // delays divided by u
    std::span<const double> y;

    double residuals(const Vec3& p, Eigen::VectorXd& r) const
    {
        const auto m = static_cast<Eigen::Index>(t.size());
        r.resize(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            const double e1 = std::exp(-t[i] / p[1]);
            const double e2 = std::exp(-t[i] / p[2]);
            r[i] = y[i] - (1.0 + p[0] * e1 - (1.0 + p[0]) * e2);
        }
        return r.squaredNorm();
    }

    void jacobian(const Vec3& p, Eigen::MatrixXd& J) const
    {
        const auto m = static_cast<Eigen::Index>(t.size());
        J.resize(m, 3);
        for (Eigen::Index i = 0; i < m; ++i) {
            const double e1 = std::exp(-t[i] / p[1]);
            const double e2 = std::exp(-t[i] / p[2]);
            J(i, 0) = e1 - e2;
            J(i, 1) = p[0] * t[i] / (p[1] * p[1]) * e1;
            J(i, 2) = -(1.0 + p[0]) * t[i] / (p[2] * p[2]) * e2;
        }
    }
};

void check_samples(std::span<const double> taus, std::span<const double> g2)
{
    if (taus.size() != g2.size())
        throw InvalidParameter("tau and g2 columns differ in length");
    if (taus.size() < 8)
        throw InsufficientData("need at least 8 samples, got " + std::to_string(taus.size()));
    for (std::size_t i = 0; i < taus.size(); ++i)
        if (!(taus[i] >= 0.0) || !std::isfinite(taus[i]) || !std::isfinite(g2[i]))
            throw InvalidParameter("samples must be finite with tau >= 0 (row " +
                                   std::to_string(i) + ")");
}

} // namespace

FitResult initial_guess(std::span<const double> taus, std::span<const double> g2)
{
    check_samples(taus, g2);
    double tmax = 0.0;
    for (double t : taus)
        tmax = std::max(tmax, t);
    double half = tmax / 3.0;
    for (std::size_t i = 1; i < taus.size(); ++i) {
        if (g2[i - 1] < 0.5 && g2[i] >= 0.5) {
            const double s = (0.5 - g2[i - 1]) / (g2[i] - g2[i - 1]);
            half = taus[i - 1] + s * (taus[i] - taus[i - 1]);
            break;
        }
    }
    if (!(half > 0.0))
        half = tmax > 0.0 ? tmax / 3.0 : 1.0;
    FitResult r;
    r.tau2 = half / std::log(2.0);
    r.tau1 = r.tau2 / 100.0;
    r.a = 0.0;
    return r;
}

FitResult fit_g2(std::span<const double> taus, std::span<const double> g2, const FitResult& init,
                 const FitOptions& options)
{
    check_samples(taus, g2);
    if (!(init.tau1 > 0.0) || !(init.tau2 > 0.0) || !std::isfinite(init.a))
        throw InvalidParameter("initial guess needs tau1, tau2 > 0");

    const double unit = init.tau2;
    std::vector<double> ts(taus.size());
    for (std::size_t i = 0; i < taus.size(); ++i)
        ts[i] = taus[i] / unit;
    const Model model{ts, g2};
    const auto m = static_cast<Eigen::Index>(ts.size());

    Vec3 p(init.a, init.tau1 / unit, init.tau2 / unit);
    Eigen::VectorXd r, r_try;
    Eigen::MatrixXd J;
    double cost = model.residuals(p, r);
    model.jacobian(p, J);
    Mat3 A = J.transpose() * J;
    Vec3 grad = J.transpose() * r;
    Vec3 scale = A.diagonal().cwiseMax(1e-300);
    double mu = 1e-3 * scale.maxCoeff();
    double nu = 2.0;

    int it = 0;
    bool converged = false;
    while (it < options.max_iterations && !converged) {
        ++it;
        // Columns without influence still get a small damping floor so the
        // system stays solvable; their gradient component is zero anyway.
        const Vec3 damp = scale.cwiseMax(1e-12 * scale.maxCoeff());
        Mat3 lhs = A;
        lhs.diagonal() += mu * damp;
        const Vec3 step = lhs.ldlt().solve(grad);
        const Vec3 trial = p + step;
        if (!step.allFinite() || trial[1] <= 0.0 || trial[2] <= 0.0) {
            mu *= nu;
            nu *= 2.0;
            continue;
        }
        const double rel = (step.array() / p.array().abs().max(1e-6)).abs().maxCoeff();
        const double trial_cost = model.residuals(trial, r_try);
        const double predicted = step.dot(mu * damp.cwiseProduct(step) + grad);
        const double rho = predicted > 0.0 ? (cost - trial_cost) / predicted : -1.0;
        if (rho > 0.0) {
            p = trial;
            cost = trial_cost;
            r.swap(r_try);
            model.jacobian(p, J);
            A = J.transpose() * J;
            grad = J.transpose() * r;
            scale = scale.cwiseMax(A.diagonal());
            mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
            nu = 2.0;
        } else {
            mu *= nu;
            nu *= 2.0;
        }
        // A step this small, taken or not, cannot move the fit any further.
        converged = rel < options.step_tolerance || cost == 0.0;
        if (!(mu < 1e300))
            break;
    }

    // Identifiability at the final point: correlation matrix of J^T J.
    const Vec3 col = A.diagonal().cwiseSqrt();
    if (col.minCoeff() <= 1e-6 * col.maxCoeff())
        throw SingularJacobian("a parameter has no influence on the model at the fitted point");
    const Mat3 corr = col.cwiseInverse().asDiagonal() * A * col.cwiseInverse().asDiagonal();
    Eigen::SelfAdjointEigenSolver<Mat3> eig(corr);
    if (eig.eigenvalues().minCoeff() < 1e-10 * eig.eigenvalues().maxCoeff())
        throw SingularJacobian("fitted parameters are not identifiable (tau1 ~ tau2 or flat data)");
    if (!converged)
        throw FitDiverged("no convergence after " + std::to_string(it) +
                          " iterations (rss " + std::to_string(cost) + ")");

    FitResult out;
    out.a = p[0];
    out.tau1 = p[1] * unit;
    out.tau2 = p[2] * unit;
    out.rss = cost;
    out.iterations = it;
    const Mat3 cov = A.inverse() * (m > 3 ? cost / static_cast<double>(m - 3) : 0.0);
    out.std_errors = {std::sqrt(std::max(cov(0, 0), 0.0)),
                      std::sqrt(std::max(cov(1, 1), 0.0)) * unit,
                      std::sqrt(std::max(cov(2, 2), 0.0)) * unit};
    return out;
}

} // namespace epcc
