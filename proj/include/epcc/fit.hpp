#pragma once

#include <array>
#include <span>

namespace epcc {

/// Real-parameter fit of 1 + a e^{-t/tau1} - (1 + a) e^{-t/tau2}.
struct FitResult {
    double a = 0.0;
    double tau1 = 0.0;
    double tau2 = 0.0;
    double rss = 0.0;
    std::array<double, 3> std_errors{}; // a, tau1, tau2
    int iterations = 0;
};

struct FitOptions {
    int max_iterations = 200;
    double step_tolerance = 1e-8; // relative
};

/// Levenberg-Marquardt with Marquardt scaling and an analytic Jacobian.
/// Throws InsufficientData for fewer than 8 samples, FitDiverged when no
/// acceptable step remains, SingularJacobian when the parameters are not
/// identifiable at the solution.
FitResult fit_g2(std::span<const double> taus, std::span<const double> g2, const FitResult& init,
                 const FitOptions& options = {});

/// Starting point from the data: tau2 from the first crossing of 1/2,
/// tau1 = tau2 / 100, a = 0.
FitResult initial_guess(std::span<const double> taus, std::span<const double> g2);

} // namespace epcc
