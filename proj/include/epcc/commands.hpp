#pragma once

#include "epcc/config.hpp"
#include "epcc/fit.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace epcc {

/// Columns tau_s,g2_analytic,g2_ode and, with `monte_carlo`,
/// g2_mc,g2_mc_stderr. Without Monte Carlo the delays are the configured log
/// grid; with it they are tau = 0 followed by the histogram bin centers, and
/// the Monte Carlo cells of the tau = 0 row are nan.
void cmd_g2(const RunConfig& config, std::ostream& out, bool monte_carlo = false);

/// Columns n_cm3,p_cm3,re_tau1_s,im_tau1_s,re_tau2_s,im_tau2_s,g2_max over
/// the log grids of [sweep], n varying slowest.
void cmd_times_map(const RunConfig& config, std::ostream& out);

struct DeviceG2Row {
    double V = 0.0;
    double J = 0.0;
    Environment env; // at the probe
    RateSet rates;
    CharTimes times;
    double tau_half = 0.0;
};

std::vector<DeviceG2Row> device_g2_rows(const RunConfig& config);

/// Columns V,J_Acm2,n_probe,p_probe,re_tau1_s,re_tau2_s,tau_half_s.
void cmd_device_g2(const RunConfig& config, std::ostream& out);

struct CompareRow {
    double J = 0.0;
    double tau_half_2level = 0.0;
    double tau_half_3level = 0.0;
    double tau_half_3level_10x = 0.0;
};

/// Bias points with J > 0. The two-level center is the three-level model
/// with its implied efficiency.
std::vector<CompareRow> compare_models_rows(const RunConfig& config);

/// Columns J_Acm2,tau_half_2level,tau_half_3level,tau_half_3level_10x_tau_s.
void cmd_compare_models(const RunConfig& config, std::ostream& out);

struct G2Samples {
    std::vector<double> taus;
    std::vector<double> g2;
};

/// Reads the tau_s and g2 columns of a headed CSV; other columns are ignored.
/// Without a g2 column, g2_analytic is used so g2 output can be fed back.
G2Samples read_g2_samples(std::istream& in, const std::string& source = "<data>");

struct FitInit {
    std::optional<double> a, tau1, tau2;
};

/// Fits the samples and writes one row:
/// a,tau1_s,tau2_s,rss,a_stderr,tau1_stderr_s,tau2_stderr_s,iterations,
/// capture_sum_per_s,tau0_s. The last two read the fit as 1/tau2 = C_n + C_p
/// and tau1 = tau0, valid at low injection with no emission terms.
FitResult cmd_fit(std::istream& data, const std::string& source, const FitInit& init,
                  std::ostream& out);

/// Photon timestamps of one trajectory as index,timestamp_s, or with
/// `correlation` the histogram as tau_s,g2,stderr (bin centers).
void cmd_mc(const RunConfig& config, std::ostream& out, bool correlation = false);

} // namespace epcc
