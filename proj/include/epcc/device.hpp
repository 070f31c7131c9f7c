#pragma once

#include "epcc/kinetics.hpp"

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace epcc {

/// Band parameters; N_c and N_v are given at 300 K and scale as T^1.5.
struct MaterialParams {
    double eps_r = 5.7;
    double E_g = 5.47;  // eV
    double N_c = 1e20;  // cm^-3
    double N_v = 1e19;  // cm^-3

    void validate() const;
    double Nc(double T) const;
    double Nv(double T) const;
    double n_i(double T) const;
    double log_n_i(double T) const;
};

enum class DopingType { donor, acceptor, intrinsic };

/// One slab of the stack.
///
/// Compensation adds comp_ratio * N_dop fully ionized dopants of the
/// opposite type. In an intrinsic layer N_dop is a residual, fully ionized
/// acceptor density and E_act, g_deg, comp_ratio are ignored.
struct LayerSpec {
    std::string name;
    double thickness = 1e-4; // cm
    DopingType doping_type = DopingType::intrinsic;
    double N_dop = 0.0;      // cm^-3
    double E_act = 0.0;      // eV
    double g_deg = 1.0;
    double comp_ratio = 0.0;
    double mu_n = 1000.0;    // cm^2/(V s)
    double mu_p = 1000.0;    // cm^2/(V s)
    double srh_tau_n = 1e-9; // s
    double srh_tau_p = 1e-9; // s

    void validate() const;
    double donors() const;             // total donor density
    double acceptors() const;          // total acceptor density
    double compensating_donors() const;    // fully ionized part
    double compensating_acceptors() const; // fully ionized part
};

struct DeviceSpec {
    std::vector<LayerSpec> layers; // ordered from the anode (x = 0)
    MaterialParams material;
    double T = 300.0;           // K
    double probe_depth = 3e-5;  // cm, from the i/n interface into the i-layer
    std::size_t mesh_nodes = 2000;

    /// Checks every layer and the material; any stack is accepted.
    void validate() const;
    /// Additionally requires exactly p, i, n and a probe inside the i-layer.
    void validate_pin() const;

    double length() const;
    double interface(std::size_t i) const; // position of the end of layer i
    double probe_position() const;         // cm from the anode

    /// Diamond p-i-n stack: 2 um boron-doped p, 10 um i, 0.5 um
    /// phosphorus-doped n.
    static DeviceSpec diamond_pin();
};

struct Mesh1D {
    std::vector<double> x;             // cm, strictly increasing
    std::vector<std::size_t> edge_layer; // layer index of each edge
    std::vector<std::size_t> breaks;   // node index of every layer interface

    std::size_t size() const { return x.size(); }
    /// Index of the node at position `pos`, which must be a mesh node.
    std::size_t node_at(double pos) const;
};

struct DeviceState {
    double V = 0.0;                       // applied bias, V
    std::vector<double> x;                // cm
    std::vector<double> psi;              // V, relative to the intrinsic level
    std::vector<double> phi_n, phi_p;     // V
    std::vector<double> n, p;             // cm^-3, floored at 1e-30
    std::vector<double> donors_ionized;   // cm^-3, half-cell weighted
    std::vector<double> acceptors_ionized;
    std::vector<double> J_n, J_p;         // A/cm^2, one per edge
    double J = 0.0;                       // terminal current density, A/cm^2
    int iterations = 0;

    /// max over edges |J_e - J| / |J|; zero when J vanishes identically.
    double current_spread() const;
};

struct SweepPoint {
    double V = 0.0;
    double J = 0.0;
    DeviceState state;
};

/// x / (e^x - 1).
double bernoulli(double x);
/// log(bernoulli(x)), finite for every finite x.
double log_bernoulli(double x);

/// Scharfetter-Gummel particle flux on one edge, (D / h) (c_r B(d) - c_l B(-d))
/// with d the potential step over V_T. Positive for the electron convention;
/// holes use sg_flux(D/h, c_r, c_l, d) with the sign flipped.
double sg_flux(double D_over_h, double c_left, double c_right, double dpsi_scaled);

/// Ionized density of a single-level dopant, N / (1 + g c / c1) with
/// c1 = band_dos exp(-E_act / kT); `carrier` is n for donors, p for acceptors.
double ionization(double N_dop, double E_act, double g_deg, double carrier, double band_dos,
                  double T);

/// SRH net recombination (np - n_i^2) / (tau_p (n + n_i) + tau_n (p + n_i)).
double srh_rate(double n, double p, double n_i, double tau_n, double tau_p);

/// Electrostatic potential (V, relative to the intrinsic level) at which the
/// layer is charge neutral in equilibrium.
double neutral_potential(const LayerSpec& layer, const MaterialParams& material, double T);

/// Graded mesh with spec.mesh_nodes nodes.
Mesh1D build_mesh(const DeviceSpec& spec);
Mesh1D build_mesh(const DeviceSpec& spec, std::size_t nodes);

DeviceState solve_equilibrium(const DeviceSpec& spec, const Mesh1D& mesh);

/// Gummel iteration at bias V (applied to the anode) started from `prev`.
DeviceState solve_bias(const DeviceSpec& spec, const Mesh1D& mesh, const DeviceState& prev,
                       double V);

/// Continuation over increasing biases starting at equilibrium. A failing
/// step is retried through intermediate biases before giving up.
std::vector<SweepPoint> iv_sweep(const DeviceSpec& spec, const std::vector<double>& biases);
std::vector<SweepPoint> iv_sweep(const DeviceSpec& spec, const Mesh1D& mesh,
                                 const std::vector<double>& biases);

/// Carrier densities at the probe position, interpolated linearly in the
/// potentials (log-linear in density).
Environment probe(const DeviceState& state, const DeviceSpec& spec);

/// Columns x_cm,psi_V,n_cm3,p_cm3,Jn,Jp; currents are edge averages.
void write_profile_csv(std::ostream& out, const DeviceState& state);
/// Columns V,J_Acm2,n_probe,p_probe.
void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& sweep,
                     const DeviceSpec& spec);

} // namespace epcc
