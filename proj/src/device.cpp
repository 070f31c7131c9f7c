#include "epcc/device.hpp"

#include "epcc/constants.hpp"
#include "epcc/csv.hpp"
#include "epcc/errors.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

namespace epcc {

namespace {

constexpr double density_floor = 1e-30;

double thermal_voltage(double T) { return constants::k_B_eV * T; }

void require(bool ok, const std::string& what)
{
    if (!ok) throw InvalidParameter(what);
}

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

std::string fmt(double v) { return csv::format(v); }

// Layer data in the form the residuals need. Ionizable species follow
// N / (1 + exp(t)), where t is affine in the scaled potentials.
struct LayerCharge {
    double donors_fixed = 0.0;
    double donors_ion = 0.0;
    double log_gn = 0.0; // ln(g) + ln(n_i) - ln(n1)
    double acceptors_fixed = 0.0;
    double acceptors_ion = 0.0;
    double log_gp = 0.0; // ln(g) + ln(n_i) - ln(p1)
    double mu_n = 0.0, mu_p = 0.0;
    double tau_n = 0.0, tau_p = 0.0;
};

LayerCharge layer_charge(const LayerSpec& layer, const MaterialParams& m, double T)
{
    const double vt = thermal_voltage(T);
    const double ln_ni = m.log_n_i(T);
    LayerCharge c;
    c.donors_fixed = layer.compensating_donors();
    c.acceptors_fixed = layer.compensating_acceptors();
    if (layer.doping_type == DopingType::donor) {
        c.donors_ion = layer.N_dop;
        c.log_gn = std::log(layer.g_deg) + ln_ni - (std::log(m.Nc(T)) - layer.E_act / vt);
    } else if (layer.doping_type == DopingType::acceptor) {
        c.acceptors_ion = layer.N_dop;
        c.log_gp = std::log(layer.g_deg) + ln_ni - (std::log(m.Nv(T)) - layer.E_act / vt);
    }
    c.mu_n = layer.mu_n;
    c.mu_p = layer.mu_p;
    c.tau_n = layer.srh_tau_n;
    c.tau_p = layer.srh_tau_p;
    return c;
}

// Space charge and its psi-derivative, in units of `scale`, at scaled
// potentials (all divided by the thermal voltage).
struct Charge {
    double rho;
    double drho;
    double donors;
    double acceptors;
};

Charge space_charge(const LayerCharge& c, double ln_ni, double psi, double phin, double phip,
                    double scale)
{
    const double n = std::exp(ln_ni + psi - phin) / scale;
    const double p = std::exp(ln_ni + phip - psi) / scale;
    double donors = c.donors_fixed / scale;
    double acceptors = c.acceptors_fixed / scale;
    double drho = -n - p;
    if (c.donors_ion > 0.0) {
        const double s = 1.0 / (1.0 + std::exp(c.log_gn + psi - phin));
        donors += c.donors_ion / scale * s;
        drho -= c.donors_ion / scale * s * (1.0 - s);
    }
    if (c.acceptors_ion > 0.0) {
        const double s = 1.0 / (1.0 + std::exp(c.log_gp + phip - psi));
        acceptors += c.acceptors_ion / scale * s;
        drho -= c.acceptors_ion / scale * s * (1.0 - s);
    }
    return {p - n + donors - acceptors, drho, donors, acceptors};
}

// Thomas algorithm; a is the sub-diagonal (a[0] unused), c the super-diagonal.
void solve_tridiagonal(std::vector<double>& a, std::vector<double>& b, std::vector<double>& c,
                       std::vector<double>& d)
{
    const std::size_t n = b.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double w = a[i] / b[i - 1];
        b[i] -= w * c[i - 1];
        d[i] -= w * d[i - 1];
    }
    d[n - 1] /= b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) d[i] = (d[i] - c[i] * d[i + 1]) / b[i];
}

struct Junction {
    double x;
    double c; // spacing at the junction
};

std::vector<double> march(double a, double b, double h_bulk, const std::vector<Junction>& js)
{
    auto spacing = [&](double x) {
        double h = h_bulk;
        for (const auto& j : js) h = std::min(h, j.c + 0.05 * std::abs(x - j.x));
        return h;
    };
    std::vector<double> pts{a};
    double x = a;
    while (true) {
        const double s = spacing(x);
        if (x + 1.3 * s >= b) break;
        x += s;
        pts.push_back(x);
    }
    pts.push_back(b);
    return pts;
}

// Nodes of a layered 1D problem with half-cell bookkeeping.
class Discretization {
  public:
    Discretization(const DeviceSpec& spec, const Mesh1D& mesh)
        : spec_(spec), mesh_(mesh), vt_(thermal_voltage(spec.T)),
          ln_ni_(spec.material.log_n_i(spec.T)) {
        const std::size_t N = mesh.size();
        require(N >= 3, "mesh needs at least 3 nodes");
        require(mesh.edge_layer.size() == N - 1, "mesh edge layers do not match the nodes");
        for (const auto& l : spec.layers) layers_.push_back(layer_charge(l, spec.material, spec.T));
        scale_ = 1.0;
        for (const auto& l : spec.layers)
            scale_ = std::max({scale_, l.donors(), l.acceptors()});
        lambda_ = constants::eps0_cm * spec.material.eps_r * vt_ / (constants::q * scale_);
        h_.resize(N - 1);
        for (std::size_t k = 0; k + 1 < N; ++k) {
            h_[k] = mesh.x[k + 1] - mesh.x[k];
            require(h_[k] > 0.0, "mesh nodes must be strictly increasing");
        }
        left_.resize(N);
        right_.resize(N);
        box_l_.assign(N, 0.0);
        box_r_.assign(N, 0.0);
        for (std::size_t k = 0; k < N; ++k) {
            left_[k] = mesh.edge_layer[k == 0 ? 0 : k - 1];
            right_[k] = mesh.edge_layer[k + 1 == N ? N - 2 : k];
            if (k > 0) box_l_[k] = 0.5 * h_[k - 1];
            if (k + 1 < N) box_r_[k] = 0.5 * h_[k];
        }
        psi_anode_ = neutral_potential(spec.layers.front(), spec.material, spec.T) / vt_;
        psi_cathode_ = neutral_potential(spec.layers.back(), spec.material, spec.T) / vt_;
    }

    std::size_t size() const { return mesh_.size(); }
    double vt() const { return vt_; }

    // Scaled potentials: psi, phin and eta = phip - V, all over V_T.
    struct Vars {
        std::vector<double> psi, phin, eta;
        double V = 0.0;
    };

    Vars initial_equilibrium() const {
        const std::size_t N = size();
        std::vector<double> neutral;
        for (const auto& l : spec_.layers)
            neutral.push_back(neutral_potential(l, spec_.material, spec_.T) / vt_);
        Vars v;
        v.psi.resize(N);
        for (std::size_t k = 0; k < N; ++k)
            v.psi[k] = 0.5 * (neutral[left_[k]] + neutral[right_[k]]);
        v.phin.assign(N, 0.0);
        v.eta.assign(N, 0.0);
        return v;
    }

    void apply_contacts(Vars& v) const {
        const std::size_t N = size();
        v.psi[0] = psi_anode_ + v.V;
        v.psi[N - 1] = psi_cathode_;
        v.phin[0] = v.V;
        v.phin[N - 1] = 0.0;
        v.eta[0] = 0.0;
        v.eta[N - 1] = -v.V;
    }

    // Newton on the nonlinear Poisson equation with the quasi-Fermi
    // potentials held fixed. Returns the final scaled residual norm.
    double poisson(Vars& v, std::vector<std::string>* trace) const {
        const std::size_t N = size();
        std::vector<double> a(N), b(N), c(N), d(N);
        constexpr int max_iter = 200;
        double res_norm = 0.0;
        for (int it = 0; it < max_iter; ++it) {
            res_norm = 0.0;
            for (std::size_t k = 0; k < N; ++k) {
                if (k == 0 || k + 1 == N) {
                    a[k] = c[k] = d[k] = 0.0;
                    b[k] = 1.0;
                    continue;
                }
                const double phip = v.V + v.eta[k];
                const Charge ql = space_charge(layers_[left_[k]], ln_ni_, v.psi[k], v.phin[k],
                                               phip, scale_);
                const Charge qr = space_charge(layers_[right_[k]], ln_ni_, v.psi[k], v.phin[k],
                                               phip, scale_);
                const double gl = lambda_ / h_[k - 1], gr = lambda_ / h_[k];
                const double F = gr * (v.psi[k + 1] - v.psi[k]) - gl * (v.psi[k] - v.psi[k - 1]) +
                                 box_l_[k] * ql.rho + box_r_[k] * qr.rho;
                a[k] = gl;
                c[k] = gr;
                b[k] = -gl - gr + box_l_[k] * ql.drho + box_r_[k] * qr.drho;
                d[k] = -F;
                res_norm = std::max(res_norm, std::abs(F) / (box_l_[k] + box_r_[k]));
            }
            solve_tridiagonal(a, b, c, d);
            double step = 0.0;
            for (std::size_t k = 1; k + 1 < N; ++k) {
                double delta = d[k];
                step = std::max(step, std::abs(delta));
                if (std::abs(delta) > 1.0) delta = std::copysign(1.0 + std::log(std::abs(delta)), delta);
                v.psi[k] += delta;
            }
            if (trace) trace->push_back("poisson " + std::to_string(it) + ": residual " +
                                        fmt(res_norm) + ", step " + fmt(step));
            if (!std::isfinite(step)) break;
            if (step < 1e-11) return res_norm;
        }
        std::ostringstream msg;
        msg << "Poisson Newton did not converge (last residual " << fmt(res_norm) << ")";
        if (trace) {
            const std::size_t from = trace->size() > 8 ? trace->size() - 8 : 0;
            for (std::size_t i = from; i < trace->size(); ++i) msg << "\n  " << (*trace)[i];
        }
        throw NoConvergence(msg.str());
    }

    // Scharfetter-Gummel flux pieces on edge k: the electron flux is
    // fn_fwd * expm1(phin_k - phin_k+1) with fn_fwd = C n_i e^(psi_k+1 - phin_k),
    // and similarly for holes.
    double electron_flux(const Vars& v, std::size_t k) const {
        const double coef = layers_[mesh_.edge_layer[k]].mu_n * vt_ / h_[k];
        const double lb = log_bernoulli(v.psi[k + 1] - v.psi[k]);
        return coef * std::exp(lb + ln_ni_ + v.psi[k + 1] - v.phin[k]) *
               std::expm1(v.phin[k] - v.phin[k + 1]);
    }

    double hole_flux(const Vars& v, std::size_t k) const {
        const double coef = layers_[mesh_.edge_layer[k]].mu_p * vt_ / h_[k];
        const double lb = log_bernoulli(v.psi[k + 1] - v.psi[k]);
        return coef * std::exp(lb + ln_ni_ + v.V + v.eta[k + 1] - v.psi[k]) *
               std::expm1(v.eta[k] - v.eta[k + 1]);
    }

    struct Srh {
        double R;        // net rate, cm^-3 s^-1
        double dR_dn_n;  // n dR/dn at fixed denominator
        double dR_dp_p;  // p dR/dp at fixed denominator
    };

    Srh srh(const Vars& v, std::size_t k, std::size_t layer) const {
        const LayerCharge& L = layers_[layer];
        const double ni = std::exp(ln_ni_);
        const double n = std::exp(ln_ni_ + v.psi[k] - v.phin[k]);
        const double p = std::exp(ln_ni_ + v.V + v.eta[k] - v.psi[k]);
        const double D = L.tau_p * (n + ni) + L.tau_n * (p + ni);
        const double excess = std::exp(2.0 * ln_ni_) * std::expm1(v.V + v.eta[k] - v.phin[k]);
        return {excess / D, n * p / D, n * p / D};
    }

    // One linear solve of the electron continuity equation with the SRH
    // denominator and the hole density frozen; unknown is the relative
    // change y of exp(-phin).
    void electron_step(Vars& v) const {
        const std::size_t N = size();
        std::vector<double> a(N, 0.0), b(N, 1.0), c(N, 0.0), d(N, 0.0);
        std::vector<double> flux(N - 1), P(N - 1), Q(N - 1);
        for (std::size_t k = 0; k + 1 < N; ++k) {
            const double coef = layers_[mesh_.edge_layer[k]].mu_n * vt_ / h_[k];
            const double lb = log_bernoulli(v.psi[k + 1] - v.psi[k]);
            Q[k] = coef * std::exp(lb + ln_ni_ + v.psi[k + 1] - v.phin[k]);
            P[k] = coef * std::exp(lb + ln_ni_ + v.psi[k + 1] - v.phin[k + 1]);
            flux[k] = Q[k] * std::expm1(v.phin[k] - v.phin[k + 1]);
        }
        for (std::size_t k = 1; k + 1 < N; ++k) {
            const Srh rl = srh(v, k, left_[k]);
            const Srh rr = srh(v, k, right_[k]);
            const double G = flux[k] - flux[k - 1] - box_l_[k] * rl.R - box_r_[k] * rr.R;
            a[k] = Q[k - 1];
            b[k] = -Q[k] - P[k - 1] - box_l_[k] * rl.dR_dn_n - box_r_[k] * rr.dR_dn_n;
            c[k] = P[k];
            d[k] = -G;
        }
        solve_tridiagonal(a, b, c, d);
        for (std::size_t k = 1; k + 1 < N; ++k)
            v.phin[k] -= std::log1p(std::max(d[k], -0.999999));
    }

    void hole_step(Vars& v) const {
        const std::size_t N = size();
        std::vector<double> a(N, 0.0), b(N, 1.0), c(N, 0.0), d(N, 0.0);
        std::vector<double> flux(N - 1), S(N - 1), T(N - 1);
        for (std::size_t k = 0; k + 1 < N; ++k) {
            const double coef = layers_[mesh_.edge_layer[k]].mu_p * vt_ / h_[k];
            const double lb = log_bernoulli(v.psi[k + 1] - v.psi[k]);
            S[k] = coef * std::exp(lb + ln_ni_ + v.V + v.eta[k] - v.psi[k]);
            T[k] = coef * std::exp(lb + ln_ni_ + v.V + v.eta[k + 1] - v.psi[k]);
            flux[k] = T[k] * std::expm1(v.eta[k] - v.eta[k + 1]);
        }
        for (std::size_t k = 1; k + 1 < N; ++k) {
            const Srh rl = srh(v, k, left_[k]);
            const Srh rr = srh(v, k, right_[k]);
            const double K = flux[k] - flux[k - 1] + box_l_[k] * rl.R + box_r_[k] * rr.R;
            a[k] = -S[k - 1];
            b[k] = S[k] + T[k - 1] + box_l_[k] * rl.dR_dp_p + box_r_[k] * rr.dR_dp_p;
            c[k] = -T[k];
            d[k] = -K;
        }
        solve_tridiagonal(a, b, c, d);
        for (std::size_t k = 1; k + 1 < N; ++k)
            v.eta[k] += std::log1p(std::max(d[k], -0.999999));
    }

    DeviceState export_state(const Vars& v) const {
        const std::size_t N = size();
        DeviceState s;
        s.V = v.V * vt_;
        s.x = mesh_.x;
        s.psi.resize(N);
        s.phi_n.resize(N);
        s.phi_p.resize(N);
        s.n.resize(N);
        s.p.resize(N);
        s.donors_ionized.resize(N);
        s.acceptors_ionized.resize(N);
        for (std::size_t k = 0; k < N; ++k) {
            s.psi[k] = v.psi[k] * vt_;
            s.phi_n[k] = v.phin[k] * vt_;
            s.phi_p[k] = (v.V + v.eta[k]) * vt_;
            s.n[k] = std::max(std::exp(ln_ni_ + v.psi[k] - v.phin[k]), density_floor);
            s.p[k] = std::max(std::exp(ln_ni_ + v.V + v.eta[k] - v.psi[k]), density_floor);
            const Charge ql = space_charge(layers_[left_[k]], ln_ni_, v.psi[k], v.phin[k],
                                           v.V + v.eta[k], 1.0);
            const Charge qr = space_charge(layers_[right_[k]], ln_ni_, v.psi[k], v.phin[k],
                                           v.V + v.eta[k], 1.0);
            const double wl = box_l_[k], wr = box_r_[k];
            s.donors_ionized[k] = (wl * ql.donors + wr * qr.donors) / (wl + wr);
            s.acceptors_ionized[k] = (wl * ql.acceptors + wr * qr.acceptors) / (wl + wr);
        }
        s.J_n.resize(N - 1);
        s.J_p.resize(N - 1);
        double sum = 0.0;
        for (std::size_t k = 0; k + 1 < N; ++k) {
            s.J_n[k] = constants::q * electron_flux(v, k);
            s.J_p[k] = constants::q * hole_flux(v, k);
            sum += s.J_n[k] + s.J_p[k];
        }
        s.J = sum / static_cast<double>(N - 1);
        return s;
    }

    Vars import_state(const DeviceState& s) const {
        require(s.x.size() == size() && s.psi.size() == size() && s.phi_n.size() == size() &&
                    s.phi_p.size() == size(),
                "previous state does not belong to this mesh");
        Vars v;
        v.V = s.V / vt_;
        v.psi.resize(size());
        v.phin.resize(size());
        v.eta.resize(size());
        for (std::size_t k = 0; k < size(); ++k) {
            v.psi[k] = s.psi[k] / vt_;
            v.phin[k] = s.phi_n[k] / vt_;
            v.eta[k] = (s.phi_p[k] - s.V) / vt_;
        }
        return v;
    }

  private:
    const DeviceSpec& spec_;
    const Mesh1D& mesh_;
    double vt_;
    double ln_ni_;
    double scale_ = 1.0;
    double lambda_ = 0.0;
    double psi_anode_ = 0.0, psi_cathode_ = 0.0;
    std::vector<LayerCharge> layers_;
    std::vector<double> h_;
    std::vector<std::size_t> left_, right_;
    std::vector<double> box_l_, box_r_;
};

double current_drift(double J, double J_prev)
{
    const double diff = std::abs(J - J_prev);
    if (diff == 0.0) return 0.0;
    return diff / std::max(std::abs(J), std::abs(J_prev));
}

} // namespace

// ---------------------------------------------------------------- parameters

void MaterialParams::validate() const
{
    require(finite_positive(eps_r), "material.eps_r must be positive");
    require(finite_positive(E_g), "material.E_g must be positive");
    require(finite_positive(N_c), "material.N_c must be positive");
    require(finite_positive(N_v), "material.N_v must be positive");
}

double MaterialParams::Nc(double T) const { return N_c * std::pow(T / 300.0, 1.5); }
double MaterialParams::Nv(double T) const { return N_v * std::pow(T / 300.0, 1.5); }

double MaterialParams::log_n_i(double T) const
{
    return 0.5 * (std::log(Nc(T)) + std::log(Nv(T))) - E_g / (2.0 * thermal_voltage(T));
}

double MaterialParams::n_i(double T) const { return std::exp(log_n_i(T)); }

void LayerSpec::validate() const
{
    const std::string where = "layer '" + name + "': ";
    require(finite_positive(thickness), where + "thickness must be positive");
    require(std::isfinite(N_dop) && N_dop >= 0.0, where + "N_dop must be >= 0");
    require(finite_positive(mu_n) && finite_positive(mu_p), where + "mobilities must be positive");
    require(finite_positive(srh_tau_n) && finite_positive(srh_tau_p),
            where + "SRH lifetimes must be positive");
    if (doping_type != DopingType::intrinsic) {
        require(std::isfinite(E_act) && E_act >= 0.0, where + "E_act must be >= 0");
        require(finite_positive(g_deg), where + "g_deg must be positive");
        require(comp_ratio >= 0.0 && comp_ratio < 1.0, where + "comp_ratio must lie in [0, 1)");
    }
}

double LayerSpec::compensating_donors() const
{
    return doping_type == DopingType::acceptor ? comp_ratio * N_dop : 0.0;
}

double LayerSpec::compensating_acceptors() const
{
    switch (doping_type) {
    case DopingType::donor: return comp_ratio * N_dop;
    case DopingType::intrinsic: return N_dop;
    case DopingType::acceptor: return 0.0;
    }
    return 0.0;
}

double LayerSpec::donors() const
{
    return (doping_type == DopingType::donor ? N_dop : 0.0) + compensating_donors();
}

double LayerSpec::acceptors() const
{
    return (doping_type == DopingType::acceptor ? N_dop : 0.0) + compensating_acceptors();
}

void DeviceSpec::validate() const
{
    require(!layers.empty(), "device needs at least one layer");
    for (const auto& l : layers) l.validate();
    material.validate();
    require(finite_positive(T), "device temperature must be positive");
    require(mesh_nodes >= 3, "mesh_nodes must be at least 3");
}

void DeviceSpec::validate_pin() const
{
    validate();
    require(layers.size() == 3 && layers[0].doping_type == DopingType::acceptor &&
                layers[1].doping_type == DopingType::intrinsic &&
                layers[2].doping_type == DopingType::donor,
            "device must be exactly p, i, n ordered from the anode");
    require(finite_positive(probe_depth) && probe_depth < layers[1].thickness,
            "probe_depth must lie inside the i-layer");
}

double DeviceSpec::length() const { return interface(layers.size() - 1); }

double DeviceSpec::interface(std::size_t i) const
{
    double x = 0.0;
    for (std::size_t j = 0; j <= i && j < layers.size(); ++j) x += layers[j].thickness;
    return x;
}

double DeviceSpec::probe_position() const { return interface(1) - probe_depth; }

DeviceSpec DeviceSpec::diamond_pin()
{
    DeviceSpec spec;
    LayerSpec p;
    p.name = "p";
    p.thickness = 2e-4;
    p.doping_type = DopingType::acceptor;
    p.N_dop = 1e19;
    p.E_act = 0.37;
    p.g_deg = 4.0;
    p.comp_ratio = 0.01;
    p.mu_n = 10.0;
    p.mu_p = 10.0;
    LayerSpec i;
    i.name = "i";
    i.thickness = 10e-4;
    i.doping_type = DopingType::intrinsic;
    i.N_dop = 1e13;
    i.mu_n = 2500.0;
    i.mu_p = 1200.0;
    LayerSpec n;
    n.name = "n";
    n.thickness = 0.5e-4;
    n.doping_type = DopingType::donor;
    n.N_dop = 1e18;
    n.E_act = 0.57;
    n.g_deg = 2.0;
    n.comp_ratio = 0.1;
    n.mu_n = 150.0;
    n.mu_p = 150.0;
    spec.layers = {p, i, n};
    return spec;
}

std::size_t Mesh1D::node_at(double pos) const
{
    const auto it = std::lower_bound(x.begin(), x.end(), pos);
    require(it != x.end() && *it == pos, "position is not a mesh node");
    return static_cast<std::size_t>(it - x.begin());
}

double DeviceState::current_spread() const
{
    if (J == 0.0) {
        for (std::size_t k = 0; k < J_n.size(); ++k)
            if (J_n[k] + J_p[k] != 0.0) return std::numeric_limits<double>::infinity();
        return 0.0;
    }
    double worst = 0.0;
    for (std::size_t k = 0; k < J_n.size(); ++k)
        worst = std::max(worst, std::abs(J_n[k] + J_p[k] - J));
    return worst / std::abs(J);
}

// ---------------------------------------------------------------- functions

double bernoulli(double x)
{
    if (std::abs(x) < 1e-4) return 1.0 - x / 2.0 + x * x / 12.0;
    return x / std::expm1(x);
}

double log_bernoulli(double x)
{
    if (std::abs(x) < 1e-4) return std::log1p(-x / 2.0 + x * x / 12.0);
    if (x > 0.0) {
        if (x > 30.0) return std::log(x) - x - std::log1p(-std::exp(-x));
        return std::log(x) - std::log(std::expm1(x));
    }
    return std::log(-x) - std::log(-std::expm1(x));
}

double sg_flux(double D_over_h, double c_left, double c_right, double dpsi_scaled)
{
    return D_over_h * (c_right * bernoulli(dpsi_scaled) - c_left * bernoulli(-dpsi_scaled));
}

double ionization(double N_dop, double E_act, double g_deg, double carrier, double band_dos,
                  double T)
{
    const double c1 = band_dos * std::exp(-E_act / thermal_voltage(T));
    return N_dop / (1.0 + g_deg * carrier / c1);
}

double srh_rate(double n, double p, double n_i, double tau_n, double tau_p)
{
    return (n * p - n_i * n_i) / (tau_p * (n + n_i) + tau_n * (p + n_i));
}

double neutral_potential(const LayerSpec& layer, const MaterialParams& material, double T)
{
    layer.validate();
    material.validate();
    const LayerCharge c = layer_charge(layer, material, T);
    const double ln_ni = material.log_n_i(T);
    const double total = std::max(1.0, layer.donors() + layer.acceptors());
    // n alone exceeds every dopant at the upper end, p at the lower end.
    const double hi = std::log(4.0 * total) - ln_ni;
    auto f = [&](double psi) { return space_charge(c, ln_ni, psi, 0.0, 0.0, total).rho; };
    boost::uintmax_t iters = 300;
    const auto r = boost::math::tools::toms748_solve(
        f, -hi, hi, boost::math::tools::eps_tolerance<double>(50), iters);
    return 0.5 * (r.first + r.second) * thermal_voltage(T);
}

Mesh1D build_mesh(const DeviceSpec& spec) { return build_mesh(spec, spec.mesh_nodes); }

Mesh1D build_mesh(const DeviceSpec& spec, std::size_t nodes)
{
    spec.validate();
    require(nodes >= 3, "mesh needs at least 3 nodes");
    const double vt = thermal_voltage(spec.T);
    const double eps = constants::eps0_cm * spec.material.eps_r;

    std::vector<double> breaks{0.0};
    std::vector<Junction> junctions;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const double xi = spec.interface(i);
        breaks.push_back(xi);
        if (i + 1 == spec.layers.size()) break;
        double dop = 0.0;
        for (std::size_t j : {i, i + 1})
            if (spec.layers[j].doping_type != DopingType::intrinsic)
                dop = std::max(dop, spec.layers[j].N_dop);
        if (dop > 0.0) junctions.push_back({xi, std::sqrt(eps * vt / (constants::q * dop)) / 25.0});
    }
    std::vector<double> stops = breaks;
    bool has_probe = false;
    try {
        spec.validate_pin();
        has_probe = true;
    } catch (const InvalidParameter&) {
    }
    if (has_probe) stops.push_back(spec.probe_position());
    std::sort(stops.begin(), stops.end());

    auto generate = [&](double h_bulk) {
        std::vector<double> x{0.0};
        for (std::size_t s = 0; s + 1 < stops.size(); ++s) {
            auto seg = march(stops[s], stops[s + 1], h_bulk, junctions);
            x.insert(x.end(), seg.begin() + 1, seg.end());
        }
        return x;
    };

    const double L = spec.length();
    double lo = L * 1e-9, hi = L;
    std::vector<double> best = generate(hi);
    require(best.size() <= nodes, "mesh_nodes too small for the junction refinement");
    for (int it = 0; it < 200 && best.size() != nodes; ++it) {
        const double mid = std::sqrt(lo * hi);
        auto x = generate(mid);
        if (x.size() > nodes) {
            lo = mid;
        } else {
            hi = mid;
            best = std::move(x);
        }
        if (hi / lo - 1.0 < 1e-14) break;
    }

    Mesh1D mesh;
    mesh.x = std::move(best);
    mesh.edge_layer.resize(mesh.x.size() - 1);
    std::size_t layer = 0;
    for (std::size_t k = 0; k + 1 < mesh.x.size(); ++k) {
        const double mid = 0.5 * (mesh.x[k] + mesh.x[k + 1]);
        while (layer + 1 < spec.layers.size() && mid > breaks[layer + 1]) ++layer;
        mesh.edge_layer[k] = layer;
    }
    for (std::size_t i = 1; i + 1 < breaks.size(); ++i) mesh.breaks.push_back(mesh.node_at(breaks[i]));
    return mesh;
}

DeviceState solve_equilibrium(const DeviceSpec& spec, const Mesh1D& mesh)
{
    spec.validate();
    Discretization disc(spec, mesh);
    auto v = disc.initial_equilibrium();
    disc.apply_contacts(v);
    std::vector<std::string> trace;
    disc.poisson(v, &trace);
    DeviceState s = disc.export_state(v);
    s.iterations = static_cast<int>(trace.size());
    return s;
}

DeviceState solve_bias(const DeviceSpec& spec, const Mesh1D& mesh, const DeviceState& prev,
                       double V)
{
    spec.validate();
    require(std::isfinite(V), "bias must be finite");
    Discretization disc(spec, mesh);
    auto v = disc.import_state(prev);
    const double vt = disc.vt();
    v.V = V / vt;
    disc.apply_contacts(v);

    constexpr int max_iter = 5000;
    std::vector<std::string> trace;
    double J_prev = std::numeric_limits<double>::quiet_NaN();
    for (int it = 0; it < max_iter; ++it) {
        const std::vector<double> psi_old = v.psi;
        disc.poisson(v, nullptr);
        double dpsi = 0.0;
        for (std::size_t k = 0; k < v.psi.size(); ++k)
            dpsi = std::max(dpsi, std::abs(v.psi[k] - psi_old[k]));
        disc.electron_step(v);
        disc.hole_step(v);
        DeviceState s = disc.export_state(v);
        const double drift = std::isnan(J_prev) ? 1.0 : current_drift(s.J, J_prev);
        const double spread = s.current_spread();
        trace.push_back("gummel " + std::to_string(it) + ": dpsi " + fmt(dpsi * vt) +
                        " V, J " + fmt(s.J) + ", drift " + fmt(drift) + ", spread " +
                        fmt(spread));
        if (!std::isfinite(s.J)) break;
        if (it > 0 && dpsi * vt < 1e-8 && drift < 1e-3 && spread < 1e-4) {
            s.iterations = it + 1;
            return s;
        }
        J_prev = s.J;
    }
    std::ostringstream msg;
    msg << "Gummel iteration did not converge at V = " << fmt(V) << " V";
    const std::size_t from = trace.size() > 6 ? trace.size() - 6 : 0;
    for (std::size_t i = from; i < trace.size(); ++i) msg << "\n  " << trace[i];
    throw NoConvergence(msg.str());
}

namespace {

DeviceState advance(const DeviceSpec& spec, const Mesh1D& mesh, const DeviceState& from,
                    double V, int depth)
{
    try {
        return solve_bias(spec, mesh, from, V);
    } catch (const NoConvergence& e) {
        if (depth >= 10) throw NoConvergence("sweep failed at V = " + fmt(V) + " V: " + e.what());
    }
    const double mid = 0.5 * (from.V + V);
    const DeviceState half = advance(spec, mesh, from, mid, depth + 1);
    return advance(spec, mesh, half, V, depth + 1);
}

} // namespace

std::vector<SweepPoint> iv_sweep(const DeviceSpec& spec, const std::vector<double>& biases)
{
    return iv_sweep(spec, build_mesh(spec), biases);
}

std::vector<SweepPoint> iv_sweep(const DeviceSpec& spec, const Mesh1D& mesh,
                                 const std::vector<double>& biases)
{
    spec.validate();
    std::vector<SweepPoint> out;
    if (biases.empty()) return out;
    require(biases.front() >= 0.0, "bias list must start at or above 0 V");
    for (std::size_t i = 1; i < biases.size(); ++i)
        require(biases[i] > biases[i - 1], "bias list must be strictly increasing");
    DeviceState state = solve_equilibrium(spec, mesh);
    for (double V : biases) {
        state = advance(spec, mesh, state, V, 0);
        out.push_back({V, state.J, state});
    }
    return out;
}

Environment probe(const DeviceState& state, const DeviceSpec& spec)
{
    spec.validate_pin();
    const double pos = spec.probe_position();
    const auto& x = state.x;
    require(x.size() >= 2 && pos >= x.front() && pos <= x.back(), "probe outside the device");
    std::size_t k = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), pos) - x.begin());
    k = std::clamp<std::size_t>(k, 1, x.size() - 1) - 1;
    const double t = (pos - x[k]) / (x[k + 1] - x[k]);
    auto lerp = [&](const std::vector<double>& f) {
        if (t == 0.0) return f[k];
        if (t == 1.0) return f[k + 1];
        return f[k] + t * (f[k + 1] - f[k]);
    };
    const double vt = thermal_voltage(spec.T);
    const double ln_ni = spec.material.log_n_i(spec.T);
    const double psi = lerp(state.psi), phin = lerp(state.phi_n), phip = lerp(state.phi_p);
    Environment env;
    env.n = std::exp(ln_ni + (psi - phin) / vt);
    env.p = std::exp(ln_ni + (phip - psi) / vt);
    env.T = spec.T;
    return env;
}

void write_profile_csv(std::ostream& out, const DeviceState& state)
{
    csv::header(out, {"x_cm", "psi_V", "n_cm3", "p_cm3", "Jn", "Jp"});
    const std::size_t N = state.x.size();
    for (std::size_t k = 0; k < N; ++k) {
        const std::size_t l = k == 0 ? 0 : k - 1;
        const std::size_t r = k + 1 == N ? N - 2 : k;
        csv::row(out, {state.x[k], state.psi[k], state.n[k], state.p[k],
                       0.5 * (state.J_n[l] + state.J_n[r]), 0.5 * (state.J_p[l] + state.J_p[r])});
    }
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& sweep,
                     const DeviceSpec& spec)
{
    csv::header(out, {"V", "J_Acm2", "n_probe", "p_probe"});
    for (const auto& pt : sweep) {
        const Environment env = probe(pt.state, spec);
        csv::row(out, {pt.V, pt.J, env.n, env.p});
    }
}

} // namespace epcc
