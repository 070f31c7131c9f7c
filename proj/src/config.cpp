#include "epcc/config.hpp"

#include "epcc/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <type_traits>

namespace epcc {

namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Reads the keys of one section and remembers which ones were consumed.
class Section {
  public:
    Section(std::string name, const pt::ptree* tree) : name_(std::move(name)), tree_(tree) {}

    bool present() const { return tree_ != nullptr; }

    void number(const char* key, double& out)
    {
        if (auto v = raw(key)) out = parse_double(key, *v);
    }

    void number(const char* key, std::optional<double>& out)
    {
        if (auto v = raw(key)) out = parse_double(key, *v);
    }

    template <class U>
    void count(const char* key, U& out)
    {
        static_assert(std::is_unsigned_v<U>);
        if (auto v = raw(key)) out = static_cast<U>(parse_u64(key, *v));
    }

    void flag(const char* key, bool& out)
    {
        if (auto v = raw(key)) {
            if (*v == "true" || *v == "1") out = true;
            else if (*v == "false" || *v == "0") out = false;
            else fail(key, "expected true or false, got '" + *v + "'");
        }
    }

    void doping(const char* key, DopingType& out)
    {
        if (auto v = raw(key)) {
            if (*v == "donor") out = DopingType::donor;
            else if (*v == "acceptor") out = DopingType::acceptor;
            else if (*v == "intrinsic") out = DopingType::intrinsic;
            else fail(key, "expected donor, acceptor or intrinsic, got '" + *v + "'");
        }
    }

    /// Throws on the first key that no reader asked for.
    void finish() const
    {
        if (!tree_) return;
        for (const auto& [key, _] : *tree_)
            if (!seen_.count(key)) throw ConfigError(name_ + "." + key + ": unknown key");
    }

  private:
    std::optional<std::string> raw(const char* key)
    {
        seen_.insert(key);
        if (!tree_) return std::nullopt;
        const auto it = tree_->find(key);
        if (it == tree_->not_found()) return std::nullopt;
        return trim(it->second.data());
    }

    [[noreturn]] void fail(const char* key, const std::string& what) const
    {
        throw ConfigError(name_ + "." + key + ": " + what);
    }

    double parse_double(const char* key, const std::string& s) const
    {
        double v = 0.0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
            fail(key, "expected a number, got '" + s + "'");
        return v;
    }

    std::uint64_t parse_u64(const char* key, const std::string& s) const
    {
        std::uint64_t v = 0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
            // Allow integral values written in exponent form, e.g. 1e6.
            const double d = parse_double(key, s);
            if (d < 0.0 || d != std::floor(d) || d > 1.8e19)
                fail(key, "expected a non-negative integer, got '" + s + "'");
            return static_cast<std::uint64_t>(d);
        }
        return v;
    }

    std::string name_;
    const pt::ptree* tree_;
    std::set<std::string> seen_;
};

void read_layer(Section& s, LayerSpec& l)
{
    s.number("thickness_cm", l.thickness);
    s.doping("doping_type", l.doping_type);
    s.number("N_dop_cm3", l.N_dop);
    s.number("E_act_eV", l.E_act);
    s.number("g_deg", l.g_deg);
    s.number("comp_ratio", l.comp_ratio);
    s.number("mu_n_cm2_per_Vs", l.mu_n);
    s.number("mu_p_cm2_per_Vs", l.mu_p);
    s.number("srh_tau_n_s", l.srh_tau_n);
    s.number("srh_tau_p_s", l.srh_tau_p);
    s.finish();
}

// Re-raises validation failures with the section they came from.
template <class F>
void in_section(const std::string& name, F&& f)
{
    try {
        f();
    } catch (const InvalidParameter& e) {
        throw ConfigError("[" + name + "] " + e.what());
    }
}

} // namespace

void SweepConfig::validate() const
{
    auto grid_ok = [](double lo, double hi, std::size_t n) {
        return lo > 0.0 && hi >= lo && std::isfinite(hi) && n >= 1 && (n > 1 || lo == hi);
    };
    if (!grid_ok(n_min, n_max, n_points)) throw InvalidParameter("invalid n grid");
    if (!grid_ok(p_min, p_max, p_points)) throw InvalidParameter("invalid p grid");
    if (!(V_max > 0.0) || V_points < 2) throw InvalidParameter("V_max must be > 0 with at least 2 points");
    if (delay_points < 2 || !(delay_lo_factor > 0.0) || !(delay_hi_factor > delay_lo_factor))
        throw InvalidParameter("invalid delay grid");
}

std::vector<double> SweepConfig::biases() const
{
    std::vector<double> v(V_points);
    for (std::size_t i = 0; i < V_points; ++i)
        v[i] = V_max * static_cast<double>(i) / static_cast<double>(V_points - 1);
    return v;
}

void MonteCarloConfig::validate() const
{
    if (duration < 0.0 || !std::isfinite(duration)) throw InvalidParameter("duration must be >= 0");
    if (duration == 0.0 && !(target_photons >= 1.0))
        throw InvalidParameter("target_photons must be >= 1 when duration is 0");
    if (bin_width < 0.0 || max_delay < 0.0)
        throw InvalidParameter("bin_width and max_delay must be >= 0");
    if (max_events == 0) throw InvalidParameter("max_events must be > 0");
}

void RunConfig::validate() const
{
    in_section("center", [&] { center.validate(); });
    in_section("environment", [&] { environment.validate(); });
    if (three_level) in_section("three_level", [&] { three_level->validate(); });
    if (device) in_section("device", [&] { device->validate_pin(); });
    in_section("sweep", [&] { sweep.validate(); });
    in_section("monte_carlo", [&] { monte_carlo.validate(); });
}

const ThreeLevelModel& RunConfig::require_three_level() const
{
    if (!three_level) throw ConfigError("missing section [three_level]");
    return *three_level;
}

const DeviceSpec& RunConfig::require_device() const
{
    if (!device)
        throw ConfigError("missing device description ([device], [material] or [layer.*])");
    return *device;
}

RunConfig parse_config(std::istream& in, const std::string& source)
{
    pt::ptree tree;
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
    }

    static const std::set<std::string> known = {
        "center", "environment", "three_level", "material", "layer.p", "layer.i",
        "layer.n", "device", "sweep", "monte_carlo"};
    std::map<std::string, const pt::ptree*> sections;
    for (const auto& [name, child] : tree) {
        if (!child.data().empty() && child.empty())
            throw ConfigError(name + ": key outside of any section");
        if (!known.count(name)) throw ConfigError(name + ": unknown section");
        sections[name] = &child;
    }
    auto section = [&](const std::string& name) {
        const auto it = sections.find(name);
        return Section(name, it == sections.end() ? nullptr : it->second);
    };

    RunConfig cfg;
    {
        auto s = section("center");
        s.number("sigma_n_cm2", cfg.center.sigma_n);
        s.number("sigma_p_cm2", cfg.center.sigma_p);
        s.number("tau_r_s", cfg.center.tau_r);
        s.number("eta", cfg.center.eta);
        s.number("e_n_per_s", cfg.center.e_n);
        s.number("e_p_per_s", cfg.center.e_p);
        s.number("e_r_per_s", cfg.center.e_r);
        s.number("c_n_cm3_per_s", cfg.center.c_n);
        s.number("c_p_cm3_per_s", cfg.center.c_p);
        s.finish();
    }
    {
        auto s = section("environment");
        s.number("n_cm3", cfg.environment.n);
        s.number("p_cm3", cfg.environment.p);
        s.number("T_K", cfg.environment.T);
        s.number("m_eff_n", cfg.environment.m_eff_n);
        s.number("m_eff_p", cfg.environment.m_eff_p);
        s.finish();
    }
    {
        auto s = section("three_level");
        if (s.present()) {
            ThreeLevelModel m;
            s.number("tau_r_s", m.tau_r);
            s.number("tau_nr_s", m.tau_nr);
            s.number("tau_s_s", m.tau_s);
            s.number("sigma_n_cm2", m.sigma_n);
            s.number("sigma_p_cm2", m.sigma_p);
            s.number("e_n_per_s", m.e_n);
            s.number("e_p_per_s", m.e_p);
            s.number("e_r_per_s", m.e_r);
            s.flag("shelving_capture", m.shelving_capture);
            s.finish();
            cfg.three_level = m;
        }
    }
    {
        auto mat = section("material");
        auto dev = section("device");
        Section layers[] = {section("layer.p"), section("layer.i"), section("layer.n")};
        const bool any = mat.present() || dev.present() || layers[0].present() ||
                         layers[1].present() || layers[2].present();
        if (any) {
            DeviceSpec spec = DeviceSpec::diamond_pin();
            mat.number("eps_r", spec.material.eps_r);
            mat.number("E_g_eV", spec.material.E_g);
            mat.number("N_c_cm3", spec.material.N_c);
            mat.number("N_v_cm3", spec.material.N_v);
            mat.finish();
            for (int i = 0; i < 3; ++i) read_layer(layers[i], spec.layers[i]);
            dev.number("T_K", spec.T);
            dev.number("probe_depth_cm", spec.probe_depth);
            dev.count("mesh_nodes", spec.mesh_nodes);
            dev.finish();
            cfg.device = spec;
        }
    }
    {
        auto s = section("sweep");
        auto& w = cfg.sweep;
        s.number("n_min_cm3", w.n_min);
        s.number("n_max_cm3", w.n_max);
        s.count("n_points", w.n_points);
        s.number("p_min_cm3", w.p_min);
        s.number("p_max_cm3", w.p_max);
        s.count("p_points", w.p_points);
        s.number("V_max_V", w.V_max);
        s.count("V_points", w.V_points);
        s.count("delay_points", w.delay_points);
        s.number("delay_lo_factor", w.delay_lo_factor);
        s.number("delay_hi_factor", w.delay_hi_factor);
        s.finish();
    }
    {
        auto s = section("monte_carlo");
        auto& m = cfg.monte_carlo;
        s.number("duration_s", m.duration);
        s.number("target_photons", m.target_photons);
        s.count("seed", m.seed);
        s.number("bin_width_s", m.bin_width);
        s.number("max_delay_s", m.max_delay);
        s.count("max_events", m.max_events);
        s.finish();
    }
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_config(in, path);
}

} // namespace epcc
