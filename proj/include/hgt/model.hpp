#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "field.hpp"
#include "kernels.hpp"
#include "root_finding.hpp"

namespace hgt {

// Full parameter set for one experiment. Immutable after construction in
// the solvers; validate() is the single gate for structural requirements.
struct ModelConfig {
    TransferKernel kernel = TransferKernel::tanh_kernel();

    double g = 1.0;       // selection curvature
    double tau = 1.0;     // transfer strength
    double epsilon = 1e-2;
    double z0 = 0.0;      // initial concentration trait
    double c = 1.0;       // initial Gaussian stiffness, u0 = -c (z - z0)^2
    double L = 0.0;       // domain half-width; 0 = derive from g, z0, mu
    int N = 1025;
    double dt = 1e-3;     // upper bound on the step; solvers sub-step to CFL
    double T = 30.0;
    bool mass_normalize = true; // scale n(0) so that rho(0) = R(z0)
    bool dp_full_scan = false;  // Hopf-Lax verification mode (O(N^2) inner max)

    // growth rate R: quadratic 1 - g z^2 unless a custom profile is installed
    std::optional<GrowthProfile> custom_growth;

    GrowthProfile growth() const {
        return custom_growth ? *custom_growth : GrowthProfile::quadratic(g);
    }
    bool quadratic_growth() const { return !custom_growth; }

    double mu() const { return tau / (2.0 * g); }

    double half_width() const {
        if (L > 0.0) return L;
        return std::max({3.0 / std::sqrt(g), std::abs(z0) + 5.0, mu() + 5.0});
    }

    double dz() const { return 2.0 * half_width() / (N - 1); }

    Field1D make_grid(double fill = 0.0) const {
        return Field1D(-half_width(), half_width(), N, fill);
    }

    void validate() const {
        if (!(g > 0.0)) throw config_error("g must be positive");
        // tau = 0 is the classical no-transfer baseline and stays legal
        if (!(tau >= 0.0)) throw config_error("tau must be nonnegative");
        if (!(epsilon > 0.0)) throw config_error("epsilon must be positive");
        if (!(c > 0.0)) throw config_error("c must be positive");
        if (N < 8) throw config_error("N must be at least 8");
        if (!(dt > 0.0)) throw config_error("dt must be positive");
        if (!(T > 0.0)) throw config_error("T must be positive");
        if (!std::isfinite(mu()) || !(mu() >= 0.0))
            throw config_error("mu = tau/(2g) must be finite and nonnegative");
        const double zh = kernel.z_inflection();
        if (dz() > zh / 10.0 + 1e-15)
            throw config_error("grid does not resolve the kernel: need dz <= z_H/10 (raise N or lower L)");
        const auto dr = growth().positive_set();
        if (!(z0 > dr.first && z0 < dr.second))
            throw config_error("z0 outside D_R: initial population would be maladapted");
    }

    std::string canonical_text() const {
        std::ostringstream os;
        os.precision(17);
        os << "kernel=" << kernel.name() << '\n'
           << "g=" << g << '\n'
           << "tau=" << tau << '\n'
           << "epsilon=" << epsilon << '\n'
           << "z0=" << z0 << '\n'
           << "c=" << c << '\n'
           << "L=" << L << '\n'
           << "N=" << N << '\n'
           << "dt=" << dt << '\n'
           << "T=" << T << '\n'
           << "solver=" << (mass_normalize ? "mass-norm" : "no-mass-norm")
           << (dp_full_scan ? ",dp-full-scan" : "") << '\n';
        return os.str();
    }

    std::uint64_t hash() const {
        // FNV-1a over the canonical text
        std::uint64_t h = 1469598103934665603ull;
        for (unsigned char ch : canonical_text()) {
            h ^= ch;
            h *= 1099511628211ull;
        }
        return h;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline double parse_real(const std::string& v, const std::string& key, int line) {
    size_t pos = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw config_error("invalid numeric value for key '" + key + "'", line);
    }
    if (pos != v.size()) throw config_error("trailing characters in value for key '" + key + "'", line);
    return x;
}

inline int parse_int(const std::string& v, const std::string& key, int line) {
    size_t pos = 0;
    int x = 0;
    try {
        x = std::stoi(v, &pos);
    } catch (const std::exception&) {
        throw config_error("invalid integer value for key '" + key + "'", line);
    }
    if (pos != v.size()) throw config_error("trailing characters in value for key '" + key + "'", line);
    return x;
}

inline std::vector<std::pair<double, double>> read_two_column_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open kernel table file: " + path);
    std::vector<std::pair<double, double>> rows;
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::istringstream is(t);
        double x = 0.0, y = 0.0;
        if (!(is >> x >> y)) throw config_error("bad kernel table row", ln);
        rows.emplace_back(x, y);
    }
    return rows;
}

} // namespace detail

inline TransferKernel kernel_by_name(const std::string& name, int line = 0) {
    if (name == "tanh") return TransferKernel::tanh_kernel();
    if (name == "scaled-arctan") return TransferKernel::scaled_arctan();
    if (name == "raw-arctan") return TransferKernel::raw_arctan();
    if (name.rfind("table:", 0) == 0) {
        const std::string path = name.substr(6);
        auto rows = detail::read_two_column_file(path);
        std::vector<double> x, h;
        x.reserve(rows.size());
        h.reserve(rows.size());
        for (auto& [a, b] : rows) {
            x.push_back(a);
            h.push_back(b);
        }
        return TransferKernel::tabulated(std::move(x), std::move(h), name);
    }
    throw config_error("unknown kernel '" + name + "'", line);
}

// Apply one "key=value" assignment. Shared by the file parser and by
// command-line overrides (same key set).
inline void apply_config_entry(ModelConfig& cfg, const std::string& key,
                               const std::string& value, int line = 0) {
    using detail::parse_int;
    using detail::parse_real;
    if (key == "kernel") {
        cfg.kernel = kernel_by_name(value, line);
    } else if (key == "g") {
        cfg.g = parse_real(value, key, line);
    } else if (key == "tau") {
        cfg.tau = parse_real(value, key, line);
    } else if (key == "epsilon") {
        cfg.epsilon = parse_real(value, key, line);
    } else if (key == "z0") {
        cfg.z0 = parse_real(value, key, line);
    } else if (key == "c") {
        cfg.c = parse_real(value, key, line);
    } else if (key == "L") {
        cfg.L = parse_real(value, key, line);
    } else if (key == "N") {
        cfg.N = parse_int(value, key, line);
    } else if (key == "dt") {
        cfg.dt = parse_real(value, key, line);
    } else if (key == "T") {
        cfg.T = parse_real(value, key, line);
    } else if (key == "solver") {
        std::istringstream is(value);
        std::string tok;
        while (std::getline(is, tok, ',')) {
            tok = detail::trim(tok);
            if (tok == "mass-norm") cfg.mass_normalize = true;
            else if (tok == "no-mass-norm") cfg.mass_normalize = false;
            else if (tok == "dp-full-scan") cfg.dp_full_scan = true;
            else if (tok == "dp-windowed") cfg.dp_full_scan = false;
            else if (!tok.empty()) throw config_error("unknown solver switch '" + tok + "'", line);
        }
    } else {
        throw config_error("unknown config key '" + key + "'", line);
    }
}

// Plain-text key=value config with '#' comments. Unknown keys are errors.
inline ModelConfig parse_config(std::istream& in) {
    ModelConfig cfg;
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        std::string t = detail::trim(line);
        const auto hash_pos = t.find('#');
        if (hash_pos != std::string::npos) t = detail::trim(t.substr(0, hash_pos));
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw config_error("expected key=value", ln);
        const std::string key = detail::trim(t.substr(0, eq));
        const std::string value = detail::trim(t.substr(eq + 1));
        if (key.empty()) throw config_error("empty key", ln);
        apply_config_entry(cfg, key, value, ln);
    }
    return cfg;
}

inline ModelConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    return parse_config(in);
}

inline void apply_override(ModelConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw config_error("override must be KEY=VALUE: " + assignment);
    apply_config_entry(cfg, detail::trim(assignment.substr(0, eq)),
                       detail::trim(assignment.substr(eq + 1)));
}

// --- thresholds -----------------------------------------------------------

// The unique positive root of phi(d) = d (1 + H'(d)) - 2 H(d). The bracket
// starts at (max(z_H, 0.1), 50) and expands downward, so the d1 > z_H claim
// is checked rather than assumed.
inline double compute_d1(const TransferKernel& k, double tol = 1e-12) {
    auto phi = [&k](double d) { return d * (1.0 + k(d, 1)) - 2.0 * k(d, 0); };

    const double zh = k.z_inflection();
    double lo = std::max(zh, 0.1);
    const double hi = 50.0;
    if (phi(hi) <= 0.0)
        throw hypothesis_error("d1 bracket failure: phi(50) <= 0");
    bool expanded_below_zh = false;
    while (phi(lo) >= 0.0) {
        lo *= 0.5;
        expanded_below_zh = true;
        if (lo < 1e-6)
            throw hypothesis_error("no bracket for d1 on (1e-6, 50): kernel hypotheses violated");
    }
    const double d1 = bisect(phi, lo, hi, 1e-16, tol, 400);
    if (std::abs(phi(d1)) > tol)
        throw hypothesis_error("d1 bisection did not reach requested residual");
    if (expanded_below_zh && d1 <= zh)
        throw hypothesis_error("found root of phi at or below z_H, contradicting d1 > z_H");
    if (!(phi(0.5 * d1) < 0.0) || !(phi(2.0 * d1) > 0.0))
        throw hypothesis_error("phi sign pattern around d1 violated");
    return d1;
}

// mu_1 = d1 / (1 - H'(d1)); the alternate closed form
// 2 H(d1) / ((1 - H'(d1)) (1 + H'(d1))) must agree to 1e-9.
inline double compute_mu1(const TransferKernel& k) {
    const double d1 = compute_d1(k);
    const double hp = k(d1, 1);
    if (hp >= 1.0) throw hypothesis_error("degenerate kernel: H'(d1) >= 1");
    const double mu1 = d1 / (1.0 - hp);
    const double alt = 2.0 * k(d1, 0) / ((1.0 - hp) * (1.0 + hp));
    if (std::abs(mu1 - alt) > 1e-9 * std::max(1.0, std::abs(mu1)))
        throw error("mu1 closed forms disagree beyond 1e-9");
    return mu1;
}

// --- fitness --------------------------------------------------------------

// Stationary fitness F_mu(z) = -g (z^2 - mu^2) + tau H(z - mu).
inline double fitness_stationary(double z, double mu, const ModelConfig& cfg) {
    if (cfg.quadratic_growth())
        return -cfg.g * (z * z - mu * mu) + cfg.tau * cfg.kernel(z - mu);
    const GrowthProfile r = cfg.growth();
    return r(z) - r(mu) + cfg.tau * cfg.kernel(z - mu);
}

// Dynamic fitness F(t, z) = -g (z^2 - zbar^2) + tau H(z - zbar) and its
// z-derivatives (order 0..2).
inline double fitness_dynamic(double z, double zbar, const ModelConfig& cfg, int order = 0) {
    if (cfg.quadratic_growth()) {
        switch (order) {
            case 0: return -cfg.g * (z * z - zbar * zbar) + cfg.tau * cfg.kernel(z - zbar);
            case 1: return -2.0 * cfg.g * z + cfg.tau * cfg.kernel(z - zbar, 1);
            case 2: return -2.0 * cfg.g + cfg.tau * cfg.kernel(z - zbar, 2);
            default: throw std::invalid_argument("fitness_dynamic order must be 0..2");
        }
    }
    const GrowthProfile r = cfg.growth();
    switch (order) {
        case 0: return r(z) - r(zbar) + cfg.tau * cfg.kernel(z - zbar);
        case 1: return r(z, 1) + cfg.tau * cfg.kernel(z - zbar, 1);
        case 2: return r(z, 2) + cfg.tau * cfg.kernel(z - zbar, 2);
        default: throw std::invalid_argument("fitness_dynamic order must be 0..2");
    }
}

// --- regime classification -------------------------------------------------

enum class Regime {
    MonomorphicConvergence,
    SuicideFiniteTime,
    SuicideAsymptotic,
    BeyondMu1,
};

inline const char* to_string(Regime r) {
    switch (r) {
        case Regime::MonomorphicConvergence: return "monomorphic-convergence";
        case Regime::SuicideFiniteTime: return "suicide-finite-time";
        case Regime::SuicideAsymptotic: return "suicide-asymptotic";
        case Regime::BeyondMu1: return "beyond-mu1";
    }
    return "?";
}

struct RegimeReport {
    double mu = 0.0;
    double mu1 = 0.0;
    double d1 = 0.0;
    Regime regime = Regime::MonomorphicConvergence;
    std::optional<double> predicted_limit_trait;
    std::optional<double> predicted_extinction_trait;
    bool at_tau_boundary = false; // within 1e-12 relative of tau = 2 sqrt(g)
};

inline RegimeReport classify_regime(const ModelConfig& cfg) {
    if (!cfg.quadratic_growth())
        throw error("regime classification requires the quadratic growth family");
    RegimeReport rep;
    rep.d1 = compute_d1(cfg.kernel);
    rep.mu1 = compute_mu1(cfg.kernel);
    rep.mu = cfg.mu();

    if (rep.mu > rep.mu1) {
        rep.regime = Regime::BeyondMu1;
        return rep;
    }
    const double tau_b = 2.0 * std::sqrt(cfg.g);
    const double rel = std::abs(cfg.tau - tau_b) / std::max(cfg.tau, tau_b);
    if (rel <= 1e-12) {
        // statement (tau <= 2 sqrt g) and Remark 1.5 (extinct as t -> inf)
        // disagree at the boundary; report asymptotic suicide with both
        // predicted traits carried.
        rep.regime = Regime::SuicideAsymptotic;
        rep.at_tau_boundary = true;
        rep.predicted_limit_trait = rep.mu;
        rep.predicted_extinction_trait = 1.0 / std::sqrt(cfg.g);
    } else if (cfg.tau < tau_b) {
        rep.regime = Regime::MonomorphicConvergence;
        rep.predicted_limit_trait = rep.mu;
    } else {
        rep.regime = Regime::SuicideFiniteTime;
        rep.predicted_extinction_trait = 1.0 / std::sqrt(cfg.g);
    }
    return rep;
}

enum class FitnessType { TypeOne, TypeTwo, Degenerate };

inline const char* to_string(FitnessType t) {
    switch (t) {
        case FitnessType::TypeOne: return "type-one";
        case FitnessType::TypeTwo: return "type-two";
        case FitnessType::Degenerate: return "degenerate";
    }
    return "?";
}

// Count the connected components of {F(0, z) > 0} on [-L, L] at grid
// resolution with bisection-refined endpoints; tangency slivers thinner
// than 2 dz do not count as components.
inline FitnessType classify_initial_fitness_type(const ModelConfig& cfg) {
    const double l = cfg.half_width();
    auto f = [&](double z) { return fitness_dynamic(z, cfg.z0, cfg); };
    auto iv = positive_intervals(f, -l, l, cfg.N, 1e-10);
    int count = 0;
    for (const auto& s : iv)
        if (s.width() >= 2.0 * cfg.dz()) ++count;
    if (count == 0) return FitnessType::Degenerate;
    return count == 1 ? FitnessType::TypeOne : FitnessType::TypeTwo;
}

} // namespace hgt
