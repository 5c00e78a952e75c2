#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "errors.hpp"
#include "field.hpp"
#include "root_finding.hpp"

namespace hgt::oracle {

// Discrete Lax-Oleinik table: values[k][j] ~ u(times[k], z_j).
struct DPTable {
    double z_min = 0.0, dz = 0.0;
    int n = 0;
    std::vector<double> times;
    std::vector<std::vector<double>> values;

    double z(int j) const { return z_min + j * dz; }

    int time_index(double t) const {
        int best = 0;
        double err = std::abs(times[0] - t);
        for (size_t k = 1; k < times.size(); ++k) {
            const double e = std::abs(times[k] - t);
            if (e < err) {
                err = e;
                best = static_cast<int>(k);
            }
        }
        return best;
    }

    const std::vector<double>& final_slice() const { return values.back(); }

    // one time slice as a grid field (snapshot-file dumping)
    Field1D slice_field(int k) const {
        Field1D f(z_min, z_min + (n - 1) * dz, n);
        const auto& v = values[static_cast<size_t>(k)];
        for (int j = 0; j < n; ++j) f[j] = v[static_cast<size_t>(j)];
        return f;
    }

    double interp(int k, double zq) const {
        const auto& v = values[static_cast<size_t>(k)];
        if (zq <= z_min) return v.front();
        if (zq >= z_min + (n - 1) * dz) return v.back();
        const double s = (zq - z_min) / dz;
        const int i = std::min(static_cast<int>(s), n - 2);
        const double w = s - i;
        return (1.0 - w) * v[i] + w * v[i + 1];
    }

    // centered difference in z at the node nearest zq
    double gradient(int k, double zq) const {
        int i = static_cast<int>(std::lround((zq - z_min) / dz));
        i = std::max(1, std::min(n - 2, i));
        const auto& v = values[static_cast<size_t>(k)];
        return (v[i + 1] - v[i - 1]) / (2.0 * dz);
    }
};

struct DPOptions {
    bool full_scan = false;  // verification mode: full O(N^2) inner max every step
    bool refine_max = false; // parabolic refinement of the discrete inner max
    double window_safety = 1.5;
};

// u_{k+1}(z_j) = max_i [ u_k(z_i) - (z_j - z_i)^2 / (4 dt) ] + dt F(t_k, z_j).
// The quadratic cost is the Legendre transform of the Hamiltonian p^2. After
// a first full-scan step the inner max is restricted to a window of width
// 2 max|u_z| dt (times a safety factor), which provably contains the argmax
// for concave-window data; full_scan retains the exhaustive mode.
inline DPTable hopf_lax_dp(const Field1D& u0,
                           const std::function<double(double, double)>& fitness,
                           double dt, double t_end, const DPOptions& opt = {}) {
    if (!(dt > 0.0)) throw error("hopf_lax_dp: dt must be positive");
    const int n = u0.size();
    const double dz = u0.dz();
    const int steps = static_cast<int>(std::ceil(t_end / dt - 1e-12));

    DPTable table;
    table.z_min = u0.z_min();
    table.dz = dz;
    table.n = n;
    table.times.reserve(steps + 1);
    table.values.reserve(steps + 1);
    table.times.push_back(0.0);
    table.values.emplace_back(u0.values().begin(), u0.values().end());

    std::vector<double> next(n);
    for (int k = 0; k < steps; ++k) {
        const auto& cur = table.values.back();
        const double t_k = table.times.back();
        const double dt_k = std::min(dt, t_end - t_k);

        int window = n; // first step scans everything
        if (k > 0 && !opt.full_scan) {
            double smax = 0.0;
            for (int i = 1; i < n; ++i)
                smax = std::max(smax, std::abs(cur[i] - cur[i - 1]) / dz);
            window = static_cast<int>(std::ceil(2.0 * smax * dt_k * opt.window_safety / dz)) + 2;
        }

        const double inv4dt = 1.0 / (4.0 * dt_k);
        for (int j = 0; j < n; ++j) {
            const int lo = std::max(0, j - window);
            const int hi = std::min(n - 1, j + window);
            int ibest = lo;
            double best = -std::numeric_limits<double>::infinity();
            for (int i = lo; i <= hi; ++i) {
                const double d = (j - i) * dz;
                const double cand = cur[i] - d * d * inv4dt;
                if (cand > best) {
                    best = cand;
                    ibest = i;
                }
            }
            if (opt.refine_max && ibest > lo && ibest < hi) {
                // parabolic vertex of P(i) = u(z_i) - (z_j - z_i)^2/(4 dt)
                auto p = [&](int i) {
                    const double d = (j - i) * dz;
                    return cur[i] - d * d * inv4dt;
                };
                const double a = p(ibest - 1), b = best, c = p(ibest + 1);
                const double denom = a - 2.0 * b + c;
                if (denom < 0.0) {
                    double off = 0.5 * (a - c) / denom;
                    off = std::clamp(off, -0.5, 0.5);
                    best = b + 0.5 * (c - a) * off + 0.5 * denom * off * off;
                }
            }
            next[j] = best + dt_k * fitness(t_k, u0.z(j));
        }
        table.times.push_back(t_k + dt_k);
        table.values.push_back(next);
    }
    return table;
}

struct ShootOptions {
    double t_start = 0.0;   // DPP restart time; u0 is the state at t_start
    int rk_steps = 2000;    // classic fourth-order steps over [t_start, t]
    int bracket_scan = 160; // panels when scanning for the shooting root
    double p_max = 1.0;     // bound on |u_z|; sets the initial-point bracket
    double target_tol = 1e-10;
};

struct ShootResult {
    bool multivalued = false; // != 1 candidate trajectory in the bracket
    std::vector<double> s, gamma, gamma_dot;
    double gamma0 = 0.0;
    double action = 0.0;   // f_t(gamma)
    double gradient = 0.0; // -gamma_dot(t)/2 ~ u_z(t, z)
};

namespace detail {

struct ShootEnd {
    double g, v, a;
};

// integrate gamma'' = -2 F_z(s, gamma), action' = -v^2/4 + F(s, gamma)
template <class FitnessZ, class Fitness>
inline ShootEnd integrate_trajectory(double g0, double v0, double a0, double s0, double s1,
                                     int steps, FitnessZ&& fz, Fitness&& f,
                                     std::vector<double>* ts = nullptr,
                                     std::vector<double>* gs = nullptr,
                                     std::vector<double>* vs = nullptr) {
    const double h = (s1 - s0) / steps;
    double g = g0, v = v0, a = a0;
    if (ts) {
        ts->push_back(s0);
        gs->push_back(g);
        vs->push_back(v);
    }
    for (int k = 0; k < steps; ++k) {
        const double s = s0 + k * h;
        auto rhs = [&](double si, double gi, double vi, double& dg, double& dv, double& da) {
            dg = vi;
            dv = -2.0 * fz(si, gi);
            da = -0.25 * vi * vi + f(si, gi);
        };
        double k1g, k1v, k1a, k2g, k2v, k2a, k3g, k3v, k3a, k4g, k4v, k4a;
        rhs(s, g, v, k1g, k1v, k1a);
        rhs(s + 0.5 * h, g + 0.5 * h * k1g, v + 0.5 * h * k1v, k2g, k2v, k2a);
        rhs(s + 0.5 * h, g + 0.5 * h * k2g, v + 0.5 * h * k2v, k3g, k3v, k3a);
        rhs(s + h, g + h * k3g, v + h * k3v, k4g, k4v, k4a);
        g += h / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        a += h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
        if (ts) {
            ts->push_back(s + h);
            gs->push_back(g);
            vs->push_back(v);
        }
    }
    return {g, v, a};
}

} // namespace detail

// Shooting solution of the Euler-Lagrange boundary value problem
//   gamma'' = -2 F_z(s, gamma), gamma'(t_start) = -2 u0'(gamma(t_start)),
//   gamma(t) = z,
// scanning gamma(t_start) over [z - 2 (t - t_start) p_max, z + ...] for the
// terminal match. The terminal velocity encodes the value-function gradient
// through u_z(t, z) = -gamma_dot(t)/2. When the scan finds zero or several
// candidates the result carries the multivalued flag (expected outside
// concavity windows); with several, the max-action trajectory is returned.
inline ShootResult euler_lagrange_shoot(double t, double z,
                                        const std::function<double(double, double)>& fitness,
                                        const std::function<double(double, double)>& fitness_dz,
                                        const std::function<double(double)>& u0,
                                        const std::function<double(double)>& u0_grad,
                                        const ShootOptions& opt = {}) {
    if (!(t > opt.t_start)) throw error("euler_lagrange_shoot: need t > t_start");
    const double horizon = t - opt.t_start;
    const double half = 2.0 * horizon * opt.p_max;

    auto end_of = [&](double g0) {
        return detail::integrate_trajectory(g0, -2.0 * u0_grad(g0), u0(g0), opt.t_start, t,
                                            opt.rk_steps, fitness_dz, fitness);
    };
    auto miss = [&](double g0) { return end_of(g0).g - z; };

    // collect all sign changes of the terminal miss across the bracket
    std::vector<std::pair<double, double>> candidates;
    double x0 = z - half;
    double m0 = miss(x0);
    for (int i = 1; i <= opt.bracket_scan; ++i) {
        const double x1 = z - half + 2.0 * half * i / opt.bracket_scan;
        const double m1 = miss(x1);
        if (m0 == 0.0 || m0 * m1 < 0.0) candidates.emplace_back(x0, x1);
        x0 = x1;
        m0 = m1;
    }

    ShootResult res;
    res.multivalued = candidates.size() != 1;
    if (candidates.empty()) {
        res.action = res.gradient = res.gamma0 = std::numeric_limits<double>::quiet_NaN();
        return res;
    }

    double best_action = -std::numeric_limits<double>::infinity();
    double best_g0 = 0.0;
    for (auto [lo, hi] : candidates) {
        double g0 = bisect(miss, lo, hi, 1e-15, opt.target_tol, 120);
        const auto e = end_of(g0);
        if (e.a > best_action) {
            best_action = e.a;
            best_g0 = g0;
        }
    }

    res.gamma0 = best_g0;
    const auto e = detail::integrate_trajectory(best_g0, -2.0 * u0_grad(best_g0), u0(best_g0),
                                                opt.t_start, t, opt.rk_steps, fitness_dz,
                                                fitness, &res.s, &res.gamma, &res.gamma_dot);
    res.action = e.a;
    res.gradient = -0.5 * e.v;
    return res;
}

// Closed-form mass relaxation of the fast ODE  J' = R - e^J, J(0) = J0:
//   J(s) = ln R + R s - ln(R e^{-J0} + e^{R s} - 1).
// Evaluated through expm1/log1p so both signs of R and large R s are stable;
// the R -> 0 removable singularity uses the series J = -ln(e^{-J0} + s).
inline double mass_relaxation(double J0, double Rz, double s) {
    if (Rz == 0.0) return -std::log(std::exp(-J0) + s);
    const double rs = Rz * s;
    if (rs > 700.0) {
        // e^{R s} dominates; J -> ln R from the configured J0 side
        return std::log(Rz) - std::log1p((Rz * std::exp(-J0) - 1.0) * std::exp(-rs));
    }
    const double denom = Rz * std::exp(-J0) + std::expm1(rs);
    if (denom == 0.0 || (denom > 0.0) != (Rz > 0.0))
        throw std::domain_error("mass_relaxation: log argument not positive (invalid J0/Rz pairing)");
    return rs + std::log(std::abs(Rz)) - std::log(std::abs(denom));
}

} // namespace hgt::oracle
