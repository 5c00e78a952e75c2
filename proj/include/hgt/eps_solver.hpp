#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "diagnostics.hpp"
#include "errors.hpp"
#include "field.hpp"
#include "model.hpp"
#include "run_record.hpp"

namespace hgt::eps {

struct State {
    double t = 0.0;
    Field1D u;   // u_eps = eps ln n_eps
    Field1D phi; // transfer flux field
    std::vector<double> weights; // normalized measure n/rho on the grid
    double log_rho = 0.0;
    double rho = 0.0;
    double zbar = 0.0;
    double d2u_zbar = 0.0;
    bool zbar_on_boundary = false;
    int support_lo = 0, support_hi = 0; // pruned support of the weights
};

namespace detail {

// Relative weights below this threshold cannot move any reported quantity;
// skipping them keeps the transfer convolution O(N * K).
constexpr double kWeightFloor = 1e-18;

inline void refresh(State& s, const ModelConfig& cfg, const OffsetTable& table) {
    Measure m = softmax_measure(s.u, cfg.epsilon);
    s.log_rho = m.log_rho;
    s.rho = m.rho;
    s.weights = std::move(m.weights);

    double wmax = 0.0;
    for (double w : s.weights) wmax = std::max(wmax, w);
    const double floor = wmax * kWeightFloor;
    int lo = 0, hi = static_cast<int>(s.weights.size()) - 1;
    while (lo < hi && s.weights[lo] <= floor) ++lo;
    while (hi > lo && s.weights[hi] <= floor) --hi;
    s.support_lo = lo;
    s.support_hi = hi;

    s.phi = transfer_field(s.weights, s.u, table, cfg.tau, lo, hi);

    const ArgmaxResult am = argmax_refined(s.u);
    s.zbar = am.z;
    s.zbar_on_boundary = am.boundary;
    const int i = s.u.nearest_index(s.zbar);
    s.d2u_zbar = (i >= 2 && i <= s.u.size() - 3)
                     ? second_derivative_at(s.u, s.zbar)
                     : std::numeric_limits<double>::quiet_NaN();
}

// Thomas solve of (I - r D2) x = b with natural ends (identity rows).
inline void implicit_diffusion(std::vector<double>& b, double r) {
    const size_t n = b.size();
    static thread_local std::vector<double> cp, dp;
    cp.assign(n, 0.0);
    dp.assign(n, 0.0);
    // row 0: x0 = b0
    cp[0] = 0.0;
    dp[0] = b[0];
    for (size_t i = 1; i + 1 < n; ++i) {
        const double m = 1.0 + 2.0 * r + r * cp[i - 1];
        cp[i] = -r / m;
        dp[i] = (b[i] + r * dp[i - 1]) / m;
    }
    // row n-1 is an identity row, so b[n-1] already holds x[n-1]
    for (size_t i = n - 1; i-- > 1;) b[i] = dp[i] - cp[i] * b[i + 1];
    b[0] = dp[0];
}

} // namespace detail

// Exact Hopf-Cole transform of the Gaussian initial-datum family
// n_0 = eps^{-1/2} exp(-c (z-z0)^2 / eps), plus the optional o(1) mass
// normalization shift making rho(0) = R(z0) hold exactly.
inline State init_gaussian(const ModelConfig& cfg, const OffsetTable* table = nullptr) {
    const auto dr = cfg.growth().positive_set();
    if (!(cfg.z0 > dr.first && cfg.z0 < dr.second))
        throw maladapted_initial_datum("z0 outside D_R");
    double shift = -0.5 * cfg.epsilon * std::log(cfg.epsilon);
    if (cfg.mass_normalize) {
        const double r0 = cfg.growth()(cfg.z0);
        shift += cfg.epsilon * std::log(r0 * std::sqrt(cfg.c / 3.14159265358979323846));
    }
    State s;
    s.t = 0.0;
    const double l = cfg.half_width();
    s.u = Field1D::sample(-l, l, cfg.N, [&](double z) {
        return -cfg.c * (z - cfg.z0) * (z - cfg.z0) + shift;
    });
    if (table) {
        detail::refresh(s, cfg, *table);
    } else {
        OffsetTable t([&cfg](double x) { return cfg.kernel(x); }, cfg.N, s.u.dz());
        detail::refresh(s, cfg, t);
    }
    return s;
}

// State assembled from an arbitrary field (rho, Phi, zbar recomputed).
inline State from_field(Field1D u, const ModelConfig& cfg, const OffsetTable& table,
                        double t = 0.0) {
    State s;
    s.t = t;
    s.u = std::move(u);
    detail::refresh(s, cfg, table);
    return s;
}

// One IMEX update: Godunov Hamiltonian and reaction R - rho + Phi explicit
// with rho, Phi frozen at step start; diffusion eps u'' implicit
// (tridiagonal). Throws step_rejected when dt violates the Hamiltonian CFL.
inline State step(const State& s, const ModelConfig& cfg, double dt, const OffsetTable& table) {
    const double cfl = hamiltonian_cfl_dt(s.u);
    if (dt > cfl * (1.0 + 1e-12)) throw step_rejected(0.9 * cfl);

    const Field1D ham = upwind_hamiltonian(s.u);
    const GrowthProfile growth = cfg.growth();
    State next;
    next.t = s.t + dt;
    next.u = s.u;
    const int n = s.u.size();
    for (int j = 0; j < n; ++j) {
        const double z = s.u.z(j);
        next.u[j] = s.u[j] + dt * (ham[j] + growth(z) - s.rho + s.phi[j]);
    }
    {
        std::vector<double> b(next.u.values().begin(), next.u.values().end());
        detail::implicit_diffusion(b, cfg.epsilon * dt / (s.u.dz() * s.u.dz()));
        for (int j = 0; j < n; ++j) next.u[j] = b[j];
    }
    if (!next.u.all_finite()) throw numerical_abort("NaN/Inf in u after step");
    detail::refresh(next, cfg, table);
    return next;
}

struct RunOptions {
    double record_dt = 0.01;        // output stride in time units
    int snapshot_every = 0;         // every k-th recorded sample; 0 = off
    double rho_floor_factor = 1e-10; // numerical extinction at rho < factor * rho(0)
    bool track_mass_residuals = true;
};

// Integrate to T, or until numerical extinction or a boundary argmax.
inline RunRecord run(const ModelConfig& cfg, const RunOptions& opt = {}) {
    cfg.validate();
    OffsetTable table([&cfg](double x) { return cfg.kernel(x); }, cfg.N, cfg.dz());
    State s = init_gaussian(cfg, &table);

    RunRecord rec;
    rec.dz = s.u.dz();
    rec.eps = cfg.epsilon;
    rec.config_hash = cfg.hash();
    rec.rho_initial = s.rho;
    rec.rho_min_seen = rec.rho_max_seen = s.rho;
    const double log_rho_floor = s.log_rho + std::log(opt.rho_floor_factor);

    long total_steps = 0;
    const GrowthProfile growth = cfg.growth();
    const double zero_tol_base = 10.0 * rec.dz * rec.dz;

    auto record_sample = [&](const State& st, double dt_for_tol) {
        RunSample sm;
        sm.t = st.t;
        sm.rho = st.rho;
        sm.log_rho = st.log_rho;
        sm.zbar = st.zbar;
        double umax = st.u[0];
        for (int j = 1; j < st.u.size(); ++j) umax = std::max(umax, st.u[j]);
        sm.u_max = umax;
        sm.d2u_zbar = st.d2u_zbar;
        Field1D fit = st.phi;
        for (int j = 0; j < fit.size(); ++j)
            fit[j] = growth(fit.z(j)) - st.rho + st.phi[j];
        const PositivityReport pr = positivity_sets(fit, st.zbar);
        sm.n_pos_components = static_cast<int>(pr.intervals.size());
        sm.j_nonempty = pr.left_set_J.has_value();
        sm.n_zero = static_cast<int>(zero_set(st.u, zero_tol_base + 10.0 * dt_for_tol).size());
        rec.samples.push_back(sm);
        if (opt.snapshot_every > 0 &&
            (rec.samples.size() - 1) % static_cast<size_t>(opt.snapshot_every) == 0)
            rec.snapshots.push_back({st.t, st.u});
    };

    record_sample(s, cfg.dt);
    double next_record = opt.record_dt;

    while (s.t < cfg.T - 1e-14) {
        const double cfl = hamiltonian_cfl_dt(s.u);
        const double dt = std::min({cfg.dt, 0.9 * cfl, cfg.T - s.t});
        rec.dt_max = std::max(rec.dt_max, dt);

        State next;
        try {
            next = step(s, cfg, dt, table);
        } catch (const numerical_abort&) {
            rec.status = RunStatus::NumericalAbort;
            rec.snapshots.push_back({s.t, s.u}); // last good state
            record_sample(s, dt);
            return rec;
        }
        ++total_steps;
        rec.rho_min_seen = std::min(rec.rho_min_seen, next.rho);
        rec.rho_max_seen = std::max(rec.rho_max_seen, next.rho);

        // zero-sum transfer along the run (odd-kernel symmetry)
        double ts = 0.0;
        for (int j = 0; j < next.u.size(); ++j) ts += next.weights[j] * next.phi[j];
        rec.max_abs_transfer_sum = std::max(rec.max_abs_transfer_sum, std::abs(ts));

        if (opt.track_mass_residuals) {
            double mean_r = 0.0;
            for (int j = s.support_lo; j <= s.support_hi; ++j)
                mean_r += s.weights[j] * growth(s.u.z(j));
            const double resid = cfg.epsilon * (next.rho - s.rho) / dt + s.rho * s.rho -
                                 s.rho * mean_r;
            rec.mass_residuals.push_back(std::abs(resid));
        }

        s = std::move(next);

        if (s.zbar_on_boundary) {
            rec.status = RunStatus::BoundaryArgmax;
            record_sample(s, dt);
            return rec;
        }
        if (s.log_rho < log_rho_floor) {
            rec.status = RunStatus::Extinct;
            rec.extinction_time = s.t;
            rec.extinction_trait = s.zbar;
            record_sample(s, dt);
            break;
        }
        if (s.t >= next_record - 1e-14 || s.t >= cfg.T - 1e-14) {
            record_sample(s, dt);
            while (next_record <= s.t + 1e-14) next_record += opt.record_dt;
        }
    }
    rec.steps_per_record =
        static_cast<double>(total_steps) / std::max<size_t>(1, rec.samples.size() - 1);
    return rec;
}

// Quadratic envelope bounds (solution stays between two drifting parabolas).
// The time-drift constants use the sufficient choice C1 = C2 = rho_max + tau + 1.
struct EnvelopeBounds {
    double A1, B1, A2, B2, C1, C2;
    bool contains(double z, double t, double u) const {
        return u >= -A1 - B1 * z * z - C1 * t - 1e-9 && u <= A2 - B2 * z * z + C2 * t + 1e-9;
    }
};

inline EnvelopeBounds envelope_bounds(const ModelConfig& cfg, double rho_max) {
    const auto e = cfg.growth().envelope();
    const double shift = -0.5 * cfg.epsilon * std::log(cfg.epsilon) + 0.1;
    EnvelopeBounds b{};
    b.A1 = 2.0 * cfg.c * cfg.z0 * cfg.z0 + shift;
    b.B1 = std::max(2.0 * cfg.c, 0.5 * std::sqrt(e.K4));
    b.A2 = cfg.c * cfg.z0 * cfg.z0 + shift;
    b.B2 = std::min(0.5 * cfg.c, 0.5 * std::sqrt(e.K2));
    b.C1 = b.C2 = rho_max + cfg.tau + 1.0;
    return b;
}

} // namespace hgt::eps
