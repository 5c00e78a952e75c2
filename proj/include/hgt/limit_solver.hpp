#pragma once

#include <cmath>
#include <vector>

#include "diagnostics.hpp"
#include "errors.hpp"
#include "field.hpp"
#include "model.hpp"
#include "run_record.hpp"

namespace hgt::limit {

struct State {
    double t = 0.0;
    Field1D u;
    double zbar = 0.0;
    double rho = 0.0;
    double d2u_zbar = 0.0;
    double lambda_run = 0.0; // running min of |d2u(zbar)| / 2
    double sc_run = 0.0;     // running max of |d2u(zbar)|
    double last_drift = 0.0; // |max u| removed by the last renormalization
};

namespace detail {

constexpr double kConcavityFloor = 1e-8;

inline double curvature_at(const Field1D& u, double z) {
    const int i = u.nearest_index(z);
    if (i < 2 || i > u.size() - 3)
        throw boundary_argmax("peak too close to the domain boundary");
    return second_derivative_at(u, z);
}

inline double ode_rhs(double zbar, double d2u, const ModelConfig& cfg) {
    if (!(d2u < -kConcavityFloor))
        throw concavity_loss("curvature at the peak lost strict concavity");
    return (cfg.tau + cfg.growth()(zbar, 1)) / (-d2u);
}

} // namespace detail

inline State init(const ModelConfig& cfg) {
    const auto dr = cfg.growth().positive_set();
    if (!(cfg.z0 > dr.first && cfg.z0 < dr.second))
        throw maladapted_initial_datum("z0 outside D_R");
    State s;
    s.t = 0.0;
    const double l = cfg.half_width();
    s.u = Field1D::sample(-l, l, cfg.N,
                          [&](double z) { return -cfg.c * (z - cfg.z0) * (z - cfg.z0); });
    double umax = s.u[0];
    for (int j = 1; j < s.u.size(); ++j) umax = std::max(umax, s.u[j]);
    for (int j = 0; j < s.u.size(); ++j) s.u[j] -= umax;
    s.zbar = cfg.z0;
    s.rho = std::max(cfg.growth()(cfg.z0), 0.0);
    s.d2u_zbar = detail::curvature_at(s.u, s.zbar);
    s.lambda_run = 0.5 * std::abs(s.d2u_zbar);
    s.sc_run = std::abs(s.d2u_zbar);
    return s;
}

// zbar'(t) = 2g (mu - zbar) / |d2u(t, zbar)| for the quadratic family
// (generally (tau + R'(zbar)) / |d2u|). Requires strict concavity at the peak.
inline double trait_ode_rhs(const State& s, const ModelConfig& cfg) {
    return detail::ode_rhs(s.zbar, s.d2u_zbar, cfg);
}

// One step: explicit midpoint for the trait ODE, explicit Godunov step for
// u with the fitness frozen at the step-start zbar, then renormalization
// u <- u - max u. The pre-renormalization drift is O(dt^2) per step since
// F(t, zbar) = 0, and is recorded as a scheme-consistency metric.
inline State step(const State& s, const ModelConfig& cfg, double dt) {
    const double cfl = hamiltonian_cfl_dt(s.u);
    if (dt > cfl * (1.0 + 1e-12)) throw step_rejected(0.9 * cfl);

    const double k1 = detail::ode_rhs(s.zbar, s.d2u_zbar, cfg);
    const double zmid = s.zbar + 0.5 * dt * k1;
    const double k2 = detail::ode_rhs(zmid, detail::curvature_at(s.u, zmid), cfg);

    State next;
    next.t = s.t + dt;
    next.zbar = s.zbar + dt * k2;
    next.lambda_run = s.lambda_run;
    next.sc_run = s.sc_run;

    const Field1D ham = upwind_hamiltonian(s.u);
    next.u = s.u;
    const int n = s.u.size();
    for (int j = 0; j < n; ++j)
        next.u[j] = s.u[j] + dt * (ham[j] + fitness_dynamic(s.u.z(j), s.zbar, cfg));
    if (!next.u.all_finite()) throw numerical_abort("NaN/Inf in u after step");

    double umax = next.u[0];
    for (int j = 1; j < n; ++j) umax = std::max(umax, next.u[j]);
    next.last_drift = std::abs(umax);
    for (int j = 0; j < n; ++j) next.u[j] -= umax;

    next.rho = std::max(cfg.growth()(next.zbar), 0.0);
    next.d2u_zbar = detail::curvature_at(next.u, next.zbar);
    next.lambda_run = std::min(next.lambda_run, 0.5 * std::abs(next.d2u_zbar));
    next.sc_run = std::max(next.sc_run, std::abs(next.d2u_zbar));
    return next;
}

struct RunOptions {
    double record_dt = 0.01;
    int snapshot_every = 0;
    double converge_tol = 1e-10; // |zbar - mu| convergence threshold
    bool store_final_snapshot = false;
};

// Integrate until convergence to mu, an extinction event (rho hits 0 when
// zbar crosses the right edge of D_R, located by linear interpolation), a
// concavity loss, or T. For z0 > mu the run first classifies the initial
// fitness and refuses type-two inputs (open regime: a second positivity
// set can spawn a competing maximum).
inline RunRecord run(const ModelConfig& cfg, const RunOptions& opt = {}) {
    cfg.validate();

    RunRecord rec;
    rec.dz = cfg.dz();
    rec.eps = 0.0;
    rec.config_hash = cfg.hash();

    const double mu = cfg.growth().z_mu(cfg.tau);
    if (cfg.z0 > mu && classify_initial_fitness_type(cfg) == FitnessType::TypeTwo) {
        rec.status = RunStatus::RefusedTypeTwo;
        return rec;
    }

    State s = init(cfg);
    long total_steps = 0;
    const GrowthProfile growth = cfg.growth();

    auto record_sample = [&](const State& st, double dt_for_tol) {
        RunSample sm;
        sm.t = st.t;
        sm.rho = st.rho;
        sm.log_rho = st.rho > 0.0 ? std::log(st.rho)
                                  : -std::numeric_limits<double>::infinity();
        sm.zbar = st.zbar;
        double umax = st.u[0];
        for (int j = 1; j < st.u.size(); ++j) umax = std::max(umax, st.u[j]);
        sm.u_max = umax;
        sm.d2u_zbar = st.d2u_zbar;
        Field1D fit = st.u;
        for (int j = 0; j < fit.size(); ++j)
            fit[j] = fitness_dynamic(fit.z(j), st.zbar, cfg);
        const PositivityReport pr = positivity_sets(fit, st.zbar);
        sm.n_pos_components = static_cast<int>(pr.intervals.size());
        sm.j_nonempty = pr.left_set_J.has_value();
        sm.n_zero = static_cast<int>(
            zero_set(st.u, 10.0 * (rec.dz * rec.dz + dt_for_tol)).size());
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
            next = step(s, cfg, dt);
        } catch (const concavity_loss&) {
            rec.status = RunStatus::ConcavityLoss;
            record_sample(s, dt);
            rec.snapshots.push_back({s.t, s.u});
            break;
        } catch (const boundary_argmax&) {
            rec.status = RunStatus::BoundaryArgmax;
            record_sample(s, dt);
            break;
        } catch (const numerical_abort&) {
            rec.status = RunStatus::NumericalAbort;
            record_sample(s, dt);
            rec.snapshots.push_back({s.t, s.u});
            break;
        }
        ++total_steps;
        rec.max_renorm_drift = std::max(rec.max_renorm_drift, next.last_drift);

        // extinction event: R(zbar) crossed zero from above
        if (growth(next.zbar) < 0.0 && growth(s.zbar) >= 0.0) {
            const double r0 = growth(s.zbar);
            const double r1 = growth(next.zbar);
            const double theta = r0 / (r0 - r1);
            State ev = next;
            ev.t = s.t + theta * dt;
            ev.zbar = s.zbar + theta * (next.zbar - s.zbar);
            ev.rho = 0.0;
            rec.status = RunStatus::Extinct;
            rec.extinction_time = ev.t;
            rec.extinction_trait = ev.zbar;
            record_sample(ev, dt);
            s = std::move(ev);
            break;
        }

        s = std::move(next);

        if (std::abs(s.zbar - mu) < opt.converge_tol) {
            rec.status = RunStatus::Converged;
            record_sample(s, dt);
            break;
        }
        if (s.t >= next_record - 1e-14 || s.t >= cfg.T - 1e-14) {
            record_sample(s, dt);
            while (next_record <= s.t + 1e-14) next_record += opt.record_dt;
        }
    }

    rec.lambda_run = s.lambda_run;
    rec.sc_run = s.sc_run;
    rec.steps_per_record =
        static_cast<double>(total_steps) / std::max<size_t>(1, rec.samples.size() - 1);
    if (opt.store_final_snapshot) rec.snapshots.push_back({s.t, s.u});
    return rec;
}

struct SandwichRow {
    double t, lower, zbar, upper, margin_lo, margin_hi;
};

// Verification of the exponential trait sandwich
//   mu - (mu - zbar(0)) e^{-(2g/S_c) t} <= zbar(t) <= mu - (mu - zbar(0)) e^{-(g/lambda) t}
// with lambda and S_c the measured curvature extrema along the run.
struct SandwichReport {
    std::vector<SandwichRow> rows;
    double lambda = 0.0, s_c = 0.0, tol = 0.0;
    bool lower_ok = true, upper_ok = true;
    double worst_margin_lo = 0.0, worst_margin_hi = 0.0;

    bool all_ok() const { return lower_ok && upper_ok; }
};

inline SandwichReport sandwich_check(const RunRecord& rec, const ModelConfig& cfg) {
    if (!cfg.quadratic_growth())
        throw error("sandwich bounds defined for the quadratic growth family");
    if (rec.samples.empty()) throw error("sandwich_check: empty record");
    const double mu = cfg.mu();
    const double zbar0 = rec.samples.front().zbar;
    if (zbar0 > mu + 1e-12)
        throw std::invalid_argument("sandwich_check expects a run with zbar(0) <= mu");
    const double gap0 = mu - zbar0;

    SandwichReport rep;
    rep.lambda = rec.lambda_run;
    rep.s_c = rec.sc_run;
    rep.tol = 2.0 * rec.dz + 10.0 * rec.dt_max;
    rep.worst_margin_lo = rep.worst_margin_hi = std::numeric_limits<double>::infinity();

    for (const auto& s : rec.samples) {
        SandwichRow row{};
        row.t = s.t;
        row.zbar = s.zbar;
        row.lower = mu - gap0 * std::exp(-(2.0 * cfg.g / rep.s_c) * s.t);
        row.upper = mu - gap0 * std::exp(-(cfg.g / rep.lambda) * s.t);
        row.margin_lo = row.zbar - row.lower;
        row.margin_hi = row.upper - row.zbar;
        rep.worst_margin_lo = std::min(rep.worst_margin_lo, row.margin_lo);
        rep.worst_margin_hi = std::min(rep.worst_margin_hi, row.margin_hi);
        if (row.margin_lo < -rep.tol) rep.lower_ok = false;
        if (row.margin_hi < -rep.tol) rep.upper_ok = false;
        rep.rows.push_back(row);
    }
    return rep;
}

inline void write_sandwich_report(std::ostream& os, const SandwichReport& rep) {
    os << "# sandwich report (lambda=" << rep.lambda << ", S_c=" << rep.s_c
       << ", tol=" << rep.tol << ")\n";
    os << "# worst_margin_lo: " << rep.worst_margin_lo
       << "  worst_margin_hi: " << rep.worst_margin_hi << '\n';
    os << "# bounds_hold: " << (rep.all_ok() ? "yes" : "no") << '\n';
    os << "t\tlower\tzbar\tupper\tmargin_lo\tmargin_hi\n";
    for (const auto& r : rep.rows)
        os << r.t << '\t' << r.lower << '\t' << r.zbar << '\t' << r.upper << '\t'
           << r.margin_lo << '\t' << r.margin_hi << '\n';
}

} // namespace hgt::limit
