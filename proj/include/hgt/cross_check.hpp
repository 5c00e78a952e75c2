#pragma once

#include <cmath>
#include <ostream>
#include <random>
#include <vector>

#include "eps_solver.hpp"
#include "limit_solver.hpp"
#include "model.hpp"
#include "oracle.hpp"

namespace hgt::crosscheck {

// Oracle-vs-solver comparison of one monomorphic configuration:
//  - Hopf-Lax dynamic programming against the constrained solver's u(T, .)
//    in sup norm over the concavity window, plus a refinement-ratio check;
//  - Euler-Lagrange terminal velocities against table gradients at probes;
//  - eps-solver trait trajectories against the limit trajectory for a
//    decreasing-eps sweep.
struct Report {
    // limit run
    RunStatus limit_status = RunStatus::Completed;
    double limit_final_zbar = 0.0;

    // DP vs limit u(T, .)
    double dp_gap = 0.0, dp_tol = 0.0;
    bool dp_pass = false;
    double dp_gap_refined = 0.0, dp_ratio = 0.0;
    bool dp_ratio_pass = false;
    double window_lo = 0.0, window_hi = 0.0, dp_dt = 0.0;

    // shooting gradient probes
    double shoot_worst = 0.0, shoot_tol = 0.0;
    int shoot_probes = 0, shoot_multivalued = 0;
    bool shoot_pass = false;

    // eps consistency sweep
    std::vector<double> eps_values;
    std::vector<double> eps_sup_increments; // sup_t |zbar_{2e} - zbar_e|
    double eps_vs_limit = 0.0;
    bool eps_decreasing_pass = false, eps_close_pass = false;

    // stationary configuration (z0 == mu): trait drift over [0, T]
    bool stationary_case = false;
    double stationary_drift = 0.0;
    bool stationary_pass = true;

    Snapshot dp_final;    // final DP slice, dumpable as a snapshot file
    Snapshot limit_final; // final limit-solver field for side-by-side dumps

    bool all_pass() const {
        return dp_pass && dp_ratio_pass && shoot_pass && eps_decreasing_pass &&
               eps_close_pass && stationary_pass;
    }
};

namespace detail {

struct DPRun {
    RunRecord limit_rec;
    Field1D limit_u;
    oracle::DPTable table;
    double gap = 0.0;
    double dp_dt = 0.0;
    double window_lo = 0.0, window_hi = 0.0;
};

inline DPRun dp_vs_limit(const ModelConfig& cfg, double record_dt) {
    DPRun out;
    limit::RunOptions lo;
    lo.record_dt = record_dt;
    lo.store_final_snapshot = true;
    lo.converge_tol = 0.0; // compare at the full horizon, not at early convergence
    out.limit_rec = limit::run(cfg, lo);
    out.limit_u = out.limit_rec.snapshots.back().field;

    const RunRecord& rec = out.limit_rec;
    auto fitness = [&cfg, &rec](double t, double z) {
        return fitness_dynamic(z, rec.zbar_at(t), cfg);
    };

    const Field1D u0 = limit::init(cfg).u;
    oracle::DPOptions dopt;
    dopt.full_scan = cfg.dp_full_scan;
    dopt.refine_max = true;
    // with the parabolic inner max the recursion is semi-Lagrangian in
    // character and tolerates dt well below dz; the small step keeps the
    // table's O(dt) time bias out of the gradient probes
    const double t_end = rec.final_time();
    out.dp_dt = cfg.dz() / 16.0;
    out.table = oracle::hopf_lax_dp(u0, fitness, out.dp_dt, t_end, dopt);

    const double mu = cfg.mu();
    out.window_lo = rec.final_zbar() - 1.0;
    out.window_hi = mu + 1.0;
    const auto& dp_final = out.table.final_slice();
    double gap = 0.0;
    for (int j = 0; j < out.limit_u.size(); ++j) {
        const double z = out.limit_u.z(j);
        if (z < out.window_lo || z > out.window_hi) continue;
        gap = std::max(gap, std::abs(dp_final[static_cast<size_t>(j)] - out.limit_u[j]));
    }
    out.gap = gap;
    return out;
}

} // namespace detail

inline Report run(const ModelConfig& cfg, std::ostream* log = nullptr) {
    cfg.validate();
    const RegimeReport regime = classify_regime(cfg);
    if (regime.mu > regime.mu1)
        throw error("cross-check requires a monomorphic configuration (mu <= mu1)");

    Report rep;
    const double record_dt = 0.01;

    // --- DP vs limit solver, base resolution -------------------------------
    auto base = detail::dp_vs_limit(cfg, record_dt);
    rep.limit_status = base.limit_rec.status;
    rep.limit_final_zbar = base.limit_rec.final_zbar();
    rep.dp_gap = base.gap;
    rep.dp_dt = base.dp_dt;
    rep.dp_tol = 5.0 * (rep.dp_dt + cfg.dz());
    rep.dp_pass = rep.dp_gap < rep.dp_tol;
    rep.window_lo = base.window_lo;
    rep.window_hi = base.window_hi;
    rep.dp_final = {base.limit_rec.final_time(),
                    base.table.slice_field(static_cast<int>(base.table.times.size()) - 1)};
    rep.limit_final = {base.limit_rec.final_time(), base.limit_u};
    if (log)
        *log << "[dp] sup|u_dp - u_limit| over [" << rep.window_lo << ", " << rep.window_hi
             << "] = " << rep.dp_gap << "  tol " << rep.dp_tol << "  "
             << (rep.dp_pass ? "PASS" : "FAIL") << '\n';

    // --- refinement: halve dt and dz together ------------------------------
    {
        ModelConfig fine = cfg;
        fine.N = 2 * cfg.N - 1;
        fine.dt = 0.5 * cfg.dt;
        auto ref = detail::dp_vs_limit(fine, record_dt);
        rep.dp_gap_refined = ref.gap;
        rep.dp_ratio = rep.dp_gap / std::max(rep.dp_gap_refined, 1e-300);
        rep.dp_ratio_pass = rep.dp_ratio >= 1.5;
        if (log)
            *log << "[dp/2] gap = " << rep.dp_gap_refined << "  ratio = " << rep.dp_ratio
                 << "  " << (rep.dp_ratio_pass ? "PASS" : "FAIL") << '\n';
    }

    // --- Euler-Lagrange gradient probes against the DP table ---------------
    {
        const auto& table = base.table;
        const RunRecord& rec = base.limit_rec;
        const double t_end = rec.final_time();
        const double t_start = std::max(0.0, t_end - 2.0);
        const int k0 = table.time_index(t_start);
        const int k1 = static_cast<int>(table.times.size()) - 1;
        const double dz = cfg.dz();

        auto fitness = [&cfg, &rec](double t, double z) {
            return fitness_dynamic(z, rec.zbar_at(t), cfg);
        };
        auto fitness_dz = [&cfg, &rec](double t, double z) {
            return fitness_dynamic(z, rec.zbar_at(t), cfg, 1);
        };
        auto u0 = [&table, k0](double z) { return table.interp(k0, z); };
        auto u0_grad = [&table, k0, dz](double z) {
            return (table.interp(k0, z + dz) - table.interp(k0, z - dz)) / (2.0 * dz);
        };

        double p_max = 0.0;
        for (int j = 1; j < table.n; ++j)
            p_max = std::max(p_max, std::abs(table.values[static_cast<size_t>(k0)][j] -
                                             table.values[static_cast<size_t>(k0)][j - 1]) /
                                        dz);

        oracle::ShootOptions sopt;
        sopt.t_start = table.times[static_cast<size_t>(k0)];
        sopt.p_max = p_max;
        sopt.rk_steps = 2000;

        std::mt19937 rng(20240817u);
        const double margin = 0.1 * (rep.window_hi - rep.window_lo);
        std::uniform_real_distribution<double> zdist(rep.window_lo + margin,
                                                     rep.window_hi - margin);
        rep.shoot_probes = 20;
        rep.shoot_tol = 5.0 * dz * dz;
        double worst = 0.0;
        for (int p = 0; p < rep.shoot_probes; ++p) {
            // snap the probe onto a node so both gradients refer to the same z
            const double z = table.z(base.limit_u.nearest_index(zdist(rng)));
            const auto sr = oracle::euler_lagrange_shoot(table.times[static_cast<size_t>(k1)],
                                                         z, fitness, fitness_dz, u0, u0_grad,
                                                         sopt);
            if (sr.multivalued && std::isnan(sr.gradient)) {
                ++rep.shoot_multivalued;
                continue;
            }
            const double ref = table.gradient(k1, z);
            worst = std::max(worst, std::abs(sr.gradient - ref));
        }
        rep.shoot_worst = worst;
        rep.shoot_pass = worst < rep.shoot_tol && rep.shoot_multivalued == 0;
        if (log)
            *log << "[shoot] worst |(-gdot/2) - dp_grad| over " << rep.shoot_probes
                 << " probes = " << rep.shoot_worst << "  tol " << rep.shoot_tol << "  "
                 << (rep.shoot_pass ? "PASS" : "FAIL") << '\n';
    }

    // --- stationary drift check (z0 == mu) ---------------------------------
    if (std::abs(cfg.z0 - cfg.mu()) < 1e-12) {
        rep.stationary_case = true;
        double drift = 0.0;
        for (const auto& s : base.limit_rec.samples)
            drift = std::max(drift, std::abs(s.zbar - cfg.mu()));
        rep.stationary_drift = drift;
        rep.stationary_pass = drift < 1e-8;
        if (log)
            *log << "[stationary] trait drift = " << drift << "  "
                 << (rep.stationary_pass ? "PASS" : "FAIL") << '\n';
    }

    // --- eps-consistency sweep ----------------------------------------------
    {
        ModelConfig ecfg = cfg;
        ecfg.N = std::max(cfg.N, 1025); // eps runs need the finer grid at small eps
        rep.eps_values = {4.0 * cfg.epsilon, 2.0 * cfg.epsilon, cfg.epsilon};
        std::vector<RunRecord> runs;
        for (double e : rep.eps_values) {
            ModelConfig one = ecfg;
            one.epsilon = e;
            eps::RunOptions eopt;
            eopt.record_dt = 0.05;
            eopt.track_mass_residuals = false;
            runs.push_back(eps::run(one, eopt));
        }
        const RunRecord& lrec = base.limit_rec;
        double t_cmp = lrec.samples.empty() ? cfg.T : cfg.T;
        for (const auto& r : runs) t_cmp = std::min(t_cmp, r.final_time());

        auto sup_diff = [&](const RunRecord& a, const RunRecord& b) {
            double m = 0.0;
            for (double t = 0.0; t <= t_cmp + 1e-12; t += 0.05)
                m = std::max(m, std::abs(a.zbar_at(t) - b.zbar_at(t)));
            return m;
        };
        rep.eps_sup_increments = {sup_diff(runs[0], runs[1]), sup_diff(runs[1], runs[2])};
        rep.eps_vs_limit = sup_diff(runs[2], lrec);
        rep.eps_decreasing_pass = rep.eps_sup_increments[1] < rep.eps_sup_increments[0];
        rep.eps_close_pass = rep.eps_vs_limit < 0.05;
        if (log) {
            *log << "[eps] sup|z_" << rep.eps_values[0] << " - z_" << rep.eps_values[1]
                 << "| = " << rep.eps_sup_increments[0] << ", sup|z_" << rep.eps_values[1]
                 << " - z_" << rep.eps_values[2] << "| = " << rep.eps_sup_increments[1]
                 << "  decreasing: " << (rep.eps_decreasing_pass ? "PASS" : "FAIL") << '\n';
            *log << "[eps] sup|z_" << rep.eps_values[2] << " - z_limit| = " << rep.eps_vs_limit
                 << "  tol 0.05  " << (rep.eps_close_pass ? "PASS" : "FAIL") << '\n';
        }
    }

    if (log) *log << "overall: " << (rep.all_pass() ? "PASS" : "FAIL") << '\n';
    return rep;
}

} // namespace hgt::crosscheck
