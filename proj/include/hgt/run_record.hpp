#pragma once

#include <cstdint>
#include <ctime>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "field.hpp"

namespace hgt {

struct RunSample {
    double t = 0.0;
    double rho = 0.0;
    double log_rho = 0.0;
    double zbar = 0.0;
    double u_max = 0.0;
    double d2u_zbar = 0.0;
    int n_pos_components = 0; // positivity components of the fitness field
    int n_zero = 1;           // zero-set count of u (diagnostics block)
    bool j_nonempty = false;  // a positivity interval strictly left of zbar
};

enum class RunStatus {
    Completed,      // reached T
    Converged,      // |zbar - mu| below tolerance
    Extinct,        // rho hit zero (limit) or the numerical floor (eps)
    ConcavityLoss,  // curvature at the peak too flat for the trait ODE
    BoundaryArgmax, // argmax reached a boundary cell
    NumericalAbort, // NaN/Inf in the state
    RefusedTypeTwo, // z0 > mu with a type-two initial fitness (open regime)
};

inline const char* to_string(RunStatus s) {
    switch (s) {
        case RunStatus::Completed: return "completed";
        case RunStatus::Converged: return "converged";
        case RunStatus::Extinct: return "extinction";
        case RunStatus::ConcavityLoss: return "concavity-loss";
        case RunStatus::BoundaryArgmax: return "boundary-argmax";
        case RunStatus::NumericalAbort: return "numerical-abort";
        case RunStatus::RefusedTypeTwo: return "refused-type-two(open-regime)";
    }
    return "?";
}

struct Snapshot {
    double t = 0.0;
    Field1D field;
};

// Time series of one run plus the structured extras the diagnostics and
// acceptance checks need. The serialized table carries the fixed column
// set; everything else goes into trailing comment blocks.
struct RunRecord {
    std::vector<RunSample> samples;
    RunStatus status = RunStatus::Completed;

    std::optional<double> extinction_time;  // T_rho
    std::optional<double> extinction_trait; // zbar at T_rho

    double dz = 0.0;
    double eps = 0.0;    // 0 for limit runs
    double dt_max = 0.0; // largest step actually taken
    double steps_per_record = 1.0;
    std::uint64_t config_hash = 0;

    // limit-run extras (NaN when not applicable)
    double lambda_run = std::numeric_limits<double>::quiet_NaN();
    double sc_run = std::numeric_limits<double>::quiet_NaN();
    double max_renorm_drift = 0.0;

    // eps-run extras
    double max_abs_transfer_sum = 0.0;
    double rho_initial = std::numeric_limits<double>::quiet_NaN();
    double rho_min_seen = std::numeric_limits<double>::infinity(); // every step, not just samples
    double rho_max_seen = 0.0;
    std::vector<double> mass_residuals; // per-step |eps drho/dt + rho^2 - int nR|

    std::vector<Snapshot> snapshots;

    const RunSample& front() const { return samples.front(); }
    const RunSample& back() const { return samples.back(); }
    double final_time() const { return samples.back().t; }
    double final_zbar() const { return samples.back().zbar; }
    double final_rho() const { return samples.back().rho; }

    // Linear interpolation of zbar(t) over the recorded samples.
    double zbar_at(double t) const {
        if (samples.empty()) return 0.0;
        if (t <= samples.front().t) return samples.front().zbar;
        if (t >= samples.back().t) return samples.back().zbar;
        size_t lo = 0, hi = samples.size() - 1;
        while (hi - lo > 1) {
            const size_t mid = (lo + hi) / 2;
            (samples[mid].t <= t ? lo : hi) = mid;
        }
        const double w = (t - samples[lo].t) / (samples[hi].t - samples[lo].t);
        return (1.0 - w) * samples[lo].zbar + w * samples[hi].zbar;
    }
};

inline void write_run_record(std::ostream& os, const RunRecord& rec, bool timestamp = true) {
    os << "# hgtlab run record\n";
    if (timestamp) {
        const std::time_t now = std::time(nullptr);
        char buf[64];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        os << "# generated: " << buf << '\n';
    }
    os << "# config_hash: " << std::hex << rec.config_hash << std::dec << '\n';
    os << "# dz: " << rec.dz << "  eps: " << rec.eps << "  dt_max: " << rec.dt_max << '\n';
    os << "# status: " << to_string(rec.status) << '\n';
    if (rec.max_renorm_drift > 0.0)
        os << "# max_renorm_drift: " << rec.max_renorm_drift << '\n';
    os << "t\trho\tlog_rho\tzbar\tu_max\td2u_zbar\tn_positivity_components\n";
    os << std::setprecision(12);
    for (const auto& s : rec.samples) {
        os << s.t << '\t' << s.rho << '\t' << s.log_rho << '\t' << s.zbar << '\t'
           << s.u_max << '\t' << s.d2u_zbar << '\t' << s.n_pos_components << '\n';
    }
    if (rec.extinction_time) {
        os << "# extinction_time: " << *rec.extinction_time << '\n';
        os << "# extinction_trait: " << *rec.extinction_trait << '\n';
    }
}

// Field snapshot as two-column text with t, eps and config hash in the header.
inline void write_snapshot(std::ostream& os, const Snapshot& snap, double eps,
                           std::uint64_t config_hash) {
    os << "# hgtlab field snapshot\n";
    os << "# t: " << std::setprecision(12) << snap.t << "  eps: " << eps
       << "  config_hash: " << std::hex << config_hash << std::dec << '\n';
    os << std::setprecision(12);
    for (int i = 0; i < snap.field.size(); ++i)
        os << snap.field.z(i) << '\t' << snap.field[i] << '\n';
}

} // namespace hgt
