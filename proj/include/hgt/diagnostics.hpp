#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "field.hpp"
#include "run_record.hpp"

namespace hgt {

struct PositivityReport {
    std::vector<SignInterval> intervals;  // non-degenerate, disjoint, sorted
    std::vector<SignInterval> degenerate; // tangency slivers thinner than 2 dz
    int contains_zbar = -1;               // index into intervals: the set I(t)
    std::optional<SignInterval> left_set_J; // rightmost interval strictly left of zbar
};

namespace detail {

inline PositivityReport classify_intervals(std::vector<SignInterval> raw, double zbar,
                                           double dz) {
    PositivityReport rep;
    for (const auto& s : raw) {
        if (s.width() < 2.0 * dz) {
            rep.degenerate.push_back(s);
            continue;
        }
        rep.intervals.push_back(s);
    }
    const double tol = dz;
    for (size_t i = 0; i < rep.intervals.size(); ++i) {
        const auto& s = rep.intervals[i];
        if (zbar >= s.lo - tol && zbar <= s.hi + tol && rep.contains_zbar < 0)
            rep.contains_zbar = static_cast<int>(i);
        if (s.hi < zbar - tol) rep.left_set_J = s; // keeps the rightmost such
    }
    return rep;
}

} // namespace detail

// Positivity sets of a sampled fitness field: sign-change scan with the
// endpoints refined on the linear interpolant. The interval containing zbar
// is I(t); any interval entirely left of zbar is J(t).
inline PositivityReport positivity_sets(const Field1D& f, double zbar) {
    auto lerp = [&f](double z) { return f.interp(z); };
    auto raw = positive_intervals(lerp, f.z_min(), f.z_max(), f.size(), 1e-10);
    return detail::classify_intervals(std::move(raw), zbar, f.dz());
}

// Same report computed from a callable on an explicit scan grid.
inline PositivityReport positivity_sets(const std::function<double(double)>& f, double lo,
                                        double hi, int n, double zbar) {
    const double dz = (hi - lo) / (n - 1);
    auto raw = positive_intervals(f, lo, hi, n, 1e-10);
    return detail::classify_intervals(std::move(raw), zbar, dz);
}

// Refined local maxima of u with value >= -tol: the candidate support of
// the limit measure, i.e. the zero set of the renormalized u. Plateaus
// count once, at their left edge.
inline std::vector<double> zero_set(const Field1D& u, double tol) {
    std::vector<double> out;
    const int n = u.size();
    int i = 0;
    while (i < n) {
        // maximal plateau [i, j] of equal values
        int j = i;
        while (j + 1 < n && u[j + 1] == u[i]) ++j;
        const bool rises_left = (i == 0) || u[i] > u[i - 1];
        const bool falls_right = (j == n - 1) || u[j] > u[j + 1];
        if (rises_left && falls_right && u[i] >= -tol && !(i == 0 && j == n - 1)) {
            double z = u.z(i); // plateau ties break to the left edge
            if (i == j && i > 0 && i < n - 1) {
                const double a = u[i - 1], b = u[i], c = u[i + 1];
                const double denom = a - 2.0 * b + c;
                if (denom < 0.0) {
                    double off = 0.5 * (a - c) / denom;
                    off = std::clamp(off, -0.5, 0.5);
                    z += off * u.dz();
                }
            }
            out.push_back(z);
        }
        i = j + 1;
    }
    return out;
}

struct MonomorphismReport {
    std::optional<double> t_multimax; // first time the zero-set count exceeds 1
    bool discontinuous = false;       // zbar jumped more than the threshold
    int jump_count = 0;
    std::vector<double> jump_times;
    double mean_jump_period = std::numeric_limits<double>::quiet_NaN();
    double jump_threshold = 0.0; // 5 * dz * (output stride), recorded for the report
    int max_zero_count = 0;
};

// Scan a run record for loss-of-monomorphism signals: multi-point zero sets
// (candidate T_m), jump discontinuities of zbar, and oscillation statistics.
inline MonomorphismReport monomorphism_monitor(const RunRecord& rec) {
    MonomorphismReport rep;
    rep.jump_threshold = 5.0 * rec.dz * std::max(1.0, rec.steps_per_record);
    for (const auto& s : rec.samples) {
        rep.max_zero_count = std::max(rep.max_zero_count, s.n_zero);
        if (s.n_zero > 1 && !rep.t_multimax) rep.t_multimax = s.t;
    }
    for (size_t i = 1; i < rec.samples.size(); ++i) {
        const double jump = std::abs(rec.samples[i].zbar - rec.samples[i - 1].zbar);
        if (jump > rep.jump_threshold) {
            rep.discontinuous = true;
            ++rep.jump_count;
            rep.jump_times.push_back(rec.samples[i].t);
        }
    }
    if (rep.jump_count >= 2) {
        double sum = 0.0;
        for (size_t i = 1; i < rep.jump_times.size(); ++i)
            sum += rep.jump_times[i] - rep.jump_times[i - 1];
        rep.mean_jump_period = sum / (rep.jump_count - 1);
    }
    return rep;
}

inline void write_monomorphism_report(std::ostream& os, const MonomorphismReport& rep) {
    os << "# monomorphism monitor\n";
    os << "# jump_threshold: " << rep.jump_threshold << '\n';
    os << "# max_zero_count: " << rep.max_zero_count << '\n';
    if (rep.t_multimax) os << "# t_multimax: " << *rep.t_multimax << '\n';
    os << "# discontinuous: " << (rep.discontinuous ? "yes" : "no") << '\n';
    os << "# jump_count: " << rep.jump_count << '\n';
    if (rep.jump_count >= 2) os << "# mean_jump_period: " << rep.mean_jump_period << '\n';
}

} // namespace hgt
