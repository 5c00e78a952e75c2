#pragma once

#include <cmath>
#include <optional>
#include <utility>

namespace hgt {

struct Bracket {
    double lo, hi;
};

// Scan [lo, hi] in equal panels and return the first panel with a sign
// change (endpoints with f == 0 count as a change).
template <class F>
std::optional<Bracket> scan_for_sign_change(F&& f, double lo, double hi, int panels = 256) {
    double x0 = lo;
    double f0 = f(x0);
    for (int i = 1; i <= panels; ++i) {
        const double x1 = lo + (hi - lo) * static_cast<double>(i) / panels;
        const double f1 = f(x1);
        if (f0 == 0.0 || f0 * f1 < 0.0) return Bracket{x0, x1};
        x0 = x1;
        f0 = f1;
    }
    return std::nullopt;
}

// Plain bisection on a bracketing interval. Stops when the interval is
// below xtol or |f| below ftol (ftol <= 0 disables the residual test).
template <class F>
double bisect(F&& f, double lo, double hi, double xtol = 1e-15, double ftol = 0.0,
              int max_iter = 200) {
    double flo = f(lo);
    if (flo == 0.0) return lo;
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < max_iter; ++it) {
        mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if (ftol > 0.0 && std::abs(fm) < ftol) return mid;
        if ((flo < 0.0) == (fm < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if (hi - lo < xtol * (1.0 + std::abs(mid))) break;
    }
    return 0.5 * (lo + hi);
}

} // namespace hgt
