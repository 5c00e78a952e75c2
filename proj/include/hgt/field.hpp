#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "errors.hpp"

namespace hgt {

// A sampled function on a uniform 1-D grid. Value-semantic snapshot; all
// operations below are pure.
class Field1D {
public:
    Field1D() = default;

    Field1D(double z_min, double z_max, int n, double fill = 0.0)
        : zmin_(z_min), zmax_(z_max), values_(check_size(n, z_min, z_max), fill),
          dz_((z_max - z_min) / (n - 1)) {}

    static Field1D sample(double z_min, double z_max, int n,
                          const std::function<double(double)>& f) {
        Field1D out(z_min, z_max, n);
        for (int i = 0; i < n; ++i) out.values_[i] = f(out.z(i));
        return out;
    }

    int size() const { return static_cast<int>(values_.size()); }
    double z_min() const { return zmin_; }
    double z_max() const { return zmax_; }
    double dz() const { return dz_; }
    double z(int i) const { return zmin_ + i * dz_; }

    double operator[](int i) const { return values_[static_cast<size_t>(i)]; }
    double& operator[](int i) { return values_[static_cast<size_t>(i)]; }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    // Nearest grid node to z, clamped into range.
    int nearest_index(double z) const {
        const int i = static_cast<int>(std::lround((z - zmin_) / dz_));
        return std::clamp(i, 0, size() - 1);
    }

    // Piecewise-linear evaluation, clamped at the ends.
    double interp(double z) const {
        if (z <= zmin_) return values_.front();
        if (z >= zmax_) return values_.back();
        const double s = (z - zmin_) / dz_;
        const int i = std::min(static_cast<int>(s), size() - 2);
        const double w = s - i;
        return (1.0 - w) * values_[i] + w * values_[i + 1];
    }

    bool all_finite() const {
        for (double v : values_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    static int check_size(int n, double z_min, double z_max) {
        if (n < 8) throw error("Field1D requires at least 8 grid points");
        if (!(z_max > z_min)) throw error("Field1D requires z_max > z_min");
        return n;
    }

    double zmin_ = 0.0, zmax_ = 1.0;
    std::vector<double> values_;
    double dz_ = 0.0;
};

// Trapezoid rule over the whole grid.
inline double integrate_trapezoid(const Field1D& f) {
    const int n = f.size();
    double s = 0.5 * (f[0] + f[n - 1]);
    for (int i = 1; i < n - 1; ++i) s += f[i];
    return s * f.dz();
}

struct ArgmaxResult {
    double z = 0.0;
    double value = 0.0;
    int index = 0;
    bool boundary = false; // argmax on a boundary cell: domain too small
    bool flat = false;     // field constant; leftmost index returned
};

// Grid argmax refined by a parabola through the three surrounding samples.
// Ties break to the leftmost index.
inline ArgmaxResult argmax_refined(const Field1D& f) {
    const int n = f.size();
    int imax = 0;
    for (int i = 1; i < n; ++i)
        if (f[i] > f[imax]) imax = i;

    ArgmaxResult r;
    r.index = imax;
    r.z = f.z(imax);
    r.value = f[imax];

    double vmin = f[0];
    for (int i = 1; i < n; ++i) vmin = std::min(vmin, f[i]);
    if (vmin == f[imax]) {
        r.flat = true;
        return r;
    }
    if (imax == 0 || imax == n - 1) {
        r.boundary = true;
        return r;
    }

    const double a = f[imax - 1], b = f[imax], c = f[imax + 1];
    const double denom = a - 2.0 * b + c;
    if (denom < 0.0) {
        // vertex offset in node units; |offset| <= 1/2 when imax is the argmax
        double off = 0.5 * (a - c) / denom;
        off = std::clamp(off, -0.5, 0.5);
        r.z = f.z(imax) + off * f.dz();
        r.value = b + 0.5 * (c - a) * off + 0.5 * denom * off * off;
    }
    return r;
}

// Fourth-order 5-point second derivative evaluated at the node nearest z.
// Exact on polynomials of degree <= 5 at node points.
inline double second_derivative_at(const Field1D& f, double z) {
    const int i = f.nearest_index(z);
    if (i < 2 || i > f.size() - 3)
        throw std::out_of_range("second_derivative_at: point within 2 cells of the boundary");
    const double dz2 = f.dz() * f.dz();
    return (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2]) / (12.0 * dz2);
}

struct Measure {
    double log_rho = 0.0;
    double rho = 0.0;
    std::vector<double> weights; // normalized integrand; sums to 1
};

// rho = integral of exp(u/eps) by trapezoid quadrature, evaluated in shifted
// log space so that any u scale is safe. weights[i] is the normalized
// integrand (the discrete probability measure n/rho).
inline Measure softmax_measure(const Field1D& u, double eps) {
    if (!(eps > 0.0)) throw error("softmax_measure: eps must be positive");
    const int n = u.size();
    double m = u[0];
    for (int i = 1; i < n; ++i) m = std::max(m, u[i]);

    Measure out;
    out.weights.resize(n);
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        const double w = (i == 0 || i == n - 1) ? 0.5 * u.dz() : u.dz();
        const double e = w * std::exp((u[i] - m) / eps);
        out.weights[i] = e;
        s += e;
    }
    for (double& w : out.weights) w /= s;
    out.log_rho = m / eps + std::log(s);
    out.rho = std::exp(out.log_rho);
    return out;
}

// Kernel values tabulated on the offset lattice {k*dz}. Odd symmetry is
// applied through the sign of the offset, so the pairwise antisymmetry of
// H(z_j - z_i) is exact.
class OffsetTable {
public:
    OffsetTable() = default;

    template <class F>
    OffsetTable(F&& h, int n, double dz) : h_(static_cast<size_t>(n)) {
        for (int k = 0; k < n; ++k) h_[k] = h(k * dz);
    }

    double at(int offset) const {
        return offset >= 0 ? h_[static_cast<size_t>(offset)]
                           : -h_[static_cast<size_t>(-offset)];
    }

    int size() const { return static_cast<int>(h_.size()); }

private:
    std::vector<double> h_;
};

// Transfer flux Phi(z_j) = tau * sum_i p_i H(z_j - y_i), sources and targets
// on the same grid. Direct O(N*K) evaluation over [i_lo, i_hi].
inline Field1D transfer_field(std::span<const double> weights, const Field1D& grid,
                              const OffsetTable& table, double tau,
                              int i_lo = 0, int i_hi = -1) {
    const int n = grid.size();
    if (static_cast<int>(weights.size()) != n)
        throw error("transfer_field: weights/grid size mismatch");
    if (i_hi < 0) i_hi = n - 1;
    Field1D phi(grid.z_min(), grid.z_max(), n);
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = i_lo; i <= i_hi; ++i) s += weights[i] * table.at(j - i);
        phi[j] = tau * s;
    }
    return phi;
}

// Generic variant taking any H evaluator (used for off-lattice checks).
inline Field1D transfer_field(std::span<const double> weights, const Field1D& grid,
                              const std::function<double(double)>& h, double tau) {
    OffsetTable table(h, grid.size(), grid.dz());
    return transfer_field(weights, grid, table, tau);
}

// Godunov numerical Hamiltonian for p -> p^2 in the expanding form
// du/dt = |u_z|^2: at each node returns max(min(p-,0)^2, max(p+,0)^2) from
// the one-sided slopes. One-sided stencils at the boundary nodes. The
// concave-kink value is 0, the viscosity-correct choice for this equation.
inline Field1D upwind_hamiltonian(const Field1D& u) {
    const int n = u.size();
    const double inv_dz = 1.0 / u.dz();
    Field1D h(u.z_min(), u.z_max(), n);
    for (int j = 0; j < n; ++j) {
        const double pm = (j > 0) ? (u[j] - u[j - 1]) * inv_dz : (u[j + 1] - u[j]) * inv_dz;
        const double pp = (j < n - 1) ? (u[j + 1] - u[j]) * inv_dz : pm;
        const double a = std::min(pm, 0.0);
        const double b = std::max(pp, 0.0);
        h[j] = std::max(a * a, b * b);
    }
    return h;
}

// Largest one-sided slope magnitude; drives the Hamiltonian CFL bound.
inline double max_abs_slope(const Field1D& u) {
    const double inv_dz = 1.0 / u.dz();
    double m = 0.0;
    for (int j = 1; j < u.size(); ++j)
        m = std::max(m, std::abs((u[j] - u[j - 1]) * inv_dz));
    return m;
}

// CFL bound dt <= dz / (2 max|u_z|) for the explicit Hamiltonian update.
inline double hamiltonian_cfl_dt(const Field1D& u) {
    const double s = max_abs_slope(u);
    if (s == 0.0) return std::numeric_limits<double>::infinity();
    return u.dz() / (2.0 * s);
}

struct SignInterval {
    double lo = 0.0, hi = 0.0;
    double width() const { return hi - lo; }
};

// Connected components of {f > 0} on [lo, hi] located by an n-point sign
// scan; endpoints refined by bisection on f to xtol.
inline std::vector<SignInterval> positive_intervals(const std::function<double(double)>& f,
                                                    double lo, double hi, int n,
                                                    double xtol = 1e-10) {
    std::vector<SignInterval> out;
    const double dz = (hi - lo) / (n - 1);
    auto refine = [&](double a, double b) {
        // sign change of f in [a, b]
        double fa = f(a);
        for (int it = 0; it < 80; ++it) {
            const double m = 0.5 * (a + b);
            const double fm = f(m);
            if ((fa > 0.0) == (fm > 0.0)) {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
            if (b - a < xtol) break;
        }
        return 0.5 * (a + b);
    };

    bool inside = f(lo) > 0.0;
    double start = lo;
    double zprev = lo;
    for (int i = 1; i < n; ++i) {
        const double zi = lo + i * dz;
        const bool pos = f(zi) > 0.0;
        if (pos && !inside) {
            start = refine(zprev, zi);
            inside = true;
        } else if (!pos && inside) {
            out.push_back({start, refine(zprev, zi)});
            inside = false;
        }
        zprev = zi;
    }
    if (inside) out.push_back({start, hi});
    return out;
}

} // namespace hgt
