#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "root_finding.hpp"

namespace hgt {

enum class KernelFamily { Tanh, ScaledArctan, RawArctan, CustomTabulated, CustomAnalytic };

namespace detail {

// Monotone cubic Hermite interpolant (Fritsch-Carlson tangents). Derivatives
// come from the cubic: order 2 is piecewise linear, order 3 piecewise
// constant, so tabulated kernels are documented as lower-accuracy.
class MonotoneCubic {
public:
    MonotoneCubic(std::vector<double> x, std::vector<double> y)
        : x_(std::move(x)), y_(std::move(y)) {
        const size_t n = x_.size();
        if (n < 4 || y_.size() != n)
            throw error("tabulated kernel needs at least 4 matching samples");
        for (size_t i = 1; i < n; ++i)
            if (!(x_[i] > x_[i - 1])) throw error("tabulated kernel abscissae must increase");

        std::vector<double> d(n - 1);
        for (size_t i = 0; i + 1 < n; ++i) d[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
        m_.resize(n);
        m_[0] = d[0];
        m_[n - 1] = d[n - 2];
        for (size_t i = 1; i + 1 < n; ++i)
            m_[i] = (d[i - 1] * d[i] > 0.0) ? 0.5 * (d[i - 1] + d[i]) : 0.0;
        for (size_t i = 0; i + 1 < n; ++i) {
            if (d[i] == 0.0) {
                m_[i] = m_[i + 1] = 0.0;
                continue;
            }
            const double a = m_[i] / d[i], b = m_[i + 1] / d[i];
            const double s = a * a + b * b;
            if (s > 9.0) {
                const double t = 3.0 / std::sqrt(s);
                m_[i] = t * a * d[i];
                m_[i + 1] = t * b * d[i];
            }
        }
    }

    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }

    double eval(double x, int order) const {
        if (x < x_.front() || x > x_.back())
            throw std::out_of_range("tabulated kernel evaluated outside its range");
        size_t i = static_cast<size_t>(std::upper_bound(x_.begin(), x_.end(), x) - x_.begin());
        i = (i == 0) ? 0 : i - 1;
        if (i + 1 >= x_.size()) i = x_.size() - 2;
        const double h = x_[i + 1] - x_[i];
        const double t = (x - x_[i]) / h;
        const double y0 = y_[i], y1 = y_[i + 1], m0 = m_[i] * h, m1 = m_[i + 1] * h;
        // cubic Hermite coefficients in t: y0 + c1 t + c2 t^2 + c3 t^3
        const double c1 = m0;
        const double c2 = -3.0 * y0 + 3.0 * y1 - 2.0 * m0 - m1;
        const double c3 = 2.0 * y0 - 2.0 * y1 + m0 + m1;
        switch (order) {
            case 0: return y0 + t * (c1 + t * (c2 + t * c3));
            case 1: return (c1 + t * (2.0 * c2 + t * 3.0 * c3)) / h;
            case 2: return (2.0 * c2 + 6.0 * c3 * t) / (h * h);
            case 3: return 6.0 * c3 / (h * h * h);
            default: throw std::invalid_argument("kernel derivative order must be 0..3");
        }
    }

private:
    std::vector<double> x_, y_, m_;
};

} // namespace detail

// Transfer flux kernel H with derivatives up to third order. Built-ins are
// evaluated from |x| with the parity sign applied afterwards, so oddness of
// H, H'' and evenness of H', H''' hold exactly. Evaluation is state-free
// after construction; the z_H cache is compute-once behind a shared flag.
class TransferKernel {
public:
    static TransferKernel tanh_kernel() {
        return TransferKernel(KernelFamily::Tanh, "tanh");
    }

    // (2/pi) * arctan(pi x / 2): saturates in (-1, 1) with H'(0) = 1.
    static TransferKernel scaled_arctan() {
        return TransferKernel(KernelFamily::ScaledArctan, "scaled-arctan");
    }

    // (2/pi) * arctan(x): H'(0) = 2/pi, so it violates the H'(0) = 1 clause.
    // Loadable for comparison runs; verify_hypotheses flags it.
    static TransferKernel raw_arctan() {
        return TransferKernel(KernelFamily::RawArctan, "raw-arctan");
    }

    static TransferKernel tabulated(std::vector<double> x, std::vector<double> h,
                                    std::string name = "tabulated") {
        TransferKernel k(KernelFamily::CustomTabulated, std::move(name));
        k.table_ = std::make_shared<detail::MonotoneCubic>(std::move(x), std::move(h));
        return k;
    }

    static TransferKernel analytic(std::string name,
                                   std::function<double(double)> h0,
                                   std::function<double(double)> h1,
                                   std::function<double(double)> h2,
                                   std::function<double(double)> h3) {
        TransferKernel k(KernelFamily::CustomAnalytic, std::move(name));
        k.fn_ = std::make_shared<std::array<std::function<double(double)>, 4>>(
            std::array<std::function<double(double)>, 4>{std::move(h0), std::move(h1),
                                                         std::move(h2), std::move(h3)});
        return k;
    }

    // H, H', H'' or H''' at x.
    double operator()(double x, int order = 0) const {
        if (order < 0 || order > 3)
            throw std::invalid_argument("kernel derivative order must be 0..3");
        switch (family_) {
            case KernelFamily::Tanh:
            case KernelFamily::ScaledArctan:
            case KernelFamily::RawArctan: {
                const double a = std::abs(x);
                const double v = builtin_eval(a, order);
                const bool odd_symmetric = (order % 2 == 0); // H and H'' are odd
                return (odd_symmetric && x < 0.0) ? -v : v;
            }
            case KernelFamily::CustomTabulated:
                return table_->eval(x, order);
            case KernelFamily::CustomAnalytic:
                return (*fn_)[static_cast<size_t>(order)](x);
        }
        throw error("unreachable kernel family");
    }

    // z_H: the unique positive root of H''' (inflection of H''), located by
    // bracketed bisection over (1e-6, 10) and cached.
    double z_inflection() const {
        std::call_once(zh_->flag, [this] {
            auto h3 = [this](double x) { return (*this)(x, 3); };
            double hi = 10.0;
            if (has_range()) hi = std::min(hi, 0.999 * range().second);
            auto bracket = scan_for_sign_change(h3, 1e-6, hi, 512);
            if (!bracket)
                throw hypothesis_error("no sign change of H''' on (1e-6, 10): no inflection split");
            zh_->value = bisect(h3, bracket->lo, bracket->hi, 1e-15);
        });
        return zh_->value;
    }

    KernelFamily family() const { return family_; }
    const std::string& name() const { return name_; }

    bool has_range() const { return family_ == KernelFamily::CustomTabulated; }
    std::pair<double, double> range() const {
        if (!has_range()) throw error("kernel has no tabulation range");
        return {table_->x_min(), table_->x_max()};
    }

private:
    TransferKernel(KernelFamily f, std::string name)
        : family_(f), name_(std::move(name)), zh_(std::make_shared<ZHBox>()) {}

    double builtin_eval(double a, int order) const {
        switch (family_) {
            case KernelFamily::Tanh: {
                const double t = std::tanh(a);
                const double s2 = 1.0 - t * t;
                switch (order) {
                    case 0: return t;
                    case 1: return s2;
                    case 2: return -2.0 * t * s2;
                    default: return s2 * (6.0 * t * t - 2.0);
                }
            }
            case KernelFamily::ScaledArctan: {
                const double k = 1.5707963267948966; // pi/2
                const double ka = k * a;
                const double w = 1.0 + ka * ka;
                switch (order) {
                    case 0: return std::atan(ka) / k;
                    case 1: return 1.0 / w;
                    case 2: return -2.0 * k * ka / (w * w);
                    default: return 2.0 * k * k * (3.0 * ka * ka - 1.0) / (w * w * w);
                }
            }
            default: { // RawArctan
                const double c2 = 0.6366197723675814; // 2/pi
                const double w = 1.0 + a * a;
                switch (order) {
                    case 0: return c2 * std::atan(a);
                    case 1: return c2 / w;
                    case 2: return -2.0 * c2 * a / (w * w);
                    default: return 2.0 * c2 * (3.0 * a * a - 1.0) / (w * w * w);
                }
            }
        }
    }

    struct ZHBox {
        std::once_flag flag;
        double value = 0.0;
    };

    KernelFamily family_;
    std::string name_;
    std::shared_ptr<detail::MonotoneCubic> table_;
    std::shared_ptr<std::array<std::function<double(double)>, 4>> fn_;
    std::shared_ptr<ZHBox> zh_;
};

enum class GrowthFamily { Quadratic, Custom };

// Envelope constants of the growth rate: K3 - K4 z^2 <= R <= K1 - K2 z^2,
// -K0_lower <= R'' <= -K0_upper, |R'''| <= K5.
struct GrowthEnvelope {
    double K1 = 1.0, K2 = 1.0, K3 = 1.0, K4 = 1.0, K5 = 0.0;
    double K0_lower = 2.0, K0_upper = 2.0;
};

// Growth rate R with derivatives, its viability interval D_R = {R > 0}, and
// the balance trait z_mu solving tau + R'(z_mu) = 0.
class GrowthProfile {
public:
    static GrowthProfile quadratic(double g) {
        if (!(g > 0.0)) throw error("quadratic growth requires g > 0");
        GrowthProfile r;
        r.family_ = GrowthFamily::Quadratic;
        r.g_ = g;
        r.dr_ = {-1.0 / std::sqrt(g), 1.0 / std::sqrt(g)};
        r.env_ = {1.0, g, 1.0, g, 0.0, 2.0 * g, 2.0 * g};
        return r;
    }

    static GrowthProfile custom(std::string name,
                                std::function<double(double)> r0,
                                std::function<double(double)> r1,
                                std::function<double(double)> r2,
                                std::pair<double, double> d_r,
                                GrowthEnvelope env) {
        GrowthProfile r;
        r.family_ = GrowthFamily::Custom;
        r.name_ = std::move(name);
        r.fn_ = std::make_shared<std::array<std::function<double(double)>, 3>>(
            std::array<std::function<double(double)>, 3>{std::move(r0), std::move(r1),
                                                         std::move(r2)});
        r.dr_ = d_r;
        r.env_ = env;
        return r;
    }

    double operator()(double z, int order = 0) const {
        if (order < 0 || order > 2)
            throw std::invalid_argument("growth derivative order must be 0..2");
        if (family_ == GrowthFamily::Quadratic) {
            switch (order) {
                case 0: return 1.0 - g_ * z * z;
                case 1: return -2.0 * g_ * z;
                default: return -2.0 * g_;
            }
        }
        return (*fn_)[static_cast<size_t>(order)](z);
    }

    GrowthFamily family() const { return family_; }
    double g() const {
        if (family_ != GrowthFamily::Quadratic) throw error("g defined only for quadratic growth");
        return g_;
    }
    std::pair<double, double> positive_set() const { return dr_; }
    const GrowthEnvelope& envelope() const { return env_; }
    const std::string& name() const { return name_; }

    // tau + R'(z_mu) = 0; closed form for the quadratic family, bracketed
    // bisection otherwise.
    double z_mu(double tau) const {
        if (family_ == GrowthFamily::Quadratic) return tau / (2.0 * g_);
        auto f = [&](double z) { return tau + (*this)(z, 1); };
        const double span = dr_.second - dr_.first;
        auto bracket = scan_for_sign_change(f, dr_.first - span, dr_.second + span, 512);
        if (!bracket) throw hypothesis_error("no root of tau + R' near D_R");
        return bisect(f, bracket->lo, bracket->hi, 1e-14);
    }

private:
    GrowthFamily family_ = GrowthFamily::Quadratic;
    std::string name_ = "quadratic";
    double g_ = 1.0;
    std::pair<double, double> dr_{-1.0, 1.0};
    GrowthEnvelope env_;
    std::shared_ptr<std::array<std::function<double(double)>, 3>> fn_;
};

struct HypothesisCheck {
    std::string name;
    bool passed = true;
    double worst_z = 0.0;     // worst offending sample point
    double worst_value = 0.0; // margin at the worst point (negative = violation)
    std::string detail;
};

struct HypothesisReport {
    std::vector<HypothesisCheck> checks;

    bool all_passed() const {
        for (const auto& c : checks)
            if (!c.passed) return false;
        return true;
    }
    const HypothesisCheck* find(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }
};

// Sample-based verification of the structural kernel and growth
// hypotheses. Failures are data,
// not errors: each clause reports pass/fail plus the worst sample.
inline HypothesisReport verify_hypotheses(const TransferKernel& k, const GrowthProfile& r,
                                          double z_lo, double z_hi, int n_samples,
                                          double tau) {
    HypothesisReport rep;
    auto add = [&rep](std::string name, bool pass, double z, double margin, std::string detail) {
        rep.checks.push_back({std::move(name), pass, z, margin, std::move(detail)});
    };
    const double dz = (z_hi - z_lo) / (n_samples - 1);
    auto sample_z = [&](int i) { return z_lo + i * dz; };

    // clamp sampling for range-limited kernels
    double klo = z_lo, khi = z_hi;
    if (k.has_range()) {
        klo = std::max(klo, k.range().first);
        khi = std::min(khi, k.range().second);
    }

    {
        // odd, bounded in (-1, 1), strictly increasing
        double worst = 1e300, wz = 0.0;
        const double hi_sym = std::min(std::abs(klo), khi);
        for (int i = 0; i <= n_samples; ++i) {
            const double x = hi_sym * i / n_samples;
            const double m = 1e-10 - std::abs(k(x) + k(-x));
            if (m < worst) {
                worst = m;
                wz = x;
            }
        }
        add("kernel.odd", worst >= 0.0, wz, worst, "H(-x) = -H(x)");

        worst = 1e300;
        wz = 0.0;
        for (int i = 0; i < n_samples; ++i) {
            const double x = klo + (khi - klo) * i / (n_samples - 1);
            const double m = 1.0 - std::abs(k(x));
            if (m < worst) {
                worst = m;
                wz = x;
            }
        }
        add("kernel.range", worst > 0.0, wz, worst, "-1 < H < 1");

        worst = 1e300;
        wz = 0.0;
        double prev = k(klo);
        for (int i = 1; i < n_samples; ++i) {
            const double x = klo + (khi - klo) * i / (n_samples - 1);
            const double v = k(x);
            if (v - prev < worst) {
                worst = v - prev;
                wz = x;
            }
            prev = v;
        }
        add("kernel.monotone", worst > 0.0, wz, worst, "H strictly increasing on sampled grid");
    }

    add("kernel.H(0)=0", std::abs(k(0.0, 0)) <= 1e-12, 0.0, -std::abs(k(0.0, 0)), "H(0) = 0");
    add("kernel.H'(0)=1", std::abs(k(0.0, 1) - 1.0) <= 1e-12, 0.0, -std::abs(k(0.0, 1) - 1.0),
        "H'(0) = 1 within 1e-12");

    {
        // H'' < 0 for x > 0
        double worst = 1e300, wz = 0.0;
        for (int i = 1; i <= n_samples; ++i) {
            const double x = khi * i / n_samples;
            if (x <= 0.0) continue;
            const double m = -k(x, 2);
            if (m < worst) {
                worst = m;
                wz = x;
            }
        }
        add("kernel.concave-right", worst > 0.0, wz, worst, "H''(x) < 0 for x > 0");
    }

    {
        // H''' <= 0 on (0, z_H], > 0 beyond
        bool pass = true;
        double wz = 0.0, wv = 0.0;
        std::string detail = "H''' sign split at z_H";
        try {
            const double zh = k.z_inflection();
            double worst = 1e300;
            for (int i = 1; i <= n_samples; ++i) {
                const double x = khi * i / n_samples;
                const double h3 = k(x, 3);
                const double m = (x <= zh) ? -h3 : h3;
                if (m < worst) {
                    worst = m;
                    wz = x;
                }
            }
            // inside the split the sign may touch zero at z_H itself
            pass = worst >= -1e-12;
            wv = worst;
        } catch (const hypothesis_error& e) {
            pass = false;
            detail = e.what();
        }
        add("kernel.inflection-split", pass, wz, wv, detail);
    }

    {
        // quadratic envelope and curvature band
        const auto& e = r.envelope();
        double worst = 1e300, wz = 0.0;
        for (int i = 0; i < n_samples; ++i) {
            const double z = sample_z(i);
            const double v = r(z);
            const double m = std::min((e.K1 - e.K2 * z * z) - v, v - (e.K3 - e.K4 * z * z));
            if (m < worst) {
                worst = m;
                wz = z;
            }
        }
        add("growth.envelope", worst >= -1e-12, wz, worst, "K3 - K4 z^2 <= R <= K1 - K2 z^2");

        worst = 1e300;
        wz = 0.0;
        for (int i = 0; i < n_samples; ++i) {
            const double z = sample_z(i);
            const double v = r(z, 2);
            const double m = std::min(v + e.K0_lower, -e.K0_upper - v);
            if (m < worst) {
                worst = m;
                wz = z;
            }
        }
        add("growth.curvature-band", worst >= -1e-12, wz, worst, "-K0_lower <= R'' <= -K0_upper");
    }

    {
        // the balance trait z_mu must sit inside D_R
        bool pass = false;
        double zmu = 0.0;
        std::string detail;
        try {
            zmu = r.z_mu(tau);
            const auto dr = r.positive_set();
            pass = zmu > dr.first && zmu < dr.second;
            detail = "z_mu in D_R given tau";
        } catch (const hypothesis_error& e) {
            detail = e.what();
        }
        add("growth.z_mu-viable", pass, zmu, 0.0, detail);
    }

    return rep;
}

} // namespace hgt
