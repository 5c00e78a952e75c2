#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "hgt/model.hpp"

using Catch::Approx;
using namespace hgt;

namespace {

// frozen from the independent high-precision bisection oracle
constexpr double kD1Tanh = 1.6061152988027674;
constexpr double kMu1Tanh = 1.8869699070857536;

ModelConfig quadratic_config(double g, double tau) {
    ModelConfig cfg;
    cfg.g = g;
    cfg.tau = tau;
    return cfg;
}

// the slope-normalized stretch s H(x/s) keeps H'(0) = 1 and scales d1 by s
TransferKernel stretched_tanh(double s) {
    return TransferKernel::analytic(
        "stretched-tanh",
        [s](double x) { return s * std::tanh(x / s); },
        [s](double x) {
            const double t = std::tanh(x / s);
            return 1.0 - t * t;
        },
        [s](double x) {
            const double t = std::tanh(x / s);
            return -2.0 * t * (1.0 - t * t) / s;
        },
        [s](double x) {
            const double t = std::tanh(x / s);
            return (1.0 - t * t) * (6.0 * t * t - 2.0) / (s * s);
        });
}

} // namespace

TEST_CASE("compute_d1", "[model]") {
    const auto k = TransferKernel::tanh_kernel();

    SECTION("tanh root and residual") {
        const double d1 = compute_d1(k, 1e-12);
        REQUIRE(d1 == Approx(kD1Tanh).epsilon(1e-10));
        const double resid = d1 * (1.0 + k(d1, 1)) - 2.0 * k(d1, 0);
        REQUIRE(std::abs(resid) < 1e-12);
        REQUIRE(d1 > k.z_inflection());
    }

    SECTION("sign pattern of phi around the root") {
        const double d1 = compute_d1(k);
        auto phi = [&](double d) { return d * (1.0 + k(d, 1)) - 2.0 * k(d, 0); };
        REQUIRE(phi(0.5 * d1) < 0.0);
        REQUIRE(phi(2.0 * d1) > 0.0);
    }

    SECTION("kernel stretch scales the root: d1(s H(./s)) = s d1") {
        const double d1s = compute_d1(stretched_tanh(2.0));
        REQUIRE(d1s == Approx(2.0 * kD1Tanh).epsilon(1e-9));
        REQUIRE(d1s > compute_d1(k)); // strictly increases with the stretch
    }

    SECTION("raw tanh(x/2) violates H'(0)=1 and has no root: hypothesis error") {
        const auto bad = TransferKernel::analytic(
            "tanh-half",
            [](double x) { return std::tanh(0.5 * x); },
            [](double x) {
                const double t = std::tanh(0.5 * x);
                return 0.5 * (1.0 - t * t);
            },
            [](double x) {
                const double t = std::tanh(0.5 * x);
                return -0.5 * t * (1.0 - t * t);
            },
            [](double x) {
                const double t = std::tanh(0.5 * x);
                return 0.25 * (1.0 - t * t) * (6.0 * t * t - 2.0);
            });
        REQUIRE_THROWS_AS(compute_d1(bad), hypothesis_error);
    }
}

TEST_CASE("compute_mu1", "[model]") {
    const auto k = TransferKernel::tanh_kernel();
    const double mu1 = compute_mu1(k);

    SECTION("value and closed-form identity") {
        REQUIRE(mu1 == Approx(kMu1Tanh).epsilon(1e-9));
        const double d1 = compute_d1(k);
        const double hp = k(d1, 1);
        const double alt = 2.0 * k(d1) / ((1.0 - hp) * (1.0 + hp));
        REQUIRE(mu1 == Approx(alt).margin(1e-9));
    }

    SECTION("stationary fitness vanishes at the second contact point mu1 - d1") {
        const double d1 = compute_d1(k);
        auto cfg = quadratic_config(1.0, 2.0 * mu1); // mu = mu1
        REQUIRE(fitness_stationary(mu1 - d1, mu1, cfg) == Approx(0.0).margin(1e-9));
    }
}

TEST_CASE("fitness functions", "[model]") {
    auto cfg = quadratic_config(1.0, 1.0); // mu = 0.5 < mu1

    SECTION("stationary fitness vanishes at mu, strictly negative elsewhere") {
        REQUIRE(fitness_stationary(0.5, 0.5, cfg) == 0.0);
        for (double z = -3.0; z <= 3.0; z += 0.01) {
            if (std::abs(z - 0.5) < 1e-9) continue;
            REQUIRE(fitness_stationary(z, 0.5, cfg) < 0.0);
        }
    }

    SECTION("dynamic fitness: F(zbar, zbar) = 0 and slope 2g(mu - zbar)") {
        for (double zbar : {-0.3, 0.0, 0.2, 0.45}) {
            REQUIRE(fitness_dynamic(zbar, zbar, cfg) == 0.0);
            REQUIRE(fitness_dynamic(zbar, zbar, cfg, 1) ==
                    Approx(2.0 * cfg.g * (cfg.mu() - zbar)).margin(1e-12));
        }
    }

    SECTION("curvature below -g to the right of the peak") {
        for (double zbar : {-0.5, 0.0, 0.3}) {
            for (double z = zbar + 1e-3; z < 3.0; z += 0.05)
                REQUIRE(fitness_dynamic(z, zbar, cfg, 2) < -cfg.g);
        }
    }

    SECTION("single zero at zbar on (-inf, mu] with positive slope when zbar < mu") {
        const double zbar = 0.1;
        int sign_changes = 0;
        double prev = fitness_dynamic(-6.0, zbar, cfg);
        for (double z = -6.0; z <= cfg.mu(); z += 1e-3) {
            const double v = fitness_dynamic(z, zbar, cfg);
            if ((prev < 0.0) != (v < 0.0)) ++sign_changes;
            prev = v;
        }
        REQUIRE(sign_changes == 1);
        REQUIRE(fitness_dynamic(zbar, zbar, cfg, 1) > 0.0);
    }
}

TEST_CASE("transfer-selection inequality on a dense sample grid", "[model]") {
    const auto k = TransferKernel::tanh_kernel();
    const double mu1 = compute_mu1(k);
    const double d1 = compute_d1(k);
    auto f = [&](double x, double mu) { return mu * k(x) - x * (mu - 0.5 * x); };

    double fmin = 1e300, xmin = 0.0, mumin = 0.0;
    for (int i = 1; i <= 100; ++i) {
        for (int j = 1; j <= 100; ++j) {
            const double x = 5.0 * i / 100.0;
            const double mu = mu1 * j / 100.0;
            const double v = f(x, mu);
            REQUIRE(v >= -1e-12);
            if (v < fmin) {
                fmin = v;
                xmin = x;
                mumin = mu;
            }
        }
    }
    REQUIRE(std::abs(xmin - d1) < 0.2);
    REQUIRE(std::abs(mumin - mu1) < 0.05);
}

TEST_CASE("classify_regime", "[model]") {
    SECTION("g=1, tau=1: monomorphic convergence to mu = 0.5") {
        const auto rep = classify_regime(quadratic_config(1.0, 1.0));
        REQUIRE(rep.regime == Regime::MonomorphicConvergence);
        REQUIRE(rep.mu == Approx(0.5));
        REQUIRE(rep.mu1 == Approx(kMu1Tanh).epsilon(1e-9));
        REQUIRE(rep.predicted_limit_trait.value() == Approx(0.5));
    }

    SECTION("figure-6 parameters: beyond mu1") {
        const auto rep = classify_regime(quadratic_config(0.065, 0.5));
        REQUIRE(rep.mu == Approx(3.8461538461538463).epsilon(1e-12));
        REQUIRE(rep.regime == Regime::BeyondMu1);
    }

    SECTION("g=1, tau=2.2: finite-time suicide with extinction trait 1") {
        const auto rep = classify_regime(quadratic_config(1.0, 2.2));
        REQUIRE(rep.regime == Regime::SuicideFiniteTime);
        REQUIRE(rep.predicted_extinction_trait.value() == Approx(1.0));
    }

    SECTION("tau exactly on the 2 sqrt(g) boundary: asymptotic suicide, both flags") {
        const auto rep = classify_regime(quadratic_config(1.0, 2.0));
        REQUIRE(rep.regime == Regime::SuicideAsymptotic);
        REQUIRE(rep.at_tau_boundary);
        REQUIRE(rep.predicted_limit_trait.has_value());
        REQUIRE(rep.predicted_extinction_trait.has_value());
    }

    SECTION("regime depends only on (mu, tau/sqrt(g))") {
        std::mt19937 rng(3);
        std::uniform_real_distribution<double> gd(0.05, 4.0), td(0.05, 4.0);
        const double mu1 = compute_mu1(TransferKernel::tanh_kernel());
        for (int i = 0; i < 60; ++i) {
            const double g = gd(rng), tau = td(rng);
            const auto rep = classify_regime(quadratic_config(g, tau));
            const double mu = tau / (2.0 * g);
            const double r = tau / std::sqrt(g);
            Regime expect;
            if (mu > mu1)
                expect = Regime::BeyondMu1;
            else if (std::abs(r - 2.0) <= 1e-12 * std::max(r, 2.0))
                expect = Regime::SuicideAsymptotic;
            else
                expect = r < 2.0 ? Regime::MonomorphicConvergence : Regime::SuicideFiniteTime;
            REQUIRE(rep.regime == expect);
        }
    }
}

TEST_CASE("classify_initial_fitness_type", "[model]") {
    SECTION("z0 = mu < mu1: degenerate (no positivity set)") {
        auto cfg = quadratic_config(1.0, 1.0);
        cfg.z0 = 0.5;
        REQUIRE(classify_initial_fitness_type(cfg) == FitnessType::Degenerate);
    }

    SECTION("z0 < mu: single positivity interval") {
        auto cfg = quadratic_config(1.0, 1.0);
        cfg.z0 = 0.0;
        REQUIRE(classify_initial_fitness_type(cfg) == FitnessType::TypeOne);
    }

    SECTION("tau=0.5, mu=1.7 sweep over z0 in (mu, mu1): both types occur") {
        // g = tau / (2 mu)
        auto cfg = quadratic_config(0.5 / 3.4, 0.5);
        cfg.N = 2001;
        cfg.z0 = 1.75;
        REQUIRE(classify_initial_fitness_type(cfg) == FitnessType::TypeOne);
        cfg.z0 = 1.80;
        REQUIRE(classify_initial_fitness_type(cfg) == FitnessType::TypeTwo);
    }
}

TEST_CASE("config validation", "[model]") {
    SECTION("grid resolution bound dz <= z_H / 10") {
        ModelConfig cfg;
        cfg.N = 8; // dz way above z_H/10 for the default domain
        REQUIRE_THROWS_AS(cfg.validate(), config_error);
        cfg.N = 1025;
        REQUIRE_NOTHROW(cfg.validate());
    }

    SECTION("maladapted z0 rejected") {
        ModelConfig cfg;
        cfg.z0 = 1.5; // outside D_R = (-1, 1) for g = 1
        REQUIRE_THROWS_AS(cfg.validate(), config_error);
    }
}
