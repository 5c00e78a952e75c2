#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "hgt/eps_solver.hpp"
#include "hgt/model.hpp"

using Catch::Approx;
using namespace hgt;

namespace {

ModelConfig base_config() {
    ModelConfig cfg;
    cfg.g = 1.0;
    cfg.tau = 1.0;
    cfg.epsilon = 1e-2;
    cfg.z0 = 0.0;
    cfg.c = 1.0;
    cfg.N = 513;
    cfg.dt = 5e-3;
    return cfg;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

} // namespace

TEST_CASE("init_gaussian", "[eps]") {
    auto cfg = base_config();

    SECTION("argmax and curvature of the exact Gaussian log") {
        const auto s = eps::init_gaussian(cfg);
        REQUIRE(s.zbar == Approx(0.0).margin(1e-12));
        REQUIRE(s.d2u_zbar == Approx(-2.0).margin(1e-9));
    }

    SECTION("mass normalization makes rho(0) = R(z0) hold") {
        const auto s = eps::init_gaussian(cfg);
        REQUIRE(s.rho == Approx(cfg.growth()(cfg.z0)).epsilon(1e-9));
    }

    SECTION("unnormalized mass is sqrt(pi / c), independent of eps") {
        cfg.mass_normalize = false;
        for (double e : {1e-2, 4e-3}) {
            cfg.epsilon = e;
            const auto s = eps::init_gaussian(cfg);
            REQUIRE(s.rho == Approx(std::sqrt(3.14159265358979323846 / cfg.c)).epsilon(1e-6));
        }
    }

    SECTION("maladapted initial trait rejected") {
        cfg.z0 = 1.5; // outside D_R = (-1, 1)
        REQUIRE_THROWS_AS(eps::init_gaussian(cfg), maladapted_initial_datum);
    }
}

TEST_CASE("quadratic data evolve by the exact coefficient ODEs", "[eps]") {
    // with R = 0 and tau = 0 the equation is du/dt = eps u'' + (u_z)^2 - rho(t);
    // a quadratic u = a(t) z^2 + b(t) stays quadratic with
    //   a' = 4 a^2,  b' = 2 eps a - rho,  rho = e^{b/eps} sqrt(pi eps / |a|),
    // so a(t) = -c/(1+4ct) in closed form and b comes from a scalar ODE oracle.
    ModelConfig cfg = base_config();
    cfg.tau = 0.0;
    cfg.custom_growth = GrowthProfile::custom(
        "zero", [](double) { return 0.0; }, [](double) { return 0.0; },
        [](double) { return 0.0; }, {-100.0, 100.0}, GrowthEnvelope{});
    cfg.N = 1025;
    const double c = 1.0, eps0 = cfg.epsilon;

    auto u0 = Field1D::sample(-5.5, 5.5, cfg.N, [c](double z) { return -c * z * z; });
    OffsetTable table([&cfg](double x) { return cfg.kernel(x); }, cfg.N, u0.dz());
    auto s = eps::from_field(u0, cfg, table);

    const double t_end = 0.3;
    while (s.t < t_end - 1e-12) {
        const double dt = std::min({5e-4, 0.9 * hamiltonian_cfl_dt(s.u), t_end - s.t});
        s = eps::step(s, cfg, dt, table);
    }

    SECTION("curvature follows a(t) = -c/(1+4ct), improving with resolution") {
        // the one-sided gradient stencil biases the peak curvature by O(dz),
        // smoothed over the sqrt(eps t) diffusion width
        const double a_exact = -c / (1.0 + 4.0 * c * t_end);
        const double err_base = std::abs(second_derivative_at(s.u, 0.0) - 2.0 * a_exact);
        REQUIRE(err_base < 0.08 * std::abs(2.0 * a_exact));

        ModelConfig fine = cfg;
        fine.N = 2049;
        auto uf = Field1D::sample(-5.5, 5.5, fine.N, [c](double z) { return -c * z * z; });
        OffsetTable tf([&fine](double x) { return fine.kernel(x); }, fine.N, uf.dz());
        auto sf = eps::from_field(uf, fine, tf);
        while (sf.t < t_end - 1e-12) {
            const double dt = std::min({5e-4, 0.9 * hamiltonian_cfl_dt(sf.u), t_end - sf.t});
            sf = eps::step(sf, fine, dt, tf);
        }
        const double err_fine = std::abs(second_derivative_at(sf.u, 0.0) - 2.0 * a_exact);
        CAPTURE(err_base, err_fine);
        REQUIRE(err_fine < err_base / 1.4);
    }

    SECTION("peak value follows the (a, b) ODE oracle") {
        double a = -c, b = 0.0, t = 0.0;
        const double h = 1e-5;
        auto rhs_b = [eps0](double av, double bv) {
            return 2.0 * eps0 * av -
                   std::exp(bv / eps0) * std::sqrt(3.14159265358979323846 * eps0 / -av);
        };
        while (t < t_end - 1e-12) {
            const double k1 = rhs_b(a, b);
            const double am = -c / (1.0 + 4.0 * c * (t + 0.5 * h));
            const double k2 = rhs_b(am, b + 0.5 * h * k1);
            const double k3 = rhs_b(am, b + 0.5 * h * k2);
            const double a1 = -c / (1.0 + 4.0 * c * (t + h));
            const double k4 = rhs_b(a1, b + h * k3);
            b += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            a = a1;
            t += h;
        }
        double umax = s.u[0];
        for (int j = 1; j < s.u.size(); ++j) umax = std::max(umax, s.u[j]);
        REQUIRE(umax == Approx(b).margin(5e-3));
    }
}

TEST_CASE("one step preserves symmetry when transfer is off", "[eps]") {
    ModelConfig cfg = base_config();
    cfg.tau = 0.0; // H odd would otherwise push the peak toward mu
    OffsetTable table([&cfg](double x) { return cfg.kernel(x); }, cfg.N, cfg.dz());
    auto s = eps::init_gaussian(cfg, &table);
    const auto s1 = eps::step(s, cfg, 0.9 * hamiltonian_cfl_dt(s.u), table);
    REQUIRE(s1.zbar == Approx(0.0).margin(1e-12));
}

TEST_CASE("CFL violation rejects the step with a usable suggestion", "[eps]") {
    ModelConfig cfg = base_config();
    OffsetTable table([&cfg](double x) { return cfg.kernel(x); }, cfg.N, cfg.dz());
    const auto s = eps::init_gaussian(cfg, &table);
    const double cfl = hamiltonian_cfl_dt(s.u);
    try {
        eps::step(s, cfg, 10.0 * cfl, table);
        FAIL("step should have been rejected");
    } catch (const step_rejected& e) {
        REQUIRE(e.suggested_dt <= cfl);
        REQUIRE(e.suggested_dt > 0.0);
    }
}

TEST_CASE("run invariants along a short monomorphic run", "[eps]") {
    ModelConfig cfg = base_config();
    cfg.T = 3.0;
    eps::RunOptions opt;
    opt.record_dt = 0.05;
    const auto rec = eps::run(cfg, opt);

    SECTION("zero-sum transfer at every step") {
        REQUIRE(rec.max_abs_transfer_sum < 1e-10);
    }

    SECTION("mass bounds 0 < rho <= max(1, rho_M)") {
        const double rho_max = std::max(1.0, rec.rho_initial);
        for (const auto& s : rec.samples) {
            REQUIRE(s.rho > 0.0);
            REQUIRE(s.rho <= rho_max * (1.0 + 1e-12));
        }
    }

    SECTION("max u stays within the eps ln(1/eps) band around 0") {
        const double scale = cfg.epsilon * std::log(1.0 / cfg.epsilon);
        for (const auto& s : rec.samples) {
            REQUIRE(s.u_max <= scale + 1e-3); // +eps ln(1/eps)/2 at t=0 from the prefactor
            REQUIRE(s.u_max >= -4.0 * scale - 0.01);
        }
    }

    SECTION("trait nondecreasing up to grid wiggle and bounded by mu + O(eps)") {
        for (size_t i = 1; i < rec.samples.size(); ++i)
            REQUIRE(rec.samples[i].zbar >= rec.samples[i - 1].zbar - 2.0 * rec.dz);
        for (const auto& s : rec.samples)
            REQUIRE(s.zbar <= cfg.mu() + 10.0 * cfg.epsilon);
    }

    SECTION("solution stays inside the quadratic envelope") {
        ModelConfig snap_cfg = cfg;
        snap_cfg.T = 1.0;
        eps::RunOptions sopt;
        sopt.record_dt = 0.2;
        sopt.snapshot_every = 1;
        const auto r2 = eps::run(snap_cfg, sopt);
        const auto env = eps::envelope_bounds(snap_cfg, std::max(1.0, r2.rho_initial));
        for (const auto& snap : r2.snapshots)
            for (int j = 0; j < snap.field.size(); ++j)
                REQUIRE(env.contains(snap.field.z(j), snap.t, snap.field[j]));
    }
}

TEST_CASE("mass-ODE residual shrinks under refinement", "[eps]") {
    auto residual_median = [](int n) {
        ModelConfig cfg = base_config();
        cfg.N = n;
        cfg.T = 2.0;
        cfg.dt = 0.25 * cfg.dz(); // CFL-scaled so halving dz halves dt
        const auto rec = eps::run(cfg);
        std::vector<double> tail(rec.mass_residuals.begin() + rec.mass_residuals.size() / 4,
                                 rec.mass_residuals.end());
        return median(tail);
    };
    const double r_coarse = residual_median(513);
    const double r_fine = residual_median(1025);
    CAPTURE(r_coarse, r_fine);
    REQUIRE(r_coarse / r_fine >= 1.5);
}

TEST_CASE("no-transfer baseline concentrates on the selection optimum", "[eps]") {
    ModelConfig cfg = base_config();
    cfg.tau = 0.0;
    cfg.z0 = 0.3;
    cfg.T = 8.0;
    const auto rec = eps::run(cfg);
    REQUIRE(std::abs(rec.final_zbar()) < 0.3); // pure selection pulls toward 0
    REQUIRE(rec.final_zbar() < rec.samples.front().zbar);
    REQUIRE(rec.final_rho() == Approx(cfg.growth()(rec.final_zbar())).margin(0.05));
}

TEST_CASE("eps trait approaches mu in the monomorphic regime", "[eps]") {
    ModelConfig cfg = base_config();
    cfg.T = 12.0;
    const auto rec = eps::run(cfg);
    REQUIRE(std::abs(rec.final_zbar() - 0.5) < 0.05); // mu + O(eps ln eps)
}

TEST_CASE("transfer-driven extinction at tau > 2 sqrt(g)", "[eps]") {
    ModelConfig cfg = base_config();
    cfg.tau = 2.2;
    cfg.T = 20.0;
    const auto rec = eps::run(cfg);
    REQUIRE(rec.status == RunStatus::Extinct);
    REQUIRE(rec.final_rho() < 1e-6);
    REQUIRE(std::abs(*rec.extinction_trait - 1.0) < 0.1);
}

TEST_CASE("boundary argmax is flagged on the state", "[eps]") {
    ModelConfig cfg = base_config();
    OffsetTable table([&cfg](double x) { return cfg.kernel(x); }, cfg.N, cfg.dz());
    auto u = cfg.make_grid();
    for (int j = 0; j < u.size(); ++j) u[j] = u.z(j); // max at the right edge
    const auto s = eps::from_field(u, cfg, table);
    REQUIRE(s.zbar_on_boundary);
}
