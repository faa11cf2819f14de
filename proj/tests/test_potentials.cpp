#include <catch2/catch_amalgamated.hpp>

#include "ctm/potentials.hpp"

using namespace ctm;
using Catch::Approx;

TEST_CASE("scalar potential families") {
    SpatialGrid g(-50.0, 50.0, 1024);

    SECTION("zero") {
        auto f = sample_potential(ScalarPotential::zero(), g);
        for (auto& z : f.v) REQUIRE(z == cplx(0));
    }

    SECTION("poschl_teller(1) is -2 sech^2") {
        auto p = ScalarPotential::poschl_teller(1);
        REQUIRE(p(0.0) == Approx(-2.0));
        REQUIRE(p(1.3) == Approx(-2.0 / std::pow(std::cosh(1.3), 2)));
    }

    SECTION("gaussian(1,1) peaks at 1") {
        auto p = ScalarPotential::gaussian(1.0, 1.0);
        REQUIRE(p(0.0) == Approx(1.0));
        REQUIRE(p(2.0) == Approx(std::exp(-2.0)));
    }

    SECTION("evenness by construction") {
        for (const auto& p :
             {ScalarPotential::poschl_teller(2), ScalarPotential::gaussian(-0.7, 1.4),
              ScalarPotential::sech_square(-1.0, 0.5)})
            for (double x : {0.3, 1.7, 9.2}) REQUIRE(p(x) == Approx(p(-x)));
    }

    SECTION("decay certificates are finite for the library") {
        REQUIRE(ScalarPotential::poschl_teller(1).decay_certificate() < 10.0);
        REQUIRE(ScalarPotential::gaussian(0.2, 1.0).decay_certificate() < 10.0);
    }

    SECTION("sampled tables validated on read") {
        std::vector<double> xs, good, uneven;
        for (int i = 0; i <= 400; ++i) {
            double x = -20.0 + 0.1 * i;
            xs.push_back(x);
            good.push_back(-std::exp(-std::abs(x)));
            uneven.push_back(x > 0 ? -1.0 : 0.0);
        }
        auto p = ScalarPotential::sampled(xs, good, 1.0);
        REQUIRE(p(0.5) == Approx(-std::exp(-0.5)).margin(1e-6));
        REQUIRE_THROWS_AS(ScalarPotential::sampled(xs, uneven, 1.0), ConfigError);
        // a slowly decaying table must not certify gamma = 1
        std::vector<double> slow;
        for (double x : xs) slow.push_back(-1.0 / (1.0 + 0.01 * x * x));
        REQUIRE_THROWS_AS(ScalarPotential::sampled(xs, slow, 1.0), ConfigError);
    }
}

TEST_CASE("config ordering validation") {
    ChargeTransferConfig cfg;
    cfg.model = ModelKind::Scalar;
    cfg.centers.resize(2);
    cfg.centers[0].scalar = ScalarPotential::poschl_teller(1);
    cfg.centers[1].scalar = ScalarPotential::poschl_teller(1);
    cfg.centers[0].motion = {1.0, 10.0, 1.0, 0.0};
    cfg.centers[1].motion = {-1.0, -10.0, 1.0, 0.0};
    REQUIRE_NOTHROW(cfg.validate());
    REQUIRE(cfg.min_separation() == Approx(20.0));
    REQUIRE(cfg.min_velocity_gap() == Approx(2.0));
    std::swap(cfg.centers[0], cfg.centers[1]);
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("moving matrix potential") {
    SpatialGrid g(-50.0, 50.0, 1024);
    ChargeTransferConfig cfg;
    cfg.model = ModelKind::Matrix;
    cfg.centers.resize(1);
    auto& c = cfg.centers[0];
    c.matrix.U = ScalarPotential::poschl_teller(1);
    c.matrix.W = ScalarPotential::sech_square(0.5, 1.0);

    SECTION("W = 0 gives the shifted diagonal") {
        c.matrix.W = ScalarPotential::zero();
        c.motion = {2.0, 3.0, 1.0, 0.0};
        double t = 1.5;
        auto f = moving_matrix_potential(cfg, 0, t, g);
        for (int i = 0; i < g.n; i += 101) {
            double z = g.x(i) - 2.0 * t - 3.0;
            REQUIRE(f.u[i] == Approx(c.matrix.U(z)).margin(1e-14));
            REQUIRE(std::abs(f.w_off[i]) == 0.0);
        }
    }

    SECTION("t=0, resting center, zero phase collapses the phase factor") {
        c.motion = {0.0, 0.0, 1.0, 0.0};
        auto f = moving_matrix_potential(cfg, 0, 0.0, g);
        int i = g.index_of(0.7);
        REQUIRE(f.w_off[i].real() == Approx(-c.matrix.W(g.x(i))));
        REQUIRE(f.w_off[i].imag() == Approx(0.0).margin(1e-14));
    }

    SECTION("generic phase matches the doubled Galilei phase by direct arithmetic") {
        // v=2, omega=1, gamma=0, t=1: theta(t,x) = 2*(x - 1 + 1) = 2x
        c.motion = {2.0, 0.0, 1.0, 0.0};
        double t = 1.0;
        int i = g.index_of(5.0);
        double x = g.x(i);
        double theta = theta_phase(c.motion, t, x);
        REQUIRE(theta == Approx(2.0 * (0.5 * 2.0 * x - 0.25 * 4.0 * t + 1.0 * t)));
        auto f = moving_matrix_potential(cfg, 0, t, g);
        cplx expect = -std::exp(iu * theta) * c.matrix.W(x - 2.0 * t);
        REQUIRE(std::abs(f.w_off[i] - expect) < 1e-14);
    }

    SECTION("trace is identically zero") {
        c.motion = {1.0, 2.0, 1.5, 0.3};
        auto f = moving_matrix_potential(cfg, 0, 0.8, g);
        // entries are [u, w_off; -conj(w_off)... trace = u + (-u) = 0 by storage
        for (int i = 0; i < g.n; i += 97) REQUIRE(std::isfinite(f.u[i]));
    }

    SECTION("decay window: |V| below 1e-8 outside |z| <= 25/gamma") {
        c.motion = {0.0, 0.0, 1.0, 0.0};
        auto f = moving_matrix_potential(cfg, 0, 0.0, g);
        for (int i = 0; i < g.n; ++i)
            if (std::abs(g.x(i)) > 25.0)
                REQUIRE(std::abs(f.u[i]) + std::abs(f.w_off[i]) < 1e-8);
    }
}
