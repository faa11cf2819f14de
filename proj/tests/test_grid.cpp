#include <catch2/catch_amalgamated.hpp>

#include "ctm/grid.hpp"

using namespace ctm;
using Catch::Approx;

namespace {

SpatialGrid small_grid() { return SpatialGrid(-50.0, 50.0, 1024); }

Field1 random_field(const SpatialGrid& g, uint64_t seed) {
    auto rng = make_rng(seed);
    Field1 f(g);
    for (int i = 0; i < g.n; ++i) f[i] = random_unit_cplx(rng);
    return f;
}

// L2 norm of k-samples with the dual measure dk
double norm_l2_k(const SpatialGrid& g, const std::vector<cplx>& fk) {
    double s = 0;
    for (const auto& z : fk) s += std::norm(z);
    return std::sqrt(s * g.dk());
}

}  // namespace

TEST_CASE("grid invariants") {
    SpatialGrid g = small_grid();
    REQUIRE(g.dx() == Approx(100.0 / 1024));
    REQUIRE(g.k(g.n / 2) == Approx(0.0));
    REQUIRE(g.k(0) == Approx(-g.k_max()));
    REQUIRE_THROWS_AS(SpatialGrid(-1.0, 1.0, 1000), ConfigError);  // not a power of two
    REQUIRE_THROWS_AS(SpatialGrid(1.0, -1.0, 1024), ConfigError);
}

TEST_CASE("dft of constant field concentrates at k=0 and satisfies Plancherel") {
    SpatialGrid g = small_grid();
    Field1 f(g);
    for (auto& z : f.v) z = 1.0;
    auto fk = dft(f);
    // all mass in the k=0 bin
    double total = 0, at0 = std::abs(fk[g.n / 2]);
    for (auto& z : fk.v) total += std::abs(z);
    REQUIRE(at0 / total > 1.0 - 1e-10);
    REQUIRE(norm_l2_k(g, fk.v) == Approx(norm_l2(f)).epsilon(1e-12));
}

TEST_CASE("dft of a Gaussian matches the closed-form pair") {
    // e^{-x^2/2} -> e^{-k^2/2} with unitary normalization
    SpatialGrid g = small_grid();
    Field1 f(g);
    for (int i = 0; i < g.n; ++i) f[i] = std::exp(-0.5 * g.x(i) * g.x(i));
    auto fk = dft(f);
    for (int j = 0; j < g.n; j += 37) {
        double k = g.k(j);
        if (std::abs(k) > 8.0) continue;
        REQUIRE(std::abs(fk[j] - cplx(std::exp(-0.5 * k * k))) < 1e-10);
    }
}

TEST_CASE("idft(dft(f)) is the identity to 1e-12 on random fields") {
    SpatialGrid g = small_grid();
    for (uint64_t seed = 0; seed < 100; ++seed) {
        Field1 f = random_field(g, seed);
        auto back = idft(dft(f));
        double err = 0;
        for (int i = 0; i < g.n; ++i) err = std::max(err, std::abs(back[i] - f[i]));
        REQUIRE(err < 1e-12 * norm_linf(f.v));
        REQUIRE(norm_l2_k(g, dft(f).v) == Approx(norm_l2(f)).epsilon(1e-12));
    }
}

TEST_CASE("weighted_norm") {
    SpatialGrid g = small_grid();

    SECTION("exponent 0 is the plain norm") {
        Field1 f = random_field(g, 3);
        REQUIRE(weighted_norm(f, 1.0, 2.0, 0.5, 0.0, 2) == Approx(norm_l2(f)));
        REQUIRE(weighted_norm(f, 1.0, 2.0, 0.5, 0.0, 1) == Approx(norm_l1(g, f.v)));
    }

    SECTION("bump at the moving center sees weight 1") {
        double v = 1.5, t = 2.0;
        Field1 f(g);
        int ic = g.index_of(3.0 + v * t);
        double y = g.x(ic) - v * t;  // center exactly on a node
        f[ic] = 1.0;                 // single-node bump at the center
        REQUIRE(weighted_norm(f, y, v, t, 1.0, 2) == Approx(norm_l2(f)).epsilon(1e-9));
    }

    SECTION("exponential profile against the quadrature oracle") {
        // int <x> e^{-|x|} dx computed by adaptive quadrature (split at the kink)
        SpatialGrid gf(-50.0, 50.0, 8192);
        Field1 f(gf);
        for (int i = 0; i < gf.n; ++i) f[i] = std::exp(-std::abs(gf.x(i)));
        double oracle = 2.0 * adaptive_simpson(
                                  [](double x) {
                                      return std::sqrt(1.0 + x * x) * std::exp(-std::abs(x));
                                  },
                                  0.0, 50.0, 1e-13);
        REQUIRE(weighted_norm(f, 0.0, 0.0, 0.0, 1.0, 1) == Approx(oracle).epsilon(1e-3));
    }
}

TEST_CASE("localization windows") {
    SpatialGrid g = small_grid();

    SECTION("single center covers everything") {
        auto w = localization_windows({{0.0, 0.0}}, 1.0, g);
        REQUIRE(w.size() == 1);
        for (int i = 0; i < g.n; ++i) REQUIRE(w[0][i] == 1.0);
    }

    SECTION("two centers split at the midpoint") {
        auto w = localization_windows({{10.0, 1.0}, {-10.0, -1.0}}, 0.0, g);
        for (int i = 0; i < g.n; ++i) {
            if (g.x(i) > 0.0)
                REQUIRE(w[0][i] == 1.0);
            else
                REQUIRE(w[1][i] == 1.0);
        }
    }

    SECTION("three centers, moving cuts match the midpoint formula") {
        std::vector<MovingCenter> c = {{12.0, 1.0}, {0.0, 0.0}, {-14.0, -0.5}};
        double t = 5.0;
        auto w = localization_windows(c, t, g);
        double cut01 = 0.5 * (12.0 + 0.0 + t * (1.0 + 0.0));
        double cut12 = 0.5 * (0.0 - 14.0 + t * (0.0 - 0.5));
        for (int i = 0; i < g.n; ++i) {
            double x = g.x(i);
            int expect = x > cut01 ? 0 : (x > cut12 ? 1 : 2);
            REQUIRE(w[expect][i] == 1.0);
        }
    }

    SECTION("partition of unity at every node for random times") {
        std::vector<MovingCenter> c = {{12.0, 1.0}, {0.0, 0.0}, {-14.0, -0.5}};
        for (double t : {0.0, 0.7, 3.3, 11.0}) {
            auto w = localization_windows(c, t, g);
            for (int i = 0; i < g.n; ++i) {
                double s = 0;
                for (const auto& wi : w) s += wi[i];
                REQUIRE(s == 1.0);
            }
        }
    }

    SECTION("unordered centers rejected") {
        REQUIRE_THROWS_AS(localization_windows({{-10.0, -1.0}, {10.0, 1.0}}, 0.0, g),
                          ConfigError);
    }
}

TEST_CASE("spectral H^n norm agrees with the multiplier definition") {
    SpatialGrid g = small_grid();
    Field1 f(g);
    for (int i = 0; i < g.n; ++i) f[i] = std::exp(-0.5 * g.x(i) * g.x(i));
    // H^1 of a unit Gaussian: ||<k> e^{-k^2/2}||_2 by quadrature
    double oracle = std::sqrt(adaptive_simpson(
        [](double k) { return (1.0 + k * k) * std::exp(-k * k); }, -20.0, 20.0, 1e-13));
    REQUIRE(norm_hn(f, 1) == Approx(oracle).epsilon(1e-8));
}
