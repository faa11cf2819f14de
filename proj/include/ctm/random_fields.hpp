#pragma once

#include "ctm/grid.hpp"
#include "ctm/numerics.hpp"

namespace ctm {

// Smooth band-limited k-profile: a few random plane-wave components under a
// Gaussian envelope. Smoothness in k keeps the x-side localized, so grid
// truncation costs nothing.
inline std::vector<cplx> random_band_limited(const SpatialGrid& g, double k_band, double x_spread,
                                             uint64_t seed) {
    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> ushift(-x_spread, x_spread);
    const int lumps = 12;
    std::vector<cplx> amp(lumps);
    std::vector<double> xi(lumps);
    for (int l = 0; l < lumps; ++l) {
        amp[l] = random_unit_cplx(rng);
        xi[l] = ushift(rng);
    }
    std::vector<cplx> f(g.n, cplx(0));
    const double w = k_band / 2.5;
    for (int j = 0; j < g.n; ++j) {
        double k = g.k(j);
        cplx acc = 0;
        for (int l = 0; l < lumps; ++l) acc += amp[l] * std::exp(iu * (k * xi[l]));
        f[j] = acc * std::exp(-k * k / (w * w));
    }
    return f;
}

// random smooth localized x-space field
inline Field1 random_smooth_field(const SpatialGrid& g, double k_band, double x_spread,
                                  uint64_t seed) {
    return Field1(g, idft(g, random_band_limited(g, k_band, x_spread, seed)));
}

inline Field2 random_smooth_field2(const SpatialGrid& g, double k_band, double x_spread,
                                   uint64_t seed) {
    Field2 f(g);
    f.c1 = idft(g, random_band_limited(g, k_band, x_spread, seed * 2 + 1));
    f.c2 = idft(g, random_band_limited(g, k_band, x_spread, seed * 2 + 2));
    return f;
}

}  // namespace ctm
