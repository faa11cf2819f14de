#pragma once

#include <cmath>
#include <vector>

#include "ctm/fft.hpp"
#include "ctm/numerics.hpp"

namespace ctm {

// Uniform periodic grid on [x_min, x_max), n a power of two. The dual grid
// carries k_j = 2*pi*j/(x_max-x_min) for j in {-n/2, ..., n/2-1}, stored in
// ascending order.
struct SpatialGrid {
    double x_min = 0;
    double x_max = 0;
    int n = 0;

    SpatialGrid() = default;
    SpatialGrid(double a, double b, int npts) : x_min(a), x_max(b), n(npts) {
        if (b <= a) throw ConfigError("SpatialGrid: x_max must exceed x_min");
        if (npts < 4 || (npts & (npts - 1)) != 0)
            throw ConfigError("SpatialGrid: n must be a power of two >= 4");
    }

    double width() const { return x_max - x_min; }
    double dx() const { return width() / n; }
    double dk() const { return 2.0 * pi / width(); }
    double x(int i) const { return x_min + i * dx(); }
    double k(int j) const { return dk() * (j - n / 2); }
    double k_max() const { return dk() * (n / 2); }

    // nearest node index, clamped
    int index_of(double xq) const {
        int i = int(std::lround((xq - x_min) / dx()));
        return std::max(0, std::min(n - 1, i));
    }

    bool operator==(const SpatialGrid& o) const {
        return x_min == o.x_min && x_max == o.x_max && n == o.n;
    }
    bool operator!=(const SpatialGrid& o) const { return !(*this == o); }
};

// One complex sample per node.
struct Field1 {
    SpatialGrid grid;
    std::vector<cplx> v;

    Field1() = default;
    explicit Field1(const SpatialGrid& g) : grid(g), v(g.n, cplx(0)) {}
    Field1(const SpatialGrid& g, std::vector<cplx> data) : grid(g), v(std::move(data)) {
        if (int(v.size()) != g.n) throw ConfigError("Field1: sample count != grid size");
    }

    int size() const { return grid.n; }
    cplx& operator[](int i) { return v[i]; }
    const cplx& operator[](int i) const { return v[i]; }
};

// Two-component field (matrix model): components psi1, psi2.
struct Field2 {
    SpatialGrid grid;
    std::vector<cplx> c1, c2;

    Field2() = default;
    explicit Field2(const SpatialGrid& g) : grid(g), c1(g.n, cplx(0)), c2(g.n, cplx(0)) {}

    int size() const { return grid.n; }
};

inline void check_same_grid(const SpatialGrid& a, const SpatialGrid& b) {
    if (a != b) throw ConfigError("grid mismatch");
}

// ---------------------------------------------------------------------------
// discrete Fourier transform, normalized as (1/sqrt(2*pi)) \int f e^{-ikx} dx

inline std::vector<cplx> dft(const SpatialGrid& g, const std::vector<cplx>& f) {
    const int n = g.n;
    std::vector<cplx> in(n), out(n);
    for (int i = 0; i < n; ++i) in[i] = (i & 1) ? -f[i] : f[i];
    FftEngine::instance().forward(in.data(), out.data(), n);
    const double scale = g.dx() / std::sqrt(2.0 * pi);
    for (int j = 0; j < n; ++j) out[j] *= scale * std::exp(-iu * (g.k(j) * g.x_min));
    return out;
}

inline std::vector<cplx> idft(const SpatialGrid& g, const std::vector<cplx>& fk) {
    const int n = g.n;
    std::vector<cplx> in(n), out(n);
    for (int j = 0; j < n; ++j) in[j] = fk[j] * std::exp(iu * (g.k(j) * g.x_min));
    FftEngine::instance().backward(in.data(), out.data(), n);
    const double scale = g.dk() / std::sqrt(2.0 * pi);
    for (int i = 0; i < n; ++i) out[i] *= (i & 1) ? -scale : scale;
    return out;
}

inline Field1 dft(const Field1& f) { return Field1(f.grid, dft(f.grid, f.v)); }
inline Field1 idft(const Field1& f) { return Field1(f.grid, idft(f.grid, f.v)); }

// ---------------------------------------------------------------------------
// norms

inline double norm_l2(const SpatialGrid& g, const std::vector<cplx>& f) {
    double s = 0;
    for (const auto& z : f) s += std::norm(z);
    return std::sqrt(s * g.dx());
}

inline double norm_l2(const Field1& f) { return norm_l2(f.grid, f.v); }

inline double norm_l2(const Field2& f) {
    double s = 0;
    for (const auto& z : f.c1) s += std::norm(z);
    for (const auto& z : f.c2) s += std::norm(z);
    return std::sqrt(s * f.grid.dx());
}

inline double norm_l1(const SpatialGrid& g, const std::vector<cplx>& f) {
    double s = 0;
    for (const auto& z : f) s += std::abs(z);
    return s * g.dx();
}

inline double norm_linf(const std::vector<cplx>& f) {
    double s = 0;
    for (const auto& z : f) s = std::max(s, std::abs(z));
    return s;
}

// || <x - y - v t>^a f ||_p with p in {1, 2, inf}; a >= 0.
inline double weighted_norm(const Field1& f, double center, double velocity, double t,
                            double exponent, double p) {
    if (exponent < 0) throw ConfigError("weighted_norm: exponent must be >= 0");
    const SpatialGrid& g = f.grid;
    double acc = 0;
    for (int i = 0; i < g.n; ++i) {
        double z = g.x(i) - center - velocity * t;
        double w = std::pow(std::sqrt(1.0 + z * z), exponent);
        double m = w * std::abs(f[i]);
        if (p == 1)
            acc += m;
        else if (p == 2)
            acc += m * m;
        else
            acc = std::max(acc, m);
    }
    if (p == 1) return acc * g.dx();
    if (p == 2) return std::sqrt(acc * g.dx());
    if (std::isinf(p)) return acc;
    throw ConfigError("weighted_norm: p must be 1, 2 or inf");
}

// H^n norm computed spectrally, n in {0,1,2}.
inline double norm_hn(const Field1& f, int order) {
    auto fk = dft(f.grid, f.v);
    double s = 0;
    for (int j = 0; j < f.grid.n; ++j) {
        double k2 = 1.0 + f.grid.k(j) * f.grid.k(j);
        s += std::pow(k2, order) * std::norm(fk[j]);
    }
    return std::sqrt(s * f.grid.dk());
}

inline double norm_hn(const Field2& f, int order) {
    Field1 a(f.grid, f.c1), b(f.grid, f.c2);
    double na = norm_hn(a, order), nb = norm_hn(b, order);
    return std::sqrt(na * na + nb * nb);
}

// ---------------------------------------------------------------------------
// localization windows (sharp indicators at grid resolution)

struct MovingCenter {
    double y = 0;  // initial position
    double v = 0;  // velocity
};

// Sharp indicator partition per the moving midpoints
// c_l(t) = (y_l + y_{l+1} + t (v_l + v_{l+1})) / 2; window 1 is the
// rightmost (x > c_1), window m the leftmost. Sum over windows is exactly 1
// at every node.
inline std::vector<std::vector<double>> localization_windows(const std::vector<MovingCenter>& c,
                                                             double t, const SpatialGrid& g) {
    const int m = int(c.size());
    if (m == 0) throw ConfigError("localization_windows: no centers");
    for (int l = 0; l + 1 < m; ++l)
        if (!(c[l].v > c[l + 1].v) || !(c[l].y > c[l + 1].y))
            throw ConfigError("localization_windows: centers must be strictly ordered");
    std::vector<double> cuts(m - 1);
    for (int l = 0; l + 1 < m; ++l)
        cuts[l] = 0.5 * (c[l].y + c[l + 1].y + t * (c[l].v + c[l + 1].v));
    std::vector<std::vector<double>> w(m, std::vector<double>(g.n, 0.0));
    for (int i = 0; i < g.n; ++i) {
        double x = g.x(i);
        int l = 0;
        while (l < m - 1 && x <= cuts[l]) ++l;
        w[l][i] = 1.0;
    }
    return w;
}

}  // namespace ctm
