#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "ctm/grid.hpp"
#include "ctm/numerics.hpp"

namespace ctm {

// ---------------------------------------------------------------------------
// scalar potential families
//
//   zero
//   poschl_teller(depth n):      V(x) = -n(n+1) sech^2(x)
//   gaussian(amplitude, width):  V(x) = a exp(-x^2 / (2 sigma^2))
//   sech_square(amplitude,rate): V(x) = a sech^2(rate x)
//   sampled(x[], v[], gamma):    even table with declared decay rate
//
// All families are even by construction; sampled tables are validated on read.

struct ScalarPotential {
    enum class Family { Zero, PoschlTeller, Gaussian, SechSquare, Sampled };

    Family family = Family::Zero;
    double a = 0;      // amplitude (gaussian, sech_square)
    double b = 1;      // width (gaussian) or rate (sech_square)
    int depth = 1;     // poschl_teller
    double gamma = 1;  // certified exponential decay rate, in (0, 1]

    std::shared_ptr<CubicInterp> table;  // sampled family
    double table_xmax = 0;

    static ScalarPotential zero() { return ScalarPotential{}; }

    static ScalarPotential poschl_teller(int n) {
        ScalarPotential p;
        p.family = Family::PoschlTeller;
        p.depth = n;
        p.gamma = 1.0;
        if (n < 1) throw ConfigError("poschl_teller: depth must be >= 1");
        return p;
    }

    static ScalarPotential gaussian(double amplitude, double width) {
        ScalarPotential p;
        p.family = Family::Gaussian;
        p.a = amplitude;
        p.b = width;
        p.gamma = 1.0;
        if (width <= 0) throw ConfigError("gaussian: width must be positive");
        return p;
    }

    static ScalarPotential sech_square(double amplitude, double rate) {
        ScalarPotential p;
        p.family = Family::SechSquare;
        p.a = amplitude;
        p.b = rate;
        p.gamma = std::min(1.0, 2.0 * rate);
        if (rate <= 0) throw ConfigError("sech_square: rate must be positive");
        return p;
    }

    static ScalarPotential sampled(const std::vector<double>& xs, const std::vector<double>& vs,
                                   double gamma_decl) {
        if (xs.size() != vs.size() || xs.size() < 8) throw ConfigError("sampled: bad table");
        double h = xs[1] - xs[0];
        for (size_t i = 1; i < xs.size(); ++i)
            if (std::abs(xs[i] - xs[i - 1] - h) > 1e-9 * std::abs(h))
                throw ConfigError("sampled: table must be uniform");
        if (gamma_decl <= 0 || gamma_decl > 1) throw ConfigError("sampled: gamma in (0,1]");
        std::vector<cplx> cv(vs.begin(), vs.end());
        ScalarPotential p;
        p.family = Family::Sampled;
        p.gamma = gamma_decl;
        p.table = std::make_shared<CubicInterp>(xs.front(), h, cv, 0.0);
        p.table_xmax = std::max(std::abs(xs.front()), std::abs(xs.back()));
        // evenness and decay validated on the table itself
        for (size_t i = 0; i < xs.size(); ++i) {
            double mirrored = (*p.table)(-xs[i]).real();
            if (std::abs(mirrored - vs[i]) > 1e-6 * (1.0 + std::abs(vs[i])))
                throw ConfigError("sampled: table is not even");
        }
        p.decay_certificate();
        return p;
    }

    bool is_zero() const { return family == Family::Zero; }

    double operator()(double x) const {
        switch (family) {
            case Family::Zero:
                return 0.0;
            case Family::PoschlTeller: {
                double s = 1.0 / std::cosh(x);
                return -double(depth * (depth + 1)) * s * s;
            }
            case Family::Gaussian:
                return a * std::exp(-x * x / (2.0 * b * b));
            case Family::SechSquare: {
                double s = 1.0 / std::cosh(b * x);
                return a * s * s;
            }
            case Family::Sampled:
                return (*table)(x).real();
        }
        return 0.0;
    }

    // sup over |x| <= 40 of |V(x)| e^{gamma |x|}. The claimed rate is
    // rejected when the envelope keeps growing over the outer half of the
    // range (the tail decays slower than e^{-gamma |x|}).
    double decay_certificate() const {
        const double xcap = (family == Family::Sampled) ? std::min(40.0, table_xmax) : 40.0;
        double c = 0, inner = 0, outer = 0;
        for (double x = 0; x <= xcap; x += 0.05) {
            double e = std::abs((*this)(x)) * std::exp(gamma * x);
            c = std::max(c, e);
            (x < 0.5 * xcap ? inner : outer) = std::max(x < 0.5 * xcap ? inner : outer, e);
        }
        if (outer > 50.0 * std::max(inner, 1e-12))
            throw ConfigError("potential violates the declared decay rate");
        return c;
    }
};

// matrix potential V = [U, -W; W, -U] entering H = H_{0,omega} + V
struct MatrixPotential {
    ScalarPotential U;
    ScalarPotential W;
};

struct TravelingCenter {
    double v = 0;            // velocity
    double y = 0;            // initial position
    double omega = 1;        // internal frequency (> 0, matrix model)
    double gamma_phase = 0;  // phase offset
};

enum class ModelKind { Scalar, Matrix };

struct Center {
    ScalarPotential scalar;  // scalar model
    MatrixPotential matrix;  // matrix model
    TravelingCenter motion;
};

struct ChargeTransferConfig {
    ModelKind model = ModelKind::Scalar;
    std::vector<Center> centers;
    SpatialGrid grid{-200.0, 200.0, 4096};

    int m() const { return int(centers.size()); }

    void validate() const {
        if (centers.empty()) throw ConfigError("config: no centers");
        for (int l = 0; l + 1 < m(); ++l) {
            if (!(centers[l].motion.v > centers[l + 1].motion.v))
                throw ConfigError("config: velocities must satisfy v_1 > v_2 > ... > v_m");
            if (!(centers[l].motion.y > centers[l + 1].motion.y))
                throw ConfigError("config: positions must satisfy y_1 > y_2 > ... > y_m");
        }
        for (const auto& c : centers)
            if (model == ModelKind::Matrix && c.motion.omega <= 0)
                throw ConfigError("config: omega must be positive");
    }

    double min_separation() const {
        double s = std::numeric_limits<double>::infinity();
        for (int l = 0; l + 1 < m(); ++l)
            s = std::min(s, centers[l].motion.y - centers[l + 1].motion.y);
        return s;
    }

    double min_velocity_gap() const {
        double s = std::numeric_limits<double>::infinity();
        for (int l = 0; l + 1 < m(); ++l)
            s = std::min(s, centers[l].motion.v - centers[l + 1].motion.v);
        return s;
    }

    std::vector<MovingCenter> moving_centers() const {
        std::vector<MovingCenter> mc;
        for (const auto& c : centers) mc.push_back({c.motion.y, c.motion.v});
        return mc;
    }
};

// ---------------------------------------------------------------------------
// sampling

inline Field1 sample_potential(const ScalarPotential& p, const SpatialGrid& g) {
    Field1 f(g);
    for (int i = 0; i < g.n; ++i) f[i] = p(g.x(i));
    return f;
}

// Galilei phase carried by traveling modes and the dispersive map:
//   Phi_l(t, x) = v x / 2 - v^2 t / 4 + omega t + gamma.
// The potential-internal relative phase between the two components is
// theta_l = 2 Phi_l, which is what makes boosted eigenfunctions exact
// single-center solutions.
inline double galilei_phase(const TravelingCenter& c, double t, double x) {
    return 0.5 * c.v * x - 0.25 * c.v * c.v * t + c.omega * t + c.gamma_phase;
}

inline double theta_phase(const TravelingCenter& c, double t, double x) {
    return 2.0 * galilei_phase(c, t, x);
}

// 2x2 matrix field of center l at time t: entries
//   [ U(z), -e^{i theta} W(z); e^{-i theta} W(z), -U(z) ],  z = x - v t - y.
struct MatrixPotentialField {
    std::vector<double> u;    // diagonal entry U(z)
    std::vector<cplx> w_off;  // upper-right entry -e^{i theta} W
};

inline MatrixPotentialField moving_matrix_potential(const ChargeTransferConfig& cfg, int l,
                                                    double t, const SpatialGrid& g) {
    if (l < 0 || l >= cfg.m()) throw ConfigError("moving_matrix_potential: center index");
    const Center& c = cfg.centers[l];
    MatrixPotentialField out;
    out.u.resize(g.n);
    out.w_off.resize(g.n);
    for (int i = 0; i < g.n; ++i) {
        double x = g.x(i);
        double z = x - c.motion.v * t - c.motion.y;
        double th = theta_phase(c.motion, t, x);
        out.u[i] = c.matrix.U(z);
        out.w_off[i] = -std::exp(iu * th) * c.matrix.W(z);
    }
    return out;
}

inline Field1 moving_scalar_potential(const ChargeTransferConfig& cfg, double t,
                                      const SpatialGrid& g) {
    Field1 f(g);
    for (int i = 0; i < g.n; ++i) {
        double x = g.x(i);
        double s = 0;
        for (const auto& c : cfg.centers) s += c.scalar(x - c.motion.v * t - c.motion.y);
        f[i] = s;
    }
    return f;
}

}  // namespace ctm
