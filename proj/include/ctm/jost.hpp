#pragma once

#include <cmath>
#include <vector>

#include "ctm/grid.hpp"
#include "ctm/numerics.hpp"
#include "ctm/potentials.hpp"

namespace ctm {

// ---------------------------------------------------------------------------
// scalar Jost solutions of  -f'' + V f = k^2 f
//
// f_plus(x, k)  -> e^{ ikx} as x -> +inf
// f_minus(x, k) -> e^{-ikx} as x -> -inf
//
// Solved in modulated form f = e^{ikx} m(x) with m'' + 2ik m' = V m, marched
// by RK4 from the normalization end. The carrier phase is exact at every k,
// so accuracy is set by the modulation scale, not by k dx.

struct JostTabulation {
    double x0 = 0;  // first node
    double h = 0;   // step
    std::vector<cplx> f;   // f(x_i)
    std::vector<cplx> df;  // f'(x_i)

    cplx value(double x) const { return CubicInterp(x0, h, f, 0.0)(x); }
};

namespace detail {

// RK4 on u' = A(x) u for a 2-vector u = (m, m') with
// m'' = V m - 2ik m'  (i.e. A = [0 1; V -2ik]).
template <class VFun>
inline void march_modulated(const VFun& V, cplx k, double from, double to, int steps, cplx& m,
                            cplx& dm, std::vector<cplx>* store_f = nullptr,
                            std::vector<cplx>* store_df = nullptr, double carrier_sign = 1.0) {
    const double h = (to - from) / steps;
    auto rhs = [&](double x, cplx mm, cplx dmm, cplx& om, cplx& odm) {
        om = dmm;
        odm = V(x) * mm - 2.0 * iu * k * carrier_sign * dmm;
    };
    double x = from;
    auto record = [&](double xx, cplx mm, cplx dmm) {
        if (!store_f) return;
        cplx carrier = std::exp(iu * k * carrier_sign * xx);
        store_f->push_back(carrier * mm);
        if (store_df)
            store_df->push_back(carrier * (dmm + iu * k * carrier_sign * mm));
    };
    record(x, m, dm);
    for (int s = 0; s < steps; ++s) {
        cplx k1m, k1d, k2m, k2d, k3m, k3d, k4m, k4d;
        rhs(x, m, dm, k1m, k1d);
        rhs(x + h / 2, m + 0.5 * h * k1m, dm + 0.5 * h * k1d, k2m, k2d);
        rhs(x + h / 2, m + 0.5 * h * k2m, dm + 0.5 * h * k2d, k3m, k3d);
        rhs(x + h, m + h * k3m, dm + h * k3d, k4m, k4d);
        m += h / 6.0 * (k1m + 2.0 * k2m + 2.0 * k3m + k4m);
        dm += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
        x = from + (s + 1) * h;
        record(x, m, dm);
    }
}

}  // namespace detail

struct ScalarJostSolver {
    ScalarPotential V;
    double x_max;   // truncation |x| <= x_max (25 / gamma by default)
    double h;       // march step

    explicit ScalarJostSolver(const ScalarPotential& pot, double step = 0.004)
        : V(pot), x_max(25.0 / pot.gamma), h(step) {}

    // f_plus on the descending grid [x_edge -> -x_edge]; returned ascending.
    // Passing an explicit edge/step count lets callers align the tabulation
    // with an outer grid (exact node values, no interpolation).
    JostTabulation f_plus_on(cplx k, double x_edge, int steps) const {
        cplx m = 1.0, dm = 0.0;
        std::vector<cplx> f, df;
        f.reserve(steps + 1);
        df.reserve(steps + 1);
        detail::march_modulated([this](double x) { return cplx(V(x)); }, k, x_edge, -x_edge,
                                steps, m, dm, &f, &df, 1.0);
        std::reverse(f.begin(), f.end());
        std::reverse(df.begin(), df.end());
        JostTabulation t;
        t.x0 = -x_edge;
        t.h = 2.0 * x_edge / steps;
        t.f = std::move(f);
        t.df = std::move(df);
        return t;
    }

    JostTabulation f_plus(cplx k) const {
        return f_plus_on(k, x_max, int(std::ceil(2.0 * x_max / h)));
    }

    // f_minus = e^{-ikx} m with the march from -x_max upward.
    JostTabulation f_minus(cplx k) const {
        int steps = int(std::ceil(2.0 * x_max / h));
        cplx m = 1.0, dm = 0.0;
        std::vector<cplx> f, df;
        detail::march_modulated([this](double x) { return cplx(V(x)); }, k, -x_max, x_max, steps,
                                m, dm, &f, &df, -1.0);
        JostTabulation t;
        t.x0 = -x_max;
        t.h = 2.0 * x_max / steps;
        t.f = std::move(f);
        t.df = std::move(df);
        return t;
    }

    // endpoint values (f, f') without storing the whole table
    void f_plus_at_left(cplx k, cplx& f, cplx& df) const {
        int steps = int(std::ceil(2.0 * x_max / h));
        cplx m = 1.0, dm = 0.0;
        detail::march_modulated([this](double x) { return cplx(V(x)); }, k, x_max, -x_max, steps,
                                m, dm);
        cplx carrier = std::exp(iu * k * (-x_max));
        f = carrier * m;
        df = carrier * (dm + iu * k * m);
    }
};

// Wronskian f g' - f' g
inline cplx wronskian(cplx f, cplx df, cplx g, cplx dg) { return f * dg - df * g; }

// ---------------------------------------------------------------------------
// reflection / transmission
//
// With f_plus ~ (1/s) e^{ikx} + (r/s) e^{-ikx} as x -> -inf:
//   s(k) = -2ik / W(f_plus(.,k), f_minus(.,k))
//   r(k) = -W(f_plus(.,k), f_minus(.,-k)) / W(f_plus(.,k), f_minus(.,k))

struct ScatteringData {
    std::vector<double> k;
    std::vector<cplx> r;
    std::vector<cplx> s;
    double c0 = 0;  // sup (1+|k|)   (|r| + |1-s|)
    double c1 = 0;  // sup (1+|k|)^2 (|r'| + |s'|)
};

struct DecayCertificate {
    double c0 = 0;
    double c1 = 0;
};

inline DecayCertificate check_coefficient_decay(const ScatteringData& d) {
    DecayCertificate c;
    const int n = int(d.k.size());
    for (int i = 0; i < n; ++i) {
        double w = 1.0 + std::abs(d.k[i]);
        c.c0 = std::max(c.c0, w * (std::abs(d.r[i]) + std::abs(1.0 - d.s[i])));
        if (i > 0 && i + 1 < n) {
            double dk = d.k[i + 1] - d.k[i - 1];
            cplx dr = (d.r[i + 1] - d.r[i - 1]) / dk;
            cplx ds = (d.s[i + 1] - d.s[i - 1]) / dk;
            c.c1 = std::max(c.c1, w * w * (std::abs(dr) + std::abs(ds)));
        }
    }
    return c;
}

// k_floor keeps the formulas away from k = 0 (resonant thresholds are
// handled by the resonance detector instead).
inline constexpr double k_floor = 1e-3;

// r and s extend analytically through k = 0 (resonant or not); on a uniform
// symmetric grid the clamped k = 0 column is replaced by fourth-order
// extrapolation from the neighbors (the symmetric sums cancel the odd
// derivatives, the combination cancels f'').
inline void extrapolate_k0_column(ScatteringData& d, int j0) {
    if (j0 < 2 || j0 + 2 >= int(d.k.size())) return;
    auto even4 = [&](const std::vector<cplx>& v) {
        return (4.0 * (v[j0 + 1] + v[j0 - 1]) - (v[j0 + 2] + v[j0 - 2])) / 6.0;
    };
    d.r[j0] = even4(d.r);
    d.s[j0] = even4(d.s);
}

inline void scalar_rs_at(const ScalarJostSolver& solver, double k, cplx& r, cplx& s) {
    double kk = (std::abs(k) < k_floor) ? (k < 0 ? -k_floor : k_floor) : k;
    cplx fp, dfp;
    solver.f_plus_at_left(kk, fp, dfp);
    // free Jost solutions at the left end are exact plane waves
    double xl = -solver.x_max;
    cplx em = std::exp(-iu * kk * xl), dem = -iu * kk * em;  // f_minus(x,k)
    cplx ep = std::exp(iu * kk * xl), dep = iu * kk * ep;    // f_minus(x,-k)
    // V may not vanish identically at the edge; the residual error is
    // O(e^{-gamma x_max}) and absorbed in the certificate tolerances.
    cplx wpm = wronskian(fp, dfp, em, dem);
    cplx wpp = wronskian(fp, dfp, ep, dep);
    s = -2.0 * iu * kk / wpm;
    r = -wpp / wpm;
}

inline ScatteringData scattering_coefficients(const ScalarPotential& V,
                                              const std::vector<double>& kgrid,
                                              double unitarity_tol = 1e-6, int threads = 0) {
    ScalarJostSolver solver(V);
    ScatteringData d;
    d.k = kgrid;
    d.r.resize(kgrid.size());
    d.s.resize(kgrid.size());
    parallel_for(int(kgrid.size()),
                 [&](int i) { scalar_rs_at(solver, kgrid[i], d.r[i], d.s[i]); }, threads);
    for (size_t i = 0; i < kgrid.size(); ++i) {
        double u = std::norm(d.r[i]) + std::norm(d.s[i]);
        if (std::abs(u - 1.0) > unitarity_tol)
            throw NumericalError("scattering_coefficients: unitarity failure at k=" +
                                 std::to_string(kgrid[i]) + " (|r|^2+|s|^2-1 = " +
                                 std::to_string(u - 1.0) + "); increase x_max or refine");
    }
    auto cert = check_coefficient_decay(d);
    d.c0 = cert.c0;
    d.c1 = cert.c1;
    return d;
}

// closed forms for the Poschl-Teller depth-1 well, used as oracles
inline cplx poschl_teller1_transmission(double k) { return (k + iu) / (k - iu); }
inline cplx poschl_teller1_jost_plus(double x, double k) {
    return std::exp(iu * k * x) * (iu * k - std::tanh(x)) / (iu * k - 1.0);
}

// ---------------------------------------------------------------------------
// threshold resonance detection (scalar): the zero-energy Jost solutions
// from both ends are matched; a vanishing Wronskian means a globally bounded
// zero-energy solution, i.e. a threshold resonance.

struct ResonanceReport {
    bool resonant = false;
    double wronskian_abs = 0;
};

inline ResonanceReport detect_threshold_resonance(const ScalarPotential& V,
                                                  double threshold = 1e-4) {
    ScalarJostSolver solver(V);
    auto fp = solver.f_plus(cplx(0.0));
    auto fm = solver.f_minus(cplx(0.0));
    int mid = int(fp.f.size() / 2);
    cplx w = wronskian(fp.f[mid], fp.df[mid], fm.f[mid], fm.df[mid]);
    ResonanceReport rep;
    rep.wronskian_abs = std::abs(w);
    rep.resonant = rep.wronskian_abs < threshold;
    return rep;
}

// ---------------------------------------------------------------------------
// matrix Jost solution
//
// H F = (k^2 + omega) F for H = [-d^2+omega+U, -W; W, d^2-omega-U] reads
// componentwise
//   F1'' = (U - k^2) F1 - W F2
//   F2'' = (kappa^2 + U) F2 - W F1,   kappa^2 = k^2 + 2 omega.
// The second channel has an exponential dichotomy, so the Jost solution
// normalized to e^{ikx} [1;0] at +inf with decay in channel 2 at both ends
// is computed by one banded two-point solve per k (second order in h,
// Richardson-extrapolated to fourth).

struct MatrixJostSolution {
    double x0 = 0, h = 0;
    std::vector<cplx> f1, f2;

    cplx c1_at(double x) const { return CubicInterp(x0, h, f1, 0.0)(x); }
    cplx c2_at(double x) const { return CubicInterp(x0, h, f2, 0.0)(x); }
};

namespace detail {

// One banded two-point solve for the Jost solution.
//
// Channel 1 is solved in modulated form f1 = e^{ikx} m1 so accuracy is set
// by the potential scale for every k:
//   m1'' + 2ik m1' - U m1 + W e^{-ikx} f2 = 0
//   f2'' - (kappa^2 + U) f2 + W e^{ikx} m1 = 0
// Boundary rows: m1(X) = m1(X-h) = 1 (Jost normalization; exact up to the
// potential tail) and decay Robin rows for f2 at both ends. Channel-1 ODE
// rows at nodes 1..n-2 occupy the row slots of nodes 0..n-3 so the two
// normalization rows stay on the diagonal; the band stays |i-j| <= 4.
inline void matrix_jost_banded(const MatrixPotential& pot, double omega, double k, double X,
                               int nodes, std::vector<cplx>& f1, std::vector<cplx>& f2) {
    const int n = nodes;
    const double h = 2.0 * X / (n - 1);
    const double kappa = std::sqrt(k * k + 2.0 * omega);
    const int N = 2 * n;
    const int bw = 4;
    std::vector<std::array<cplx, 9>> band(N);
    for (auto& row : band) row.fill(cplx(0));
    std::vector<cplx> rhs(N, cplx(0));

    auto x_of = [&](int i) { return -X + i * h; };
    auto I1 = [&](int i) { return 2 * i; };
    auto I2 = [&](int i) { return 2 * i + 1; };
    auto set = [&](int r, int c, cplx v) { band[r][c - r + bw] = v; };

    const double ih2 = 1.0 / (h * h);
    const cplx ik = iu * k;
    for (int i = 1; i + 1 < n; ++i) {
        double x = x_of(i);
        double U = pot.U(x), W = pot.W(x);
        // channel-1 ODE at node i, stored in row slot I1(i-1)
        int r = I1(i - 1);
        set(r, I1(i - 1), ih2 - ik / h);
        set(r, I1(i), -2.0 * ih2 - U);
        set(r, I1(i + 1), ih2 + ik / h);
        set(r, I2(i), W * std::exp(-ik * x));
        // channel-2 ODE at node i, row slot I2(i)
        r = I2(i);
        set(r, I2(i - 1), ih2);
        set(r, I2(i), -2.0 * ih2 - (kappa * kappa + U));
        set(r, I2(i + 1), ih2);
        set(r, I1(i), W * std::exp(ik * x));
    }
    // channel-1 normalization rows (diagonal slots of nodes n-2, n-1)
    set(I1(n - 2), I1(n - 2), 1.0);
    rhs[I1(n - 2)] = 1.0;
    set(I1(n - 1), I1(n - 1), 1.0);
    rhs[I1(n - 1)] = 1.0;
    // channel-2 decay at both ends; the amplitude there is O(e^{-kappa X}),
    // so the first-order Robin rows cost nothing
    set(I2(n - 1), I2(n - 1), 1.0 / h + kappa);
    set(I2(n - 1), I2(n - 2), -1.0 / h);
    set(I2(0), I2(0), 1.0 / h + kappa);
    set(I2(0), I2(1), -1.0 / h);

    // banded LU without pivoting
    for (int i = 0; i < N; ++i) {
        cplx piv = band[i][bw];
        if (std::abs(piv) < 1e-300) throw NumericalError("matrix_jost: singular banded system");
        for (int r = i + 1; r <= std::min(N - 1, i + bw); ++r) {
            cplx factor = band[r][i - r + bw] / piv;
            if (factor == cplx(0)) continue;
            band[r][i - r + bw] = cplx(0);
            for (int c = i + 1; c <= std::min(N - 1, i + bw); ++c)
                band[r][c - r + bw] -= factor * band[i][c - i + bw];
            rhs[r] -= factor * rhs[i];
        }
    }
    for (int i = N - 1; i >= 0; --i) {
        cplx acc = rhs[i];
        for (int c = i + 1; c <= std::min(N - 1, i + bw); ++c)
            acc -= band[i][c - i + bw] * rhs[c];
        rhs[i] = acc / band[i][bw];
    }

    f1.resize(n);
    f2.resize(n);
    for (int i = 0; i < n; ++i) {
        f1[i] = rhs[I1(i)] * std::exp(ik * x_of(i));  // restore the carrier
        f2[i] = rhs[I2(i)];
    }
}

}  // namespace detail

struct MatrixJostSolver {
    MatrixPotential pot;
    double omega;
    double x_max;
    double h;

    MatrixJostSolver(const MatrixPotential& p, double om, double step = 0.01)
        : pot(p), omega(om), h(step) {
        x_max = 25.0 / std::min(pot.U.gamma, pot.W.gamma);
    }

    // Jost solution normalized to e^{ikx} [1; 0] at +x_edge, tabulated on
    // `nodes` points (Richardson pair in the step)
    MatrixJostSolution f_plus_on(double k, double x_edge, int nodes) const {
        int n = nodes;
        MatrixJostSolution out;
        std::vector<cplx> a1, a2, b1, b2;
        detail::matrix_jost_banded(pot, omega, k, x_edge, n, a1, a2);
        detail::matrix_jost_banded(pot, omega, k, x_edge, 2 * n - 1, b1, b2);
        out.x0 = -x_edge;
        out.h = 2.0 * x_edge / (n - 1);
        out.f1.resize(n);
        out.f2.resize(n);
        for (int i = 0; i < n; ++i) {  // Richardson: (4 fine - coarse) / 3
            out.f1[i] = (4.0 * b1[2 * i] - a1[i]) / 3.0;
            out.f2[i] = (4.0 * b2[2 * i] - a2[i]) / 3.0;
        }
        return out;
    }

    MatrixJostSolution f_plus(double k) const {
        int n = int(std::ceil(2.0 * x_max / h)) + 1;
        if (n % 2 == 0) ++n;
        return f_plus_on(k, x_max, n);
    }
};

// r, s extracted from f_plus channel 1 near the left end where
// f1 = (1/s) e^{ikx} + (r/s) e^{-ikx}: value and derivative at one node
// determine both coefficients (det = -2ik, well conditioned down to
// k_floor). The derivative comes from a 4th-order stencil on the slow
// modulation m1 = f1 e^{-ikx}.
inline void matrix_rs_from_jost(const MatrixJostSolution& j, double k, cplx& r, cplx& s) {
    const int i0 = 4;
    const double x = j.x0 + i0 * j.h;
    auto m_at = [&](int i) { return j.f1[i] * std::exp(-iu * k * (j.x0 + i * j.h)); };
    cplx m = m_at(i0);
    cplx dm = (-m_at(i0 + 2) + 8.0 * m_at(i0 + 1) - 8.0 * m_at(i0 - 1) + m_at(i0 - 2)) /
              (12.0 * j.h);
    cplx f = std::exp(iu * k * x) * m;
    cplx df = std::exp(iu * k * x) * (dm + iu * k * m);
    // a e^{ikx} + b e^{-ikx} = f, ik a e^{ikx} - ik b e^{-ikx} = df
    cplx ep = std::exp(iu * k * x), em = std::exp(-iu * k * x);
    cplx a = 0.5 * (f + df / (iu * k)) / ep;
    cplx b = 0.5 * (f - df / (iu * k)) / em;
    s = 1.0 / a;
    r = b * s;
}

inline ScatteringData matrix_scattering_coefficients(const MatrixPotential& pot, double omega,
                                                     const std::vector<double>& kgrid,
                                                     int threads = 0) {
    MatrixJostSolver solver(pot, omega);
    ScatteringData d;
    d.k = kgrid;
    d.r.resize(kgrid.size());
    d.s.resize(kgrid.size());
    parallel_for(int(kgrid.size()),
                 [&](int i) {
                     double kk = (std::abs(kgrid[i]) < k_floor)
                                     ? (kgrid[i] < 0 ? -k_floor : k_floor)
                                     : kgrid[i];
                     auto j = solver.f_plus(kk);
                     matrix_rs_from_jost(j, kk, d.r[i], d.s[i]);
                 },
                 threads);
    auto cert = check_coefficient_decay(d);
    d.c0 = cert.c0;
    d.c1 = cert.c1;
    return d;
}

// matrix threshold resonance at +omega (by sigma_1-symmetry also -omega):
// conserved pairing w = sum_c (f_c g_c' - f_c' g_c) between the
// channel-1-bounded, channel-2-decaying solutions from the two ends.
inline ResonanceReport detect_matrix_threshold_resonance(const MatrixPotential& pot, double omega,
                                                         double threshold = 1e-4) {
    MatrixJostSolver solver(pot, omega);
    auto jr = solver.f_plus(k_floor * 1e-1);  // from +inf, k ~ 0
    // by evenness the from-left solution is the reflection
    int n = int(jr.f1.size());
    int mid = n / 2;
    auto d1 = [&](const std::vector<cplx>& f, int i) { return (f[i + 1] - f[i - 1]) / (2 * jr.h); };
    // g(x) = f(-x): g'(x) = -f'(-x); node -x of mid is mid (symmetric grid)
    cplx f1 = jr.f1[mid], df1 = d1(jr.f1, mid);
    cplx f2 = jr.f2[mid], df2 = d1(jr.f2, mid);
    cplx g1 = jr.f1[mid], dg1 = -df1;
    cplx g2 = jr.f2[mid], dg2 = -df2;
    cplx w = (f1 * dg1 - df1 * g1) + (f2 * dg2 - df2 * g2);
    ResonanceReport rep;
    rep.wronskian_abs = std::abs(w);
    rep.resonant = rep.wronskian_abs < threshold;
    return rep;
}

}  // namespace ctm
