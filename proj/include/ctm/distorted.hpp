#pragma once

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "ctm/grid.hpp"
#include "ctm/jost.hpp"
#include "ctm/numerics.hpp"
#include "ctm/potentials.hpp"
#include "ctm/spectrum.hpp"

namespace ctm {

// ---------------------------------------------------------------------------
// Distorted bases, centered coordinates.
//
// Everything is driven by one Jost table f+(x, k) (normalized to e^{ikx} at
// +inf, per-channel decay built in for the matrix case):
//
//   scalar:  e(x,k) = s(k) f+(x,k)/sqrt(2pi)            (k > 0)
//            e(x,k) = s(-k) f+(-x,-k)/sqrt(2pi)         (k < 0)
//            Gtil(x,k) = f+(-x,-k)/sqrt(2pi)            (left-pure synthesis)
//            Ftil(x,k) = f+(x,k)/sqrt(2pi)              (right-pure synthesis)
//   matrix:  F(x,k) = s(k) f+(x,k),  G(x,k) = F(-x,-k)
//            Ghat/Fhat synthesize with f+(-x,-k) / f+(x,k) directly
//            (the 1/s normalization cancels, so no division ever happens).
//
// Tables are stored on the grid nodes inside |x| <= x_win; outside, the
// plane-wave asymptotics with r/s coefficients are used through masked FFTs.

namespace detail {

inline int reflect_index(int j, int n) { return (n - j) % n; }

// window node range symmetric about the grid midpoint (so x -> -x maps the
// window onto itself)
inline void symmetric_window(const SpatialGrid& g, double x_win, int& i_lo, int& i_hi) {
    int m = int(std::floor(x_win / g.dx()));
    m = std::min(m, g.n / 2 - 2);
    i_lo = g.n / 2 - m;
    i_hi = g.n / 2 + m;
}

inline void guard_transmission(const ScatteringData& rs, const std::vector<cplx>& coef,
                               const std::vector<int>& s_index) {
    double cmax = 0;
    for (const auto& z : coef) cmax = std::max(cmax, std::abs(z));
    if (cmax == 0) return;
    for (size_t j = 0; j < coef.size(); ++j)
        if (std::abs(coef[j]) > 1e-9 * cmax && std::abs(rs.s[s_index[j]]) < 1e-6)
            throw NumericalError("synthesis: |s(k)| < 1e-6 on the input support "
                                 "(threshold-resonance regime)");
}

}  // namespace detail

// --------------------------- scalar basis ----------------------------------

class ScalarBasis {
public:
    ScalarBasis(const ScalarPotential& pot, const SpatialGrid& g, int threads = 0)
        : grid_(g), V_(pot) {
        x_win_ = std::min(25.0 / pot.gamma, 40.0);
        detail::symmetric_window(g, x_win_, i_lo_, i_hi_);
        nwin_ = i_hi_ - i_lo_ + 1;
        build(threads);
        spectrum_ = scalar_discrete_spectrum(pot);
    }

    const SpatialGrid& grid() const { return grid_; }
    const ScatteringData& scattering() const { return rs_; }
    const DiscreteSpectrum& spectrum() const { return spectrum_; }
    const ScalarPotential& potential() const { return V_; }

    cplx r_at(int j) const { return rs_.r[j]; }
    cplx s_at(int j) const { return rs_.s[j]; }

    // e(x_i, k_j) anywhere on the grid
    cplx eigenfunction(int i, int j) const {
        const double inv = 1.0 / std::sqrt(2.0 * pi);
        double k = grid_.k(j);
        if (k >= 0) return rs_.s[j] * fplus(i, j) * inv;
        int jr = detail::reflect_index(j, grid_.n);
        return rs_.s[jr] * fplus_reflected(i, j) * inv;
    }

    // g(k) = <f, e(.,k)>
    std::vector<cplx> expand(const std::vector<cplx>& f) const {
        const int n = grid_.n;
        std::vector<cplx> fl(n, cplx(0)), fr(n, cplx(0));
        for (int i = 0; i < i_lo_; ++i) fl[i] = f[i];
        for (int i = i_hi_ + 1; i < n; ++i) fr[i] = f[i];
        auto dl = dft(grid_, fl);
        auto dr = dft(grid_, fr);
        std::vector<cplx> g(n, cplx(0));
        const double dx = grid_.dx();
        for (int j = 0; j < n; ++j) {
            int jr = detail::reflect_index(j, n);
            cplx win = 0;
            for (int iw = 0; iw < nwin_; ++iw)
                win += f[i_lo_ + iw] * std::conj(eigenfunction(i_lo_ + iw, j));
            win *= dx;
            cplx tail;
            if (grid_.k(j) >= 0) {
                // left: conj e = (e^{-ikx} + conj(r) e^{ikx})/sqrt(2pi)
                // right: conj e = conj(s) e^{-ikx}/sqrt(2pi)
                tail = dl[j] + std::conj(rs_.r[j]) * dl[jr] + std::conj(rs_.s[j]) * dr[j];
            } else {
                tail = std::conj(rs_.s[jr]) * dl[j] + dr[j] + std::conj(rs_.r[jr]) * dr[jr];
            }
            g[j] = win + tail;
        }
        return g;
    }

    // f(x) = \int e(x,k) g(k) dk
    std::vector<cplx> synthesize(const std::vector<cplx>& g) const {
        const int n = grid_.n;
        // tails via masked inverse transforms:
        //  k>0: left  e = (e^{ikx} + r e^{-ikx})/sqrt(2pi), right e = s e^{ikx}/..
        //  k<0: left  e = s(-k) e^{ikx}/.., right e = (e^{ikx} + r(-k) e^{-ikx})/..
        std::vector<cplx> hl(n, cplx(0)), hr(n, cplx(0));
        for (int j = 0; j < n; ++j) {
            int jr = detail::reflect_index(j, n);
            if (grid_.k(j) >= 0) {
                hl[j] += g[j];
                hl[jr] += rs_.r[j] * g[j];
                hr[j] += rs_.s[j] * g[j];
            } else {
                hl[j] += rs_.s[jr] * g[j];
                hr[j] += g[j];
                hr[jr] += rs_.r[jr] * g[j];
            }
        }
        auto ul = idft(grid_, hl);
        auto ur = idft(grid_, hr);
        std::vector<cplx> f(n, cplx(0));
        for (int i = 0; i < i_lo_; ++i) f[i] = ul[i];
        for (int i = i_hi_ + 1; i < n; ++i) f[i] = ur[i];
        const double dk = grid_.dk();
        for (int iw = 0; iw < nwin_; ++iw) {
            cplx acc = 0;
            for (int j = 0; j < n; ++j) acc += eigenfunction(i_lo_ + iw, j) * g[j];
            f[i_lo_ + iw] = acc * dk;
        }
        return f;
    }

    // left-pure synthesis  (Gtil-hat): kernel f+(-x,-k)/sqrt(2pi)
    std::vector<cplx> synth_left(const std::vector<cplx>& h) const { return synth_jost(h, true); }
    // right-pure synthesis (Ftil-hat): kernel f+(x,k)/sqrt(2pi)
    std::vector<cplx> synth_right(const std::vector<cplx>& h) const {
        return synth_jost(h, false);
    }

    // plain-l2 adjoint of synth_left (conjugate transpose of the discrete map)
    std::vector<cplx> synth_left_adjoint(const std::vector<cplx>& u) const {
        const int n = grid_.n;
        std::vector<cplx> ml(n, cplx(0)), mr(n, cplx(0));
        for (int i = 0; i < i_lo_; ++i) ml[i] = u[i];
        for (int i = i_hi_ + 1; i < n; ++i) mr[i] = u[i];
        const double ratio = grid_.dk() / grid_.dx();
        auto dl = dft(grid_, ml);
        auto dr = dft(grid_, mr);
        std::vector<cplx> h(n, cplx(0));
        const double scale = grid_.dk() / std::sqrt(2.0 * pi);
        for (int j = 0; j < n; ++j) {
            int jr = detail::reflect_index(j, n);
            cplx acc = 0;
            for (int iw = 0; iw < nwin_; ++iw)
                acc += std::conj(fplus_reflected(i_lo_ + iw, j)) * u[i_lo_ + iw];
            h[j] = acc * scale;
            h[j] += ratio * dl[j];
            h[j] += ratio * std::conj(1.0 / rs_.s[jr]) * dr[j];
            h[j] += ratio * std::conj(rs_.r[jr] / rs_.s[jr]) * dr[jr];
        }
        return h;
    }

    // inverses of the pure syntheses on Ran P_c via the expansion unmix:
    //   g_e(k) = <u, e(.,k)>,
    //   left:  h(k) = g_e(k) (k>0),  h(k) = s(-k) g_e(k) + r(-k) g_e(-k) (k<0)
    //   right: h(k) = g_e(k) (k<0),  h(k) = s(k) g_e(k) + r(k) g_e(-k)  (k>0)
    std::vector<cplx> invert_left(const std::vector<cplx>& u) const {
        auto ge = expand(u);
        const int n = grid_.n;
        std::vector<cplx> h(n);
        for (int j = 0; j < n; ++j) {
            int jr = detail::reflect_index(j, n);
            if (grid_.k(j) >= 0)
                h[j] = ge[j];
            else
                h[j] = rs_.s[jr] * ge[j] + rs_.r[jr] * ge[jr];
        }
        return h;
    }

    std::vector<cplx> invert_right(const std::vector<cplx>& u) const {
        auto ge = expand(u);
        const int n = grid_.n;
        std::vector<cplx> h(n);
        for (int j = 0; j < n; ++j) {
            int jr = detail::reflect_index(j, n);
            if (grid_.k(j) < 0)
                h[j] = ge[j];
            else
                h[j] = rs_.s[j] * ge[j] + rs_.r[j] * ge[jr];
        }
        return h;
    }

    // e^{-itH} restricted to the continuous subspace
    std::vector<cplx> flat_evolution(const std::vector<cplx>& f, double t) const {
        auto g = expand(f);
        for (int j = 0; j < grid_.n; ++j) {
            double k = grid_.k(j);
            g[j] *= std::exp(-iu * (k * k * t));
        }
        return synthesize(g);
    }

    // projection onto the continuous subspace (discrete modes removed)
    std::vector<cplx> project_continuous(const std::vector<cplx>& f) const {
        std::vector<cplx> out = f;
        const double dx = grid_.dx();
        for (const auto& st : spectrum_.states) {
            cplx a = 0;
            for (int i = 0; i < grid_.n; ++i) a += out[i] * std::conj(st.z1_at(grid_.x(i)));
            a *= dx;
            for (int i = 0; i < grid_.n; ++i) out[i] -= a * st.z1_at(grid_.x(i));
        }
        return out;
    }

private:
    cplx fplus(int i, int j) const {  // f+(x_i, k_j), window or asymptotics
        double k = grid_.k(j);
        if (i >= i_lo_ && i <= i_hi_) return table_[size_t(j) * nwin_ + (i - i_lo_)];
        double x = grid_.x(i);
        if (x > 0) return std::exp(iu * k * x);
        cplx s = rs_.s[j], r = rs_.r[j];
        return std::exp(iu * k * x) / s + (r / s) * std::exp(-iu * k * x);
    }

    cplx fplus_reflected(int i, int j) const {  // f+(-x_i, -k_j)
        int n = grid_.n;
        int ir = detail::reflect_index(i, n);
        int jr = detail::reflect_index(j, n);
        if (ir >= i_lo_ && ir <= i_hi_ && i != 0) return table_[size_t(jr) * nwin_ + (ir - i_lo_)];
        double x = -grid_.x(i);
        double k = -grid_.k(j);
        if (x > 0) return std::exp(iu * k * x);
        cplx s = rs_.s[jr], r = rs_.r[jr];
        return std::exp(iu * k * x) / s + (r / s) * std::exp(-iu * k * x);
    }

    std::vector<cplx> synth_jost(const std::vector<cplx>& h, bool left) const {
        const int n = grid_.n;
        {
            std::vector<int> sidx(n);
            for (int j = 0; j < n; ++j) sidx[j] = left ? detail::reflect_index(j, n) : j;
            detail::guard_transmission(rs_, h, sidx);
        }
        const double inv = 1.0 / std::sqrt(2.0 * pi);
        std::vector<cplx> f(n, cplx(0));
        const double dk = grid_.dk();
        for (int iw = 0; iw < nwin_; ++iw) {
            cplx acc = 0;
            int i = i_lo_ + iw;
            for (int j = 0; j < n; ++j)
                acc += (left ? fplus_reflected(i, j) : fplus(i, j)) * h[j];
            f[i] = acc * dk * inv;
        }
        // tails by masked inverse transforms of the asymptotic pieces
        std::vector<cplx> hl(n, cplx(0)), hr(n, cplx(0));
        for (int j = 0; j < n; ++j) {
            int jr = detail::reflect_index(j, n);
            if (left) {
                // f+(-x,-k): pure e^{ikx} for x < 0; for x > 0:
                // (1/s(-k)) e^{ikx} + (r(-k)/s(-k)) e^{-ikx}
                hl[j] += h[j];
                hr[j] += h[j] / rs_.s[jr];
                hr[jr] += (rs_.r[jr] / rs_.s[jr]) * h[j];
            } else {
                hr[j] += h[j];
                hl[j] += h[j] / rs_.s[j];
                hl[jr] += (rs_.r[j] / rs_.s[j]) * h[j];
            }
        }
        auto ul = idft(grid_, hl);
        auto ur = idft(grid_, hr);
        for (int i = 0; i < i_lo_; ++i) f[i] = ul[i];
        for (int i = i_hi_ + 1; i < n; ++i) f[i] = ur[i];
        return f;
    }

    void build(int threads) {
        const int n = grid_.n;
        std::vector<double> ks(n);
        for (int j = 0; j < n; ++j) ks[j] = grid_.k(j);
        rs_ = scattering_coefficients(V_, ks, 1e-5, threads);
        extrapolate_k0_column(rs_, n / 2);
        table_.resize(size_t(n) * nwin_);
        ScalarJostSolver solver(V_);
        // march on a refinement of the grid so window nodes are exact samples
        const double dx = grid_.dx();
        const int sub = std::max(1, int(std::ceil(dx / 0.004)));
        const int mhalf = (i_hi_ - grid_.n / 2);  // window = mhalf nodes each side
        const int mpad = mhalf + std::max(0, int(std::ceil((solver.x_max - x_win_) / dx)));
        const double x_edge = mpad * dx;
        const int steps = 2 * mpad * sub;
        parallel_for(
            n,
            [&](int j) {
                // the march is regular at k = 0; only r/s need the k_floor clamp
                auto tab = solver.f_plus_on(cplx(ks[j]), x_edge, steps);
                for (int iw = 0; iw < nwin_; ++iw) {
                    int idx = (iw + (mpad - mhalf)) * sub;
                    table_[size_t(j) * nwin_ + iw] = tab.f[idx];
                }
            },
            threads);
    }

    SpatialGrid grid_;
    ScalarPotential V_;
    ScatteringData rs_;
    DiscreteSpectrum spectrum_;
    double x_win_ = 0;
    int i_lo_ = 0, i_hi_ = 0, nwin_ = 0;
    std::vector<cplx> table_;
};

// --------------------------- matrix basis ----------------------------------

// Coefficient pair in k-space (the output of F*, G*).
struct CoeffPair {
    std::vector<cplx> c1, c2;
};

class MatrixBasis {
public:
    MatrixBasis(const MatrixPotential& pot, double omega, const SpatialGrid& g, int threads = 0)
        : grid_(g), pot_(pot), omega_(omega) {
        double gamma = std::min(pot.U.gamma, pot.W.gamma);
        x_win_ = std::min(25.0 / gamma, 40.0);
        detail::symmetric_window(g, x_win_, i_lo_, i_hi_);
        nwin_ = i_hi_ - i_lo_ + 1;
        build(threads);
        spectrum_ = matrix_discrete_spectrum(pot, omega);
    }

    const SpatialGrid& grid() const { return grid_; }
    const ScatteringData& scattering() const { return rs_; }
    const DiscreteSpectrum& spectrum() const { return spectrum_; }
    double omega() const { return omega_; }

    // Ghat: u(x) = (1/sqrt(2pi)) \int [ K(x,k) f1(k) + sigma1 K(x,k) f2(k) ] dk
    // with K(x,k) = f+(-x,-k) (left-pure, amplitude 1)
    Field2 synth_G(const CoeffPair& f) const { return synth(f, true); }
    // Fhat with K(x,k) = f+(x,k) (right-pure)
    Field2 synth_F(const CoeffPair& f) const { return synth(f, false); }

    // F*(u)(k) rows [F^t(x,-k); (sigma1 F(x,-k))^t] u, F = s f+
    CoeffPair forward_F_star(const Field2& u) const { return forward(u, false); }
    // G* with G(x,k) = F(-x,-k)
    CoeffPair forward_G_star(const Field2& u) const { return forward(u, true); }

    // plain-l2 adjoint of synth_G
    CoeffPair synth_G_adjoint(const Field2& u) const {
        const int n = grid_.n;
        std::vector<cplx> m1(n, cplx(0)), m2(n, cplx(0)), p1(n, cplx(0)), p2(n, cplx(0));
        for (int i = 0; i < i_lo_; ++i) {
            m1[i] = u.c1[i];
            m2[i] = u.c2[i];
        }
        for (int i = i_hi_ + 1; i < n; ++i) {
            p1[i] = u.c1[i];
            p2[i] = u.c2[i];
        }
        auto dl1 = dft(grid_, m1);
        auto dl2 = dft(grid_, m2);
        auto dr1 = dft(grid_, p1);
        auto dr2 = dft(grid_, p2);
        const double ratio = grid_.dk() / grid_.dx();
        const double scale = grid_.dk() / std::sqrt(2.0 * pi);
        CoeffPair out;
        out.c1.assign(n, cplx(0));
        out.c2.assign(n, cplx(0));
        for (int j = 0; j < n; ++j) {
            int jr = detail::reflect_index(j, n);
            cplx a1 = 0, a2 = 0;
            for (int iw = 0; iw < nwin_; ++iw) {
                int i = i_lo_ + iw;
                cplx k1 = std::conj(fp1_refl(i, j)), k2 = std::conj(fp2_refl(i, j));
                a1 += k1 * u.c1[i] + k2 * u.c2[i];
                a2 += k2 * u.c1[i] + k1 * u.c2[i];
            }
            out.c1[j] = a1 * scale + ratio * (dl1[j] + std::conj(1.0 / rs_.s[jr]) * dr1[j] +
                                              std::conj(rs_.r[jr] / rs_.s[jr]) * dr1[jr]);
            out.c2[j] = a2 * scale + ratio * (dl2[j] + std::conj(1.0 / rs_.s[jr]) * dr2[j] +
                                              std::conj(rs_.r[jr] / rs_.s[jr]) * dr2[jr]);
        }
        return out;
    }

    // inverse of synth_G on the essential subspace (Lemma-style identity
    // sigma3 F* sigma3 Ghat = Id)
    CoeffPair invert_G(const Field2& u) const {
        Field2 su = u;
        for (auto& z : su.c2) z = -z;
        CoeffPair c = forward_F_star(su);
        for (auto& z : c.c2) z = -z;
        return c;
    }

    CoeffPair invert_F(const Field2& u) const {
        Field2 su = u;
        for (auto& z : su.c2) z = -z;
        CoeffPair c = forward_G_star(su);
        for (auto& z : c.c2) z = -z;
        return c;
    }

    // e^{-itH} on the essential subspace: multiplier e^{-it(k^2+omega) sigma3}
    Field2 flat_evolution(const Field2& u, double t) const {
        CoeffPair c = invert_G(u);
        for (int j = 0; j < grid_.n; ++j) {
            double k = grid_.k(j);
            cplx ph = std::exp(-iu * ((k * k + omega_) * t));
            c.c1[j] *= ph;
            c.c2[j] /= ph;
        }
        return synth_G(c);
    }

private:
    cplx fp1(int i, int j) const {  // channel 1 of f+(x_i, k_j)
        if (i >= i_lo_ && i <= i_hi_) return t1_[size_t(j) * nwin_ + (i - i_lo_)];
        double x = grid_.x(i), k = grid_.k(j);
        double kk = std::abs(k) < k_floor ? (k < 0 ? -k_floor : k_floor) : k;
        if (x > 0) return std::exp(iu * kk * x);
        cplx s = rs_.s[j], r = rs_.r[j];
        return std::exp(iu * kk * x) / s + (r / s) * std::exp(-iu * kk * x);
    }
    cplx fp2(int i, int j) const {  // channel 2 (supported in the window)
        if (i >= i_lo_ && i <= i_hi_) return t2_[size_t(j) * nwin_ + (i - i_lo_)];
        return 0.0;
    }
    // f+(-x_i, -k_j)
    cplx fp1_refl(int i, int j) const {
        int n = grid_.n;
        int ir = detail::reflect_index(i, n), jr = detail::reflect_index(j, n);
        if (ir >= i_lo_ && ir <= i_hi_ && i != 0) return t1_[size_t(jr) * nwin_ + (ir - i_lo_)];
        double x = -grid_.x(i), k = -grid_.k(j);
        double kk = std::abs(k) < k_floor ? (k < 0 ? -k_floor : k_floor) : k;
        if (x > 0) return std::exp(iu * kk * x);
        cplx s = rs_.s[jr], r = rs_.r[jr];
        return std::exp(iu * kk * x) / s + (r / s) * std::exp(-iu * kk * x);
    }
    cplx fp2_refl(int i, int j) const {
        int n = grid_.n;
        int ir = detail::reflect_index(i, n), jr = detail::reflect_index(j, n);
        if (ir >= i_lo_ && ir <= i_hi_ && i != 0) return t2_[size_t(jr) * nwin_ + (ir - i_lo_)];
        return 0.0;
    }

    Field2 synth(const CoeffPair& f, bool left) const {
        const int n = grid_.n;
        {
            std::vector<int> sidx(n);
            for (int j = 0; j < n; ++j) sidx[j] = left ? detail::reflect_index(j, n) : j;
            detail::guard_transmission(rs_, f.c1, sidx);
            detail::guard_transmission(rs_, f.c2, sidx);
        }
        Field2 out(grid_);
        const double scale = grid_.dk() / std::sqrt(2.0 * pi);
        for (int iw = 0; iw < nwin_; ++iw) {
            int i = i_lo_ + iw;
            cplx a1 = 0, a2 = 0;
            for (int j = 0; j < n; ++j) {
                cplx k1 = left ? fp1_refl(i, j) : fp1(i, j);
                cplx k2 = left ? fp2_refl(i, j) : fp2(i, j);
                // kernel column [k1;k2] f1 + sigma1 [k1;k2] f2 = [k1 f1 + k2 f2;
                //                                                k2 f1 + k1 f2]
                a1 += k1 * f.c1[j] + k2 * f.c2[j];
                a2 += k2 * f.c1[j] + k1 * f.c2[j];
            }
            out.c1[i] = a1 * scale;
            out.c2[i] = a2 * scale;
        }
        // channel-1 tails (channel 2 decays inside the window)
        std::vector<cplx> hl1(n, cplx(0)), hr1(n, cplx(0)), hl2(n, cplx(0)), hr2(n, cplx(0));
        for (int j = 0; j < n; ++j) {
            int jr = detail::reflect_index(j, n);
            if (left) {
                hl1[j] += f.c1[j];
                hr1[j] += f.c1[j] / rs_.s[jr];
                hr1[jr] += (rs_.r[jr] / rs_.s[jr]) * f.c1[j];
                hl2[j] += f.c2[j];
                hr2[j] += f.c2[j] / rs_.s[jr];
                hr2[jr] += (rs_.r[jr] / rs_.s[jr]) * f.c2[j];
            } else {
                hr1[j] += f.c1[j];
                hl1[j] += f.c1[j] / rs_.s[j];
                hl1[jr] += (rs_.r[j] / rs_.s[j]) * f.c1[j];
                hr2[j] += f.c2[j];
                hl2[j] += f.c2[j] / rs_.s[j];
                hl2[jr] += (rs_.r[j] / rs_.s[j]) * f.c2[j];
            }
        }
        auto ul1 = idft(grid_, hl1);
        auto ur1 = idft(grid_, hr1);
        auto ul2 = idft(grid_, hl2);
        auto ur2 = idft(grid_, hr2);
        for (int i = 0; i < i_lo_; ++i) {
            out.c1[i] = ul1[i];
            out.c2[i] = ul2[i];
        }
        for (int i = i_hi_ + 1; i < n; ++i) {
            out.c1[i] = ur1[i];
            out.c2[i] = ur2[i];
        }
        return out;
    }

    CoeffPair forward(const Field2& u, bool gstar) const {
        // F*: rows s(-k) [f+^t(x,-k); (sigma1 f+(x,-k))^t]
        // G*: rows s(k)  [f+^t(-x,k); (sigma1 f+(-x,k))^t]
        const int n = grid_.n;
        CoeffPair out;
        out.c1.assign(n, cplx(0));
        out.c2.assign(n, cplx(0));
        std::vector<cplx> m1(n, cplx(0)), m2(n, cplx(0));  // masked tails, ch.1 only
        for (int i = 0; i < i_lo_; ++i) {
            m1[i] = u.c1[i];
            m2[i] = u.c2[i];
        }
        std::vector<cplx> p1(n, cplx(0)), p2(n, cplx(0));
        for (int i = i_hi_ + 1; i < n; ++i) {
            p1[i] = u.c1[i];
            p2[i] = u.c2[i];
        }
        auto dl1 = dft(grid_, m1);
        auto dl2 = dft(grid_, m2);
        auto dr1 = dft(grid_, p1);
        auto dr2 = dft(grid_, p2);
        const double dxs = grid_.dx() / std::sqrt(2.0 * pi);
        for (int j = 0; j < n; ++j) {
            int jr = detail::reflect_index(j, n);
            cplx a1 = 0, a2 = 0;
            for (int iw = 0; iw < nwin_; ++iw) {
                int i = i_lo_ + iw;
                cplx k1 = gstar ? fp1_refl(i, jr) : fp1(i, jr);  // f+(.., -k_j)
                cplx k2 = gstar ? fp2_refl(i, jr) : fp2(i, jr);
                a1 += k1 * u.c1[i] + k2 * u.c2[i];
                a2 += k2 * u.c1[i] + k1 * u.c2[i];
            }
            a1 *= dxs;
            a2 *= dxs;
            // tails: f+(x,-k) for x>0 is e^{-ikx}; for x<0 it is
            // (1/s(-k)) e^{-ikx} + (r(-k)/s(-k)) e^{ikx}  -- and reflected for G*
            cplx t1, t2;
            if (!gstar) {
                cplx sm = rs_.s[jr], rm = rs_.r[jr];
                t1 = dr1[j] + (dl1[j] + rm * dl1[jr]) / sm;
                t2 = dr2[j] + (dl2[j] + rm * dl2[jr]) / sm;
                out.c1[j] = rs_.s[jr] * (a1 + t1);
                out.c2[j] = rs_.s[jr] * (a2 + t2);
            } else {
                // f+(-x, k_j): for x<0 it is e^{ik_j (-x)} = e^{-ik_j x};
                // for x>0: (1/s) e^{-ikx} + (r/s) e^{ikx} at k = k_j
                cplx sp = rs_.s[j], rp = rs_.r[j];
                t1 = dl1[j] + (dr1[j] + rp * dr1[jr]) / sp;
                t2 = dl2[j] + (dr2[j] + rp * dr2[jr]) / sp;
                out.c1[j] = rs_.s[j] * (a1 + t1);
                out.c2[j] = rs_.s[j] * (a2 + t2);
            }
        }
        return out;
    }

    void build(int threads) {
        const int n = grid_.n;
        std::vector<double> ks(n);
        for (int j = 0; j < n; ++j) ks[j] = grid_.k(j);
        rs_ = matrix_scattering_coefficients(pot_, omega_, ks, threads);
        extrapolate_k0_column(rs_, n / 2);
        t1_.resize(size_t(n) * nwin_);
        t2_.resize(size_t(n) * nwin_);
        MatrixJostSolver solver(pot_, omega_);
        // node-aligned tabulation: window nodes are exact sample points
        const double dx = grid_.dx();
        const int sub = std::max(1, int(std::ceil(dx / 0.01)));
        const int mhalf = (i_hi_ - grid_.n / 2);
        const int mpad = mhalf + std::max(0, int(std::ceil((solver.x_max - x_win_) / dx)));
        const double x_edge = mpad * dx;
        const int nodes = 2 * mpad * sub + 1;
        parallel_for(
            n,
            [&](int j) {
                auto sol = solver.f_plus_on(ks[j], x_edge, nodes);
                for (int iw = 0; iw < nwin_; ++iw) {
                    int idx = (iw + (mpad - mhalf)) * sub;
                    t1_[size_t(j) * nwin_ + iw] = sol.f1[idx];
                    t2_[size_t(j) * nwin_ + iw] = sol.f2[idx];
                }
            },
            threads);
    }

    SpatialGrid grid_;
    MatrixPotential pot_;
    double omega_;
    ScatteringData rs_;
    DiscreteSpectrum spectrum_;
    double x_win_ = 0;
    int i_lo_ = 0, i_hi_ = 0, nwin_ = 0;
    std::vector<cplx> t1_, t2_;
};

}  // namespace ctm
