#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "ctm/banded.hpp"
#include "ctm/grid.hpp"
#include "ctm/jost.hpp"
#include "ctm/numerics.hpp"
#include "ctm/potentials.hpp"

namespace ctm {

enum class ChainRole { Ordinary, Kernel, Generalized };

// One discrete mode of a center operator, tabulated on a fine symmetric
// grid around the center. Matrix modes carry two components; scalar modes
// use z1 only. Generalized modes store their chain image Y = H Z.
struct BoundState {
    cplx lambda;
    ChainRole role = ChainRole::Ordinary;
    double x0 = 0, h = 0;
    std::vector<cplx> z1, z2;
    std::vector<cplx> y1, y2;  // H Z for generalized modes
    double residual = 0;

    cplx z1_at(double x) const { return CubicInterp(x0, h, z1, 0.0)(x); }
    cplx z2_at(double x) const { return z2.empty() ? cplx(0) : CubicInterp(x0, h, z2, 0.0)(x); }
    cplx y1_at(double x) const { return y1.empty() ? cplx(0) : CubicInterp(x0, h, y1, 0.0)(x); }
    cplx y2_at(double x) const { return y2.empty() ? cplx(0) : CubicInterp(x0, h, y2, 0.0)(x); }
};

struct DiscreteSpectrum {
    std::vector<BoundState> states;
    int n_real_pairs = 0;       // N_l
    int n_imag_pairs = 0;       // M_l
    int dim_kernel = 0;         // K_{l,1}
    int dim_kernel_sq = 0;      // K_{l,2}
};

namespace detail {

inline double grid_norm(const std::vector<cplx>& v, double h) {
    double s = 0;
    for (auto& z : v) s += std::norm(z);
    return std::sqrt(s * h);
}

inline double grid_norm2(const std::vector<cplx>& a, const std::vector<cplx>& b, double h) {
    double s = 0;
    for (auto& z : a) s += std::norm(z);
    for (auto& z : b) s += std::norm(z);
    return std::sqrt(s * h);
}

// 5-point fourth-order second derivative, one-sided at the ends.
inline std::vector<cplx> second_derivative4(const std::vector<cplx>& f, double h) {
    const int n = int(f.size());
    std::vector<cplx> d(n, cplx(0));
    const double ih2 = 1.0 / (h * h);
    for (int i = 2; i + 2 < n; ++i)
        d[i] = (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2]) *
               (ih2 / 12.0);
    for (int i : {0, 1, n - 2, n - 1}) {
        int j = std::clamp(i, 2, n - 3);
        d[i] = (-f[j - 2] + 16.0 * f[j - 1] - 30.0 * f[j] + 16.0 * f[j + 1] - f[j + 2]) *
               (ih2 / 12.0);
    }
    return d;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// scalar operator H = -d^2/dx^2 + V

class ScalarOperator {
public:
    explicit ScalarOperator(const ScalarPotential& pot) : V_(pot) {}

    const ScalarPotential& potential() const { return V_; }

    // (H f)(x_i) on a uniform tabulation, fourth-order stencil
    std::vector<cplx> apply(const std::vector<cplx>& f, double x0, double h) const {
        auto d2 = detail::second_derivative4(f, h);
        std::vector<cplx> out(f.size());
        for (size_t i = 0; i < f.size(); ++i) out[i] = -d2[i] + V_(x0 + double(i) * h) * f[i];
        return out;
    }

private:
    ScalarPotential V_;
};

// Shooting refinement: integrate u'' = (V - lambda) u from both ends
// (decaying direction grows inward, so the march is stable) and match the
// Wronskian at x = 0.
class ScalarShooter {
public:
    ScalarShooter(const ScalarPotential& pot, double x_edge, double h = 0.003)
        : V_(pot), xe_(x_edge), h_(h) {}

    double mismatch(double lambda, std::vector<cplx>* left = nullptr,
                    std::vector<cplx>* right = nullptr) const {
        double kappa = std::sqrt(std::max(1e-12, -lambda));
        auto [ul, dul] = integrate(lambda, -xe_, 0.0, kappa, left);
        auto [ur, dur] = integrate(lambda, xe_, 0.0, -kappa, right);
        return (ul * dur - dul * ur).real();
    }

    // refined eigenvalue by secant iteration started at lambda0
    double refine(double lambda0, double step = 1e-4, int iters = 60) const {
        double a = lambda0 * (1.0 - step) - 1e-12, b = lambda0 * (1.0 + step) + 1e-12;
        double fa = mismatch(a), fb = mismatch(b);
        for (int it = 0; it < iters; ++it) {
            if (std::abs(fb - fa) < 1e-300) break;
            double c = b - fb * (b - a) / (fb - fa);
            a = b;
            fa = fb;
            b = c;
            fb = mismatch(b);
            if (std::abs(b - a) < 1e-12 * (1.0 + std::abs(b))) break;
        }
        return b;
    }

    BoundState eigenstate(double lambda) const {
        double kappa = std::sqrt(std::max(1e-12, -lambda));
        std::vector<cplx> left, right;
        auto [ul, dul] = integrate(lambda, -xe_, 0.0, kappa, &left);
        auto [ur, dur] = integrate(lambda, xe_, 0.0, -kappa, &right);
        // glue: left covers [-xe, 0], right covers [0, xe] (stored reversed).
        // Least-squares proportionality at the matching point stays stable
        // for odd eigenfunctions (u(0) = 0 there).
        cplx c = (ul * std::conj(ur) + dul * std::conj(dur)) /
                 (std::norm(ur) + std::norm(dur));
        int nl = int(left.size());
        BoundState bs;
        bs.lambda = lambda;
        bs.x0 = -xe_;
        bs.h = h_;
        bs.z1.reserve(2 * nl);
        for (int i = 0; i < nl; ++i) bs.z1.push_back(left[i]);
        for (int i = nl - 2; i >= 0; --i) bs.z1.push_back(c * right[i]);
        double nrm = detail::grid_norm(bs.z1, h_);
        for (auto& z : bs.z1) z /= nrm;
        // residual of the eigen equation on the tabulation
        ScalarOperator op(V_);
        auto hz = op.apply(bs.z1, bs.x0, bs.h);
        std::vector<cplx> res(hz.size());
        for (size_t i = 0; i < hz.size(); ++i) res[i] = hz[i] - lambda * bs.z1[i];
        bs.residual = detail::grid_norm(res, h_);
        return bs;
    }

private:
    // RK4 march of (u, u') from x=from with u = 1, u' = slope; records u
    // at every node when store != nullptr; returns (u, u') at `to`.
    std::pair<cplx, cplx> integrate(double lambda, double from, double to, double slope,
                                    std::vector<cplx>* store) const {
        int steps = int(std::ceil(std::abs(to - from) / h_));
        double h = (to - from) / steps;
        cplx u = 1.0, du = slope;
        if (store) store->push_back(u);
        auto rhs = [&](double x, cplx uu, cplx duu, cplx& ou, cplx& odu) {
            ou = duu;
            odu = (V_(x) - lambda) * uu;
        };
        double x = from;
        for (int s = 0; s < steps; ++s) {
            cplx k1u, k1d, k2u, k2d, k3u, k3d, k4u, k4d;
            rhs(x, u, du, k1u, k1d);
            rhs(x + h / 2, u + 0.5 * h * k1u, du + 0.5 * h * k1d, k2u, k2d);
            rhs(x + h / 2, u + 0.5 * h * k2u, du + 0.5 * h * k2d, k3u, k3d);
            rhs(x + h, u + h * k3u, du + h * k3d, k4u, k4d);
            u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            du += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
            x = from + (s + 1) * h;
            if (store) store->push_back(u);
        }
        return {u, du};
    }

    ScalarPotential V_;
    double xe_, h_;
};

// Discrete spectrum of the scalar operator: FD locate + shooting refine.
inline DiscreteSpectrum scalar_discrete_spectrum(const ScalarPotential& pot,
                                                 double residual_tol = 1e-6) {
    DiscreteSpectrum sp;
    if (pot.is_zero()) return sp;
    // locate on a coarse Dirichlet window
    const double Xl = 40.0;
    const int nl = 1600;
    const double h = 2.0 * Xl / (nl + 1);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(nl, nl);
    for (int i = 0; i < nl; ++i) {
        double x = -Xl + (i + 1) * h;
        H(i, i) = 2.0 / (h * h) + pot(x);
        if (i + 1 < nl) {
            H(i, i + 1) = -1.0 / (h * h);
            H(i + 1, i) = -1.0 / (h * h);
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    std::vector<double> candidates;
    for (int i = 0; i < nl; ++i) {
        double lam = es.eigenvalues()(i);
        if (lam < -1e-8) candidates.push_back(lam);
    }
    std::sort(candidates.begin(), candidates.end());
    for (double lam0 : candidates) {
        double kappa = std::sqrt(-lam0);
        double xe = std::min(300.0, std::max(30.0, 25.0 / kappa));
        ScalarShooter sh(pot, xe);
        double lam = sh.refine(lam0);
        if (lam >= 0) continue;  // drifted to threshold; not a bound state
        BoundState bs = sh.eigenstate(lam);
        if (bs.residual > residual_tol)
            throw NumericalError("scalar_discrete_spectrum: residual " +
                                 std::to_string(bs.residual) + " above tolerance");
        sp.states.push_back(std::move(bs));
    }
    return sp;
}

// ---------------------------------------------------------------------------
// matrix operator H = [A, -B; B, -A], A = -d^2+omega+U, B = W
//
// With p = u + w, q = u - w the eigenproblem splits into
//   (A+B) q = lambda p,  (A-B) p = lambda q
// so nonzero eigenvalues come from the real n x n problem
// (A+B)(A-B) p = lambda^2 p, and ker H decomposes as
// ker(A-B) (p-type, u = w) + ker(A+B) (q-type, u = -w).

class MatrixOperator {
public:
    MatrixOperator(const MatrixPotential& pot, double omega) : pot_(pot), omega_(omega) {}

    double omega() const { return omega_; }
    const MatrixPotential& potential() const { return pot_; }

    // apply H to a two-component tabulation (fourth order)
    void apply(const std::vector<cplx>& u, const std::vector<cplx>& w, double x0, double h,
               std::vector<cplx>& hu, std::vector<cplx>& hw) const {
        auto d2u = detail::second_derivative4(u, h);
        auto d2w = detail::second_derivative4(w, h);
        const int n = int(u.size());
        hu.resize(n);
        hw.resize(n);
        for (int i = 0; i < n; ++i) {
            double x = x0 + i * h;
            double U = pot_.U(x), W = pot_.W(x);
            hu[i] = -d2u[i] + (omega_ + U) * u[i] - W * w[i];
            hw[i] = d2w[i] - (omega_ + U) * w[i] + W * u[i];
        }
    }

private:
    MatrixPotential pot_;
    double omega_;
};

namespace detail {

// symmetric banded fourth-order FD assembly of -d^2 + c(x) on [-X, X],
// Dirichlet, n interior nodes
inline BandedMatrix<double> assemble_sym(const std::function<double(double)>& c, double X, int n,
                                         double shift = 0.0) {
    double h = 2.0 * X / (n + 1);
    BandedMatrix<double> A(n, 2);
    const double ih2 = 1.0 / (12.0 * h * h);
    for (int i = 0; i < n; ++i) {
        double x = -X + (i + 1) * h;
        // fourth-order -d^2: coefficients (1, -16, 30, -16, 1)/12h^2
        A.at(i, i) = 30.0 * ih2 + c(x) + shift;
        if (i + 1 < n) A.at(i, i + 1) = -16.0 * ih2;
        if (i >= 1) A.at(i, i - 1) = -16.0 * ih2;
        if (i + 2 < n) A.at(i, i + 2) = 1.0 * ih2;
        if (i >= 2) A.at(i, i - 2) = 1.0 * ih2;
    }
    return A;
}

inline void apply_sym(const std::function<double(double)>& c, double X, int n,
                      const std::vector<double>& v, std::vector<double>& out) {
    double h = 2.0 * X / (n + 1);
    const double ih2 = 1.0 / (12.0 * h * h);
    out.assign(n, 0.0);
    auto at = [&](int i) { return (i >= 0 && i < n) ? v[i] : 0.0; };
    for (int i = 0; i < n; ++i) {
        double x = -X + (i + 1) * h;
        out[i] = (-at(i - 2) + 16 * at(i - 1) + 16 * at(i + 1) - at(i + 2) - 30 * at(i)) * (-ih2) +
                 c(x) * v[i];
    }
}

// smallest-|eigenvalue| eigenpairs of the symmetric operator by
// shift-invert subspace iteration on the fine banded FD matrix
inline void smallest_sym_eigs(const std::function<double(double)>& c, double X, int n, int block,
                              std::vector<double>& vals, std::vector<std::vector<double>>& vecs,
                              uint64_t seed = 7) {
    auto A = assemble_sym(c, X, n, 1e-10);
    A.factor();
    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::vector<std::vector<double>> V(block, std::vector<double>(n));
    for (auto& v : V)
        for (auto& x : v) x = uni(rng);
    auto orthonormalize = [&](std::vector<std::vector<double>>& B) {
        for (size_t i = 0; i < B.size(); ++i) {
            for (size_t j = 0; j < i; ++j) {
                double d = 0;
                for (int t = 0; t < n; ++t) d += B[i][t] * B[j][t];
                for (int t = 0; t < n; ++t) B[i][t] -= d * B[j][t];
            }
            double nn = 0;
            for (int t = 0; t < n; ++t) nn += B[i][t] * B[i][t];
            nn = std::sqrt(nn);
            for (int t = 0; t < n; ++t) B[i][t] /= nn;
        }
    };
    orthonormalize(V);
    std::vector<double> tmp(n);
    for (int it = 0; it < 40; ++it) {
        for (auto& v : V) A.solve(v);
        orthonormalize(V);
    }
    // Rayleigh–Ritz
    Eigen::MatrixXd S(block, block);
    std::vector<std::vector<double>> AV(block, std::vector<double>(n));
    for (int i = 0; i < block; ++i) apply_sym(c, X, n, V[i], AV[i]);
    for (int i = 0; i < block; ++i)
        for (int j = 0; j < block; ++j) {
            double d = 0;
            for (int t = 0; t < n; ++t) d += V[i][t] * AV[j][t];
            S(i, j) = d;
        }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()));
    vals.clear();
    vecs.assign(block, std::vector<double>(n, 0.0));
    for (int e = 0; e < block; ++e) {
        vals.push_back(es.eigenvalues()(e));
        for (int t = 0; t < n; ++t) {
            double acc = 0;
            for (int i = 0; i < block; ++i) acc += V[i][t] * es.eigenvectors()(i, e);
            vecs[e][t] = acc;
        }
    }
}

}  // namespace detail

// full matrix discrete spectrum with kernel-chain extraction
inline DiscreteSpectrum matrix_discrete_spectrum(const MatrixPotential& pot, double omega,
                                                 double residual_tol = 1e-6,
                                                 double kernel_tol = 1e-7) {
    DiscreteSpectrum sp;
    const double gamma = std::min(pot.U.gamma, pot.W.gamma);
    const double X = std::min(120.0, std::max(35.0, 28.0 / gamma));
    auto apb = [&](double x) { return omega + pot.U(x) + pot.W(x); };  // A + B
    auto amb = [&](double x) { return omega + pot.U(x) - pot.W(x); };  // A - B

    // --- locate nonzero eigenvalues: (A+B)(A-B) p = lambda^2 p on a coarse grid
    const int nc = 700;
    {
        const double hc = 2.0 * X / (nc + 1);
        Eigen::MatrixXd Apb = Eigen::MatrixXd::Zero(nc, nc), Amb = Eigen::MatrixXd::Zero(nc, nc);
        for (int i = 0; i < nc; ++i) {
            double x = -X + (i + 1) * hc;
            double lap = 2.0 / (hc * hc);
            Apb(i, i) = lap + apb(x);
            Amb(i, i) = lap + amb(x);
            if (i + 1 < nc) {
                Apb(i, i + 1) = Apb(i + 1, i) = -1.0 / (hc * hc);
                Amb(i, i + 1) = Amb(i + 1, i) = -1.0 / (hc * hc);
            }
        }
        Eigen::MatrixXd M = Apb * Amb;
        Eigen::EigenSolver<Eigen::MatrixXd> es(M);

        // refine each candidate on the fine grid by Rayleigh iteration on H
        const int nf = 12000;
        const double hf = 2.0 * X / (nf + 1);
        // the generalized kernel splits into a cluster of size O(h) under FD;
        // that cluster belongs to the chain analysis below, not here
        const double cluster_floor = 0.08 * omega;
        std::vector<cplx> seen;
        for (int e = 0; e < nc; ++e) {
            cplx lam2 = es.eigenvalues()(e);
            cplx lam = std::sqrt(lam2);
            if (std::abs(lam) < cluster_floor) continue;
            // real discrete modes sit inside the spectral gap
            if (std::abs(lam.imag()) < 1e-6 && std::abs(lam) > omega - 1e-9) continue;
            if (std::abs(lam.real()) > 1e-6 && std::abs(lam.imag()) > 1e-6) {
                // quadruples are excluded by (H2); skip numerically ambiguous hits
                if (std::min(std::abs(lam.real()), std::abs(lam.imag())) >
                    0.05 * std::abs(lam))
                    continue;
                // snap to the dominant axis
                if (std::abs(lam.real()) > std::abs(lam.imag()))
                    lam = cplx(lam.real(), 0.0);
                else
                    lam = cplx(0.0, lam.imag());
            }
            if (lam.real() < -1e-9) lam = -lam;
            if (lam.real() < 1e-9 && lam.imag() < 0) lam = -lam;
            bool dup = false;
            for (auto& s : seen)
                if (std::abs(s - lam) < 1e-4 * (1.0 + std::abs(lam))) dup = true;
            if (dup) continue;
            // eigenvector must be localized (filters essential-spectrum grid modes)
            Eigen::VectorXcd pv = es.eigenvectors().col(e);
            double edge = 0, mid = 0;
            for (int i = 0; i < nc; ++i) {
                double a = std::abs(pv(i));
                if (i < nc / 20 || i > nc - nc / 20) edge = std::max(edge, a);
                mid = std::max(mid, a);
            }
            if (edge > 1e-5 * mid) continue;
            seen.push_back(lam);

            // Rayleigh-quotient iteration on the fine interleaved banded H
            auto refined = [&](cplx lam_in, std::vector<cplx>& u, std::vector<cplx>& w) {
                cplx mu = lam_in;
                const int N = 2 * nf;
                std::vector<cplx> v(N);
                auto rng = make_rng(11);
                // seed from the coarse eigenvector
                for (int i = 0; i < nf; ++i) {
                    double xc = (-X + (i + 1) * hf + X) / (2.0 * X) * (nc + 1) - 1.0;
                    int ic = std::clamp(int(xc), 0, nc - 1);
                    cplx p = pv(ic);
                    v[2 * i] = p;      // u ~ p (refined below)
                    v[2 * i + 1] = p;  // w
                }
                double res = 1e9;
                for (int it = 0; it < 8 && res > 1e-11; ++it) {
                    BandedMatrix<cplx> Hb(N, 5);
                    const double ih2 = 1.0 / (12.0 * hf * hf);
                    for (int i = 0; i < nf; ++i) {
                        double x = -X + (i + 1) * hf;
                        double U = pot.U(x), W = pot.W(x);
                        int r = 2 * i;
                        auto put = [&](int rr, int ii, cplx val) {
                            if (ii >= 0 && ii < nf) Hb.at(rr, 2 * ii) += val;
                        };
                        auto putw = [&](int rr, int ii, cplx val) {
                            if (ii >= 0 && ii < nf) Hb.at(rr, 2 * ii + 1) += val;
                        };
                        // row u: (-d^2 + omega + U) u - W w - mu u
                        put(r, i - 2, ih2);
                        put(r, i - 1, -16.0 * ih2);
                        put(r, i, 30.0 * ih2 + omega + U - mu);
                        put(r, i + 1, -16.0 * ih2);
                        put(r, i + 2, ih2);
                        putw(r, i, -W);
                        // row w: (d^2 - omega - U) w + W u - mu w
                        r = 2 * i + 1;
                        putw(r, i - 2, -ih2);
                        putw(r, i - 1, 16.0 * ih2);
                        putw(r, i, -30.0 * ih2 - omega - U - mu);
                        putw(r, i + 1, 16.0 * ih2);
                        putw(r, i + 2, -ih2);
                        put(r, i, W);
                    }
                    Hb.factor();
                    Hb.solve(v);
                    double nn = 0;
                    for (auto& z : v) nn += std::norm(z);
                    nn = std::sqrt(nn);
                    for (auto& z : v) z /= nn;
                    // Rayleigh quotient with the sigma3 pairing is not needed;
                    // plain quotient against H v suffices for refinement
                    std::vector<cplx> uu(nf), ww(nf), hu, hw;
                    for (int i = 0; i < nf; ++i) {
                        uu[i] = v[2 * i];
                        ww[i] = v[2 * i + 1];
                    }
                    MatrixOperator op(pot, omega);
                    op.apply(uu, ww, -X + hf, hf, hu, hw);
                    cplx num = 0, den = 0;
                    for (int i = 0; i < nf; ++i) {
                        num += std::conj(uu[i]) * hu[i] + std::conj(ww[i]) * hw[i];
                        den += std::norm(uu[i]) + std::norm(ww[i]);
                    }
                    cplx mu_new = num / den;
                    res = std::abs(mu_new - mu);
                    mu = mu_new;
                }
                u.resize(nf);
                w.resize(nf);
                for (int i = 0; i < nf; ++i) {
                    u[i] = v[2 * i];
                    w[i] = v[2 * i + 1];
                }
                return mu;
            };
            std::vector<cplx> u, w;
            cplx lam_ref = refined(lam + cplx(1e-7, 1e-7), u, w);
            if (std::abs(lam_ref) < cluster_floor) continue;  // fell into the cluster
            BoundState bs;
            bs.lambda = lam_ref;
            bs.x0 = -X + hf;
            bs.h = hf;
            bs.z1 = std::move(u);
            bs.z2 = std::move(w);
            double nn = detail::grid_norm2(bs.z1, bs.z2, hf);
            for (auto& z : bs.z1) z /= nn;
            for (auto& z : bs.z2) z /= nn;
            {
                MatrixOperator op(pot, omega);
                std::vector<cplx> hu, hw;
                op.apply(bs.z1, bs.z2, bs.x0, bs.h, hu, hw);
                std::vector<cplx> r1(nf), r2(nf);
                for (int i = 0; i < nf; ++i) {
                    r1[i] = hu[i] - bs.lambda * bs.z1[i];
                    r2[i] = hw[i] - bs.lambda * bs.z2[i];
                }
                bs.residual = detail::grid_norm2(r1, r2, hf);
            }
            if (bs.residual > residual_tol)
                throw NumericalError("matrix_discrete_spectrum: eigen residual " +
                                     std::to_string(bs.residual));
            sp.states.push_back(std::move(bs));
            // sigma_1 partner -lambda, Z -> sigma_1 Z
            BoundState neg = sp.states.back();
            neg.lambda = -sp.states.back().lambda;
            std::swap(neg.z1, neg.z2);
            sp.states.push_back(std::move(neg));
        }
    }

    // --- kernel and generalized kernel from the symmetric factors
    const int nk = 14000;
    const double hk = 2.0 * X / (nk + 1);
    auto add_chain = [&](const std::vector<double>& kernel_vec, bool p_type,
                         const std::function<double(double)>& partner_op,
                         const std::vector<std::vector<double>>& partner_kernel) {
        // kernel vector of H
        BoundState k0;
        k0.lambda = 0.0;
        k0.role = ChainRole::Kernel;
        k0.x0 = -X + hk;
        k0.h = hk;
        k0.z1.resize(nk);
        k0.z2.resize(nk);
        for (int i = 0; i < nk; ++i) {
            double val = 0.5 * kernel_vec[i];
            k0.z1[i] = val;
            k0.z2[i] = p_type ? val : -val;
        }
        double nn = detail::grid_norm2(k0.z1, k0.z2, hk);
        for (auto& z : k0.z1) z /= nn;
        for (auto& z : k0.z2) z /= nn;
        {
            MatrixOperator op(pot, omega);
            std::vector<cplx> hu, hw, r1(nk), r2(nk);
            op.apply(k0.z1, k0.z2, k0.x0, k0.h, hu, hw);
            for (int i = 0; i < nk; ++i) {
                r1[i] = hu[i];
                r2[i] = hw[i];
            }
            k0.residual = detail::grid_norm2(r1, r2, hk);
        }
        sp.states.push_back(k0);
        sp.dim_kernel += 1;
        sp.dim_kernel_sq += 1;

        // generalized partner: solve the complementary symmetric system.
        // p-type kernel (u = w, vector p0): (A+B) q = p0; solvable iff
        // p0 _|_ ker(A+B). q-type: (A-B) p = q0 analogously.
        std::vector<double> rhsv(kernel_vec.begin(), kernel_vec.end());
        // project out the partner kernel
        for (const auto& z : partner_kernel) {
            double d = 0, zz = 0;
            for (int i = 0; i < nk; ++i) {
                d += rhsv[i] * z[i];
                zz += z[i] * z[i];
            }
            if (d * d > 0.5 * zz * (1e-6)) return;  // not orthogonal: no chain
            for (int i = 0; i < nk; ++i) rhsv[i] -= (d / zz) * z[i];
        }
        auto A = detail::assemble_sym(partner_op, X, nk, 1e-9);
        A.factor();
        std::vector<double> q = rhsv;
        A.solve(q);
        for (const auto& z : partner_kernel) {  // deflate solver leakage
            double d = 0, zz = 0;
            for (int i = 0; i < nk; ++i) {
                d += q[i] * z[i];
                zz += z[i] * z[i];
            }
            for (int i = 0; i < nk; ++i) q[i] -= (d / zz) * z[i];
        }
        // verify the chain equation H Z1 = Z0
        BoundState k1;
        k1.lambda = 0.0;
        k1.role = ChainRole::Generalized;
        k1.x0 = -X + hk;
        k1.h = hk;
        k1.z1.resize(nk);
        k1.z2.resize(nk);
        for (int i = 0; i < nk; ++i) {
            double val = 0.5 * q[i];
            // partner has the opposite symmetry type
            k1.z1[i] = val;
            k1.z2[i] = p_type ? -val : val;
        }
        MatrixOperator op(pot, omega);
        std::vector<cplx> hu, hw;
        op.apply(k1.z1, k1.z2, k1.x0, k1.h, hu, hw);
        // normalize the chain so H Z1 equals the *normalized* Z0
        const BoundState& z0 = sp.states.back();
        cplx scale = 0;
        double den = 0;
        for (int i = 0; i < nk; ++i) {
            scale += std::conj(hu[i]) * z0.z1[i] + std::conj(hw[i]) * z0.z2[i];
            den += std::norm(hu[i]) + std::norm(hw[i]);
        }
        scale = std::conj(scale) / den;  // least-squares alpha with alpha*HZ1 ~ Z0
        double rel = 0, ref = 0;
        for (int i = 0; i < nk; ++i) {
            rel += std::norm(scale * hu[i] - z0.z1[i]) + std::norm(scale * hw[i] - z0.z2[i]);
            ref += std::norm(z0.z1[i]) + std::norm(z0.z2[i]);
        }
        if (std::sqrt(rel / ref) > 1e-4) return;  // no convergent chain
        for (int i = 0; i < nk; ++i) {
            k1.z1[i] *= scale;
            k1.z2[i] *= scale;
        }
        k1.y1.assign(z0.z1.begin(), z0.z1.end());
        k1.y2.assign(z0.z2.begin(), z0.z2.end());
        std::vector<cplx> r1(nk), r2(nk);
        for (int i = 0; i < nk; ++i) {
            r1[i] = scale * hu[i] - z0.z1[i];
            r2[i] = scale * hw[i] - z0.z2[i];
        }
        k1.residual = detail::grid_norm2(r1, r2, hk);
        sp.states.push_back(std::move(k1));
        sp.dim_kernel_sq += 1;
    };

    std::vector<double> vals_apb, vals_amb;
    std::vector<std::vector<double>> vecs_apb, vecs_amb;
    detail::smallest_sym_eigs(apb, X, nk, 4, vals_apb, vecs_apb, 17);
    detail::smallest_sym_eigs(amb, X, nk, 4, vals_amb, vecs_amb, 19);
    std::vector<std::vector<double>> ker_apb, ker_amb;
    for (size_t i = 0; i < vals_apb.size(); ++i)
        if (std::abs(vals_apb[i]) < kernel_tol) ker_apb.push_back(vecs_apb[i]);
    for (size_t i = 0; i < vals_amb.size(); ++i)
        if (std::abs(vals_amb[i]) < kernel_tol) ker_amb.push_back(vecs_amb[i]);
    // p-type kernel vectors come from ker(A-B); their generalized partners
    // solve the (A+B) system, and vice versa.
    for (const auto& p0 : ker_amb) add_chain(p0, true, apb, ker_apb);
    for (const auto& q0 : ker_apb) add_chain(q0, false, amb, ker_amb);

    // counts and the +-lambda symmetry check
    for (const auto& st : sp.states) {
        if (st.role != ChainRole::Ordinary) continue;
        if (std::abs(st.lambda.imag()) < 1e-6 && st.lambda.real() > 0) sp.n_real_pairs++;
        if (std::abs(st.lambda.real()) < 1e-6 && st.lambda.imag() > 0) sp.n_imag_pairs++;
    }
    for (const auto& st : sp.states) {
        if (st.role != ChainRole::Ordinary) continue;
        bool found = false;
        for (const auto& other : sp.states)
            if (other.role == ChainRole::Ordinary &&
                std::abs(other.lambda + st.lambda) < 1e-6 * (1.0 + std::abs(st.lambda)))
                found = true;
        if (!found)
            throw NumericalError("matrix_discrete_spectrum: spectrum not symmetric under "
                                 "lambda -> -lambda");
    }
    return sp;
}

}  // namespace ctm
