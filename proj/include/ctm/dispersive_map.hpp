#pragma once

#include <array>
#include <map>
#include <memory>
#include <tuple>

#include "ctm/distorted.hpp"
#include "ctm/grid.hpp"
#include "ctm/potentials.hpp"

namespace ctm {

// ---------------------------------------------------------------------------
// Resampling of k-profiles at sign * k + shift. Profiles here are localized
// on the conjugate axis (the x side), so shifts are done spectrally: exact
// for every admissible profile, with a unitary-clean adjoint. Reflection is
// the exact index involution of the symmetric grid.

class Resampler {
public:
    Resampler(const SpatialGrid& g, double sign, double shift)
        : reflect_(sign < 0), shift_(shift) {
        // grid with the k-axis in the "spatial" role
        conj_ = SpatialGrid(g.k(0), g.k(0) + g.n * g.dk(), g.n);
    }

    // out(k) = v(sign k + shift)
    std::vector<cplx> forward(const std::vector<cplx>& v) const {
        if (!reflect_) return axis_shift(v, -shift_);
        return axis_shift(reflect(v), shift_);
    }

    std::vector<cplx> adjoint(const std::vector<cplx>& u) const {
        if (!reflect_) return axis_shift(u, shift_);
        return reflect(axis_shift(u, -shift_));
    }

private:
    std::vector<cplx> reflect(const std::vector<cplx>& v) const {
        const int n = conj_.n;
        std::vector<cplx> out(n);
        for (int j = 0; j < n; ++j) out[j] = v[(n - j) % n];
        return out;
    }

    // w(k) = v(k - d) by the exact spectral shift on the k-axis
    std::vector<cplx> axis_shift(const std::vector<cplx>& v, double d) const {
        auto hat = dft(conj_, v);
        for (int j = 0; j < conj_.n; ++j) hat[j] *= std::exp(-iu * (conj_.k(j) * d));
        return idft(conj_, hat);
    }

    bool reflect_;
    double shift_;
    SpatialGrid conj_;
};

inline std::vector<cplx> spectral_shift(const SpatialGrid& g, const std::vector<cplx>& v,
                                        double d) {
    auto hat = dft(g, v);
    for (int j = 0; j < g.n; ++j) hat[j] *= std::exp(-iu * (g.k(j) * d));
    return idft(g, hat);
}

// ---------------------------------------------------------------------------
// profiles

// Recursively corrected profiles. The gamma-phase gauge is folded into the
// stored sequences (phases reappear only in the outer boost factors), so the
// recursion is identical in both rows up to the sign of the velocity shift.
struct PhiProfile {
    ModelKind model = ModelKind::Scalar;
    std::vector<std::vector<cplx>> phi1;  // per center; scalar uses phi1 only
    std::vector<std::vector<cplx>> phi2;
    std::vector<cplx> phibar1, phibar2;   // sum over the first m-1 profiles
};

struct ModeCoefficient {
    int center = 0;
    int index = 0;
    ChainRole kind = ChainRole::Ordinary;
    cplx a;
};

struct Decomposition {
    std::vector<cplx> phi1, phi2;  // recovered base profile
    PhiProfile profile;
    std::vector<ModeCoefficient> modes;
    double residual_rel = 0;
    int iterations = 0;
};

struct CoercivityRow {
    int order = 0;          // Sobolev order n
    double ratio_min = 0;   // min over the ensemble of max_l ||<k>^n phi_l|| / ||S(phi)(0)||_{H^n}
    double ratio_max = 0;
    double inverse_min = 0;  // reciprocal ratios
    double inverse_max = 0;
};

// ---------------------------------------------------------------------------

class DispersiveMap {
public:
    explicit DispersiveMap(const ChargeTransferConfig& cfg, int threads = 0)
        : cfg_(cfg), grid_(cfg.grid) {
        cfg_.validate();
        build_bases(threads);
        build_tables();
    }

    const ChargeTransferConfig& config() const { return cfg_; }
    const SpatialGrid& grid() const { return grid_; }
    const ScalarBasis& scalar_basis(int l) const { return *sbases_[l]; }
    const MatrixBasis& matrix_basis(int l) const { return *mbases_[l]; }

    int mode_count() const { return int(mode_index_.size()); }
    std::pair<int, int> mode_id(int col) const { return mode_index_[col]; }
    const BoundState& mode_state(int col) const {
        auto [l, s] = mode_index_[col];
        return (cfg_.model == ModelKind::Scalar ? sbases_[l]->spectrum() : mbases_[l]->spectrum())
            .states[s];
    }

    // ------------------------------------------------------------------ profiles

    PhiProfile build_profile(const std::vector<cplx>& p1,
                             const std::vector<cplx>& p2 = {}) const {
        PhiProfile pr;
        pr.model = cfg_.model;
        const int m = cfg_.m();
        pr.phi1.resize(m);
        pr.phi1[0] = p1;
        if (cfg_.model == ModelKind::Matrix) {
            pr.phi2.resize(m);
            pr.phi2[0] = p2.empty() ? std::vector<cplx>(grid_.n, cplx(0)) : p2;
        }
        for (int l = 0; l + 1 < m; ++l) {
            pr.phi1[l + 1] = recur_forward(l, pr.phi1[l], false);
            if (cfg_.model == ModelKind::Matrix)
                pr.phi2[l + 1] = recur_forward(l, pr.phi2[l], true);
        }
        pr.phibar1.assign(grid_.n, cplx(0));
        if (cfg_.model == ModelKind::Matrix) pr.phibar2.assign(grid_.n, cplx(0));
        for (int l = 0; l + 1 < m; ++l) {
            // the gauge reappears only in the matrix model (the scalar model
            // carries no internal phase)
            double gph = cfg_.model == ModelKind::Matrix ? cfg_.centers[l].motion.gamma_phase
                                                         : 0.0;
            for (int j = 0; j < grid_.n; ++j) {
                pr.phibar1[j] += std::exp(iu * gph) * pr.phi1[l][j];
                if (cfg_.model == ModelKind::Matrix)
                    pr.phibar2[j] += std::exp(-iu * gph) * pr.phi2[l][j];
            }
        }
        return pr;
    }

    // ------------------------------------------------------------------ evaluation

    Field1 evaluate_scalar(const PhiProfile& pr, double t) const {
        require_scalar();
        Field1 out(grid_);
        for (int l = 0; l < cfg_.m(); ++l) {
            auto h = center_argument(pr.phi1[l], l, t, false);
            auto w = sbases_[l]->synth_left(h);
            w = spectral_shift(grid_, w, cfg_.centers[l].motion.y + cfg_.centers[l].motion.v * t);
            const double v = cfg_.centers[l].motion.v;
            for (int i = 0; i < grid_.n; ++i) {
                double ph = 0.5 * v * grid_.x(i) - 0.25 * v * v * t;
                out[i] += std::exp(iu * ph) * w[i];
            }
        }
        // free counter-term
        std::vector<cplx> hat(grid_.n);
        for (int j = 0; j < grid_.n; ++j) {
            double k = grid_.k(j);
            hat[j] = std::exp(-iu * (t * k * k)) * pr.phibar1[j];
        }
        auto free_part = idft(grid_, hat);
        for (int i = 0; i < grid_.n; ++i) out[i] -= free_part[i];
        return out;
    }

    Field2 evaluate_matrix(const PhiProfile& pr, double t) const {
        require_matrix();
        Field2 out(grid_);
        for (int l = 0; l < cfg_.m(); ++l) {
            const auto& mc = cfg_.centers[l].motion;
            CoeffPair h;
            h.c1 = center_argument(pr.phi1[l], l, t, false);
            h.c2 = center_argument(pr.phi2[l], l, t, true);
            Field2 w = mbases_[l]->synth_G(h);
            w.c1 = spectral_shift(grid_, w.c1, mc.y + mc.v * t);
            w.c2 = spectral_shift(grid_, w.c2, mc.y + mc.v * t);
            for (int i = 0; i < grid_.n; ++i) {
                double ph = galilei_phase(mc, t, grid_.x(i));
                out.c1[i] += std::exp(iu * ph) * w.c1[i];
                out.c2[i] += std::exp(-iu * ph) * w.c2[i];
            }
        }
        std::vector<cplx> hat1(grid_.n), hat2(grid_.n);
        for (int j = 0; j < grid_.n; ++j) {
            double k2 = grid_.k(j) * grid_.k(j);
            hat1[j] = std::exp(-iu * (t * k2)) * pr.phibar1[j];
            hat2[j] = std::exp(iu * (t * k2)) * pr.phibar2[j];
        }
        auto f1 = idft(grid_, hat1);
        auto f2 = idft(grid_, hat2);
        for (int i = 0; i < grid_.n; ++i) {
            out.c1[i] -= f1[i];
            out.c2[i] -= f2[i];
        }
        return out;
    }

    // traveling discrete mode as a grid field
    Field1 mode_field_scalar(int col, double t) const {
        require_scalar();
        auto [l, s] = mode_index_[col];
        const auto& st = sbases_[l]->spectrum().states[s];
        const auto& mc = cfg_.centers[l].motion;
        Field1 f(grid_);
        for (int i = 0; i < grid_.n; ++i) {
            double x = grid_.x(i);
            double ph = 0.5 * mc.v * x - 0.25 * mc.v * mc.v * t;
            f[i] = std::exp(iu * ph) * st.z1_at(x - mc.v * t - mc.y);
        }
        return f;
    }

    Field2 mode_field_matrix(int col, double t) const {
        require_matrix();
        auto [l, s] = mode_index_[col];
        const auto& st = mbases_[l]->spectrum().states[s];
        const auto& mc = cfg_.centers[l].motion;
        Field2 f(grid_);
        for (int i = 0; i < grid_.n; ++i) {
            double x = grid_.x(i);
            double ph = galilei_phase(mc, t, x);
            double z = x - mc.v * t - mc.y;
            f.c1[i] = std::exp(iu * ph) * st.z1_at(z);
            f.c2[i] = std::exp(-iu * ph) * st.z2_at(z);
        }
        return f;
    }

    // ------------------------------------------------------------------ decompose

    Decomposition decompose(const Field1& f, double tol = 1e-8, int maxit = 200) const {
        require_scalar();
        check_same_grid(f.grid, grid_);
        const int n = grid_.n;
        const int nm = mode_count();
        auto fwd = [&](const std::vector<cplx>& p) {
            std::vector<cplx> phi(p.begin(), p.begin() + n);
            PhiProfile pr = build_profile(phi);
            Field1 s = evaluate_scalar(pr, 0.0);
            for (int c = 0; c < nm; ++c)
                for (int i = 0; i < n; ++i) s[i] += p[n + c] * smode_cols_[c][i];
            return s.v;
        };
        auto adj = [&](const std::vector<cplx>& u) {
            std::vector<cplx> p(n + nm, cplx(0));
            auto phi_star = scalar_adjoint(u);
            std::copy(phi_star.begin(), phi_star.end(), p.begin());
            for (int c = 0; c < nm; ++c) {
                cplx acc = 0;
                for (int i = 0; i < n; ++i) acc += std::conj(smode_cols_[c][i]) * u[i];
                p[n + c] = acc;
            }
            return p;
        };
        auto [sol, its, rel] = lsqr(fwd, adj, f.v, n + nm, tol, maxit);
        Decomposition d;
        d.phi1.assign(sol.begin(), sol.begin() + n);
        d.profile = build_profile(d.phi1);
        for (int c = 0; c < nm; ++c) {
            auto [l, s] = mode_index_[c];
            ChainRole role = sbases_[l]->spectrum().states[s].role;
            d.modes.push_back({l, s, role, sol[n + c]});
        }
        d.iterations = its;
        d.residual_rel = rel;
        return d;
    }

    Decomposition decompose(const Field2& f, double tol = 1e-8, int maxit = 200) const {
        require_matrix();
        check_same_grid(f.grid, grid_);
        const int n = grid_.n;
        const int nm = mode_count();
        auto pack = [&](const Field2& u) {
            std::vector<cplx> v(2 * n);
            std::copy(u.c1.begin(), u.c1.end(), v.begin());
            std::copy(u.c2.begin(), u.c2.end(), v.begin() + n);
            return v;
        };
        auto fwd = [&](const std::vector<cplx>& p) {
            std::vector<cplx> p1(p.begin(), p.begin() + n);
            std::vector<cplx> p2(p.begin() + n, p.begin() + 2 * n);
            PhiProfile pr = build_profile(p1, p2);
            Field2 s = evaluate_matrix(pr, 0.0);
            for (int c = 0; c < nm; ++c)
                for (int i = 0; i < n; ++i) {
                    s.c1[i] += p[2 * n + c] * mmode_cols_[c].c1[i];
                    s.c2[i] += p[2 * n + c] * mmode_cols_[c].c2[i];
                }
            return pack(s);
        };
        auto adj = [&](const std::vector<cplx>& uv) {
            Field2 u(grid_);
            std::copy(uv.begin(), uv.begin() + n, u.c1.begin());
            std::copy(uv.begin() + n, uv.begin() + 2 * n, u.c2.begin());
            std::vector<cplx> p(2 * n + nm, cplx(0));
            auto [s1, s2] = matrix_adjoint(u);
            std::copy(s1.begin(), s1.end(), p.begin());
            std::copy(s2.begin(), s2.end(), p.begin() + n);
            for (int c = 0; c < nm; ++c) {
                cplx acc = 0;
                for (int i = 0; i < n; ++i) {
                    acc += std::conj(mmode_cols_[c].c1[i]) * u.c1[i];
                    acc += std::conj(mmode_cols_[c].c2[i]) * u.c2[i];
                }
                p[2 * n + c] = acc;
            }
            return p;
        };
        auto [sol, its, rel] = lsqr(fwd, adj, pack(f), 2 * n + nm, tol, maxit);
        Decomposition d;
        d.phi1.assign(sol.begin(), sol.begin() + n);
        d.phi2.assign(sol.begin() + n, sol.begin() + 2 * n);
        d.profile = build_profile(d.phi1, d.phi2);
        for (int c = 0; c < nm; ++c) {
            auto [l, s] = mode_index_[c];
            ChainRole role = mbases_[l]->spectrum().states[s].role;
            d.modes.push_back({l, s, role, sol[2 * n + c]});
        }
        d.iterations = its;
        d.residual_rel = rel;
        return d;
    }

    // ------------------------------------------------------------------ coercivity

    std::vector<CoercivityRow> coercivity_report(int ensemble, uint64_t seed,
                                                 double k_band = 4.0) const {
        std::vector<CoercivityRow> rows;
        for (int order = 0; order <= 2; ++order) {
            CoercivityRow row;
            row.order = order;
            row.ratio_min = row.inverse_min = std::numeric_limits<double>::infinity();
            rows.push_back(row);
        }
        for (int e = 0; e < ensemble; ++e) {
            std::vector<cplx> p1 = random_profile(seed * 1000 + 2 * e, k_band);
            PhiProfile pr;
            Field1 s1(grid_);
            Field2 s2(grid_);
            if (cfg_.model == ModelKind::Scalar) {
                pr = build_profile(p1);
                s1 = evaluate_scalar(pr, 0.0);
            } else {
                auto p2 = random_profile(seed * 1000 + 2 * e + 1, k_band);
                pr = build_profile(p1, p2);
                s2 = evaluate_matrix(pr, 0.0);
            }
            for (int order = 0; order <= 2; ++order) {
                double num = 0;
                for (int l = 0; l < cfg_.m(); ++l) {
                    double a = weighted_k_norm(pr.phi1[l], order);
                    if (cfg_.model == ModelKind::Matrix) {
                        double b = weighted_k_norm(pr.phi2[l], order);
                        a = std::sqrt(a * a + b * b);
                    }
                    num = std::max(num, a);
                }
                double den = cfg_.model == ModelKind::Scalar ? norm_hn(s1, order)
                                                             : norm_hn(s2, order);
                double ratio = num / den;
                rows[order].ratio_min = std::min(rows[order].ratio_min, ratio);
                rows[order].ratio_max = std::max(rows[order].ratio_max, ratio);
                rows[order].inverse_min = std::min(rows[order].inverse_min, 1.0 / ratio);
                rows[order].inverse_max = std::max(rows[order].inverse_max, 1.0 / ratio);
            }
        }
        return rows;
    }

    std::vector<cplx> random_profile(uint64_t seed, double k_band = 4.0) const {
        auto rng = make_rng(seed);
        std::uniform_real_distribution<double> sh(-8.0, 8.0);
        std::vector<cplx> p(grid_.n, cplx(0));
        const int lumps = 6;
        for (int l = 0; l < lumps; ++l) {
            cplx a = random_unit_cplx(rng);
            double xi = sh(rng);
            for (int j = 0; j < grid_.n; ++j) {
                double k = grid_.k(j);
                p[j] += a * std::exp(iu * (k * xi)) * std::exp(-k * k / (k_band * k_band));
            }
        }
        return p;
    }

private:
    void require_scalar() const {
        if (cfg_.model != ModelKind::Scalar) throw ConfigError("scalar-model operation");
    }
    void require_matrix() const {
        if (cfg_.model != ModelKind::Matrix) throw ConfigError("matrix-model operation");
    }

    double weighted_k_norm(const std::vector<cplx>& p, int order) const {
        double s = 0;
        for (int j = 0; j < grid_.n; ++j) {
            double w = 1.0 + grid_.k(j) * grid_.k(j);
            s += std::pow(w, order) * std::norm(p[j]);
        }
        return std::sqrt(s * grid_.dk());
    }

    // phase + shift + flat multiplier feeding center l's synthesis:
    // h(k) = e^{i y k} phi(k + v/2) e^{-i t (k^2 [+ omega])}           (row 1)
    // h(k) = e^{i y k} phi(k - v/2) e^{+i t (k^2 + omega)}             (row 2)
    std::vector<cplx> center_argument(const std::vector<cplx>& phi, int l, double t,
                                      bool second_row) const {
        const auto& mc = cfg_.centers[l].motion;
        const Resampler& rs = second_row ? shift_minus_[l] : shift_plus_[l];
        auto shifted = rs.forward(phi);
        std::vector<cplx> h(grid_.n);
        double omega = cfg_.model == ModelKind::Matrix ? mc.omega : 0.0;
        for (int j = 0; j < grid_.n; ++j) {
            double k = grid_.k(j);
            double flat = t * (k * k + omega);
            h[j] = std::exp(iu * (mc.y * k)) * shifted[j] *
                   std::exp(iu * (second_row ? flat : -flat));
        }
        return h;
    }

    std::vector<cplx> center_argument_adjoint(const std::vector<cplx>& hstar, int l, double t,
                                              bool second_row) const {
        const auto& mc = cfg_.centers[l].motion;
        double omega = cfg_.model == ModelKind::Matrix ? mc.omega : 0.0;
        std::vector<cplx> w(grid_.n);
        for (int j = 0; j < grid_.n; ++j) {
            double k = grid_.k(j);
            double flat = t * (k * k + omega);
            w[j] = std::conj(std::exp(iu * (mc.y * k)) *
                             std::exp(iu * (second_row ? flat : -flat))) *
                   hstar[j];
        }
        const Resampler& rs = second_row ? shift_minus_[l] : shift_plus_[l];
        return rs.adjoint(w);
    }

    // one recursion step l -> l+1 (gauged profiles; second_row flips signs)
    std::vector<cplx> recur_forward(int l, const std::vector<cplx>& phi, bool second_row) const {
        const auto& rho = second_row ? rho2_[l] : rho1_[l];
        const auto& invs = second_row ? invs2_[l] : invs1_[l];
        const Resampler& refl = second_row ? refl2_[l] : refl1_[l];
        auto reflected = refl.forward(phi);
        std::vector<cplx> out(grid_.n);
        for (int j = 0; j < grid_.n; ++j) {
            if (std::abs(phi[j]) > 1e-9 * profile_scale(phi) && !std::isfinite(invs[j].real()))
                throw NumericalError("profile recursion: |s| < 1e-6 on the profile support");
            out[j] = (phi[j] - rho[j] * reflected[j]) * invs[j];
        }
        return out;
    }

    std::vector<cplx> recur_adjoint(int l, const std::vector<cplx>& u, bool second_row) const {
        const auto& rho = second_row ? rho2_[l] : rho1_[l];
        const auto& invs = second_row ? invs2_[l] : invs1_[l];
        const Resampler& refl = second_row ? refl2_[l] : refl1_[l];
        std::vector<cplx> du(grid_.n), rr(grid_.n);
        for (int j = 0; j < grid_.n; ++j) {
            cplx t = std::isfinite(invs[j].real()) ? std::conj(invs[j]) * u[j] : cplx(0);
            du[j] = t;
            rr[j] = std::conj(rho[j]) * t;
        }
        auto scattered = refl.adjoint(rr);
        for (int j = 0; j < grid_.n; ++j) du[j] -= scattered[j];
        return du;
    }

    static double profile_scale(const std::vector<cplx>& v) {
        double m = 0;
        for (const auto& z : v) m = std::max(m, std::abs(z));
        return m;
    }

    // adjoint of phi -> evaluate_scalar(build_profile(phi), 0)
    std::vector<cplx> scalar_adjoint(const std::vector<cplx>& u) const {
        const int m = cfg_.m();
        std::vector<std::vector<cplx>> psi(m, std::vector<cplx>(grid_.n, cplx(0)));
        // synthesized center terms
        for (int l = 0; l < m; ++l) {
            const auto& mc = cfg_.centers[l].motion;
            std::vector<cplx> w(grid_.n);
            const double v = mc.v;
            for (int i = 0; i < grid_.n; ++i) {
                double ph = 0.5 * v * grid_.x(i);
                w[i] = std::conj(std::exp(iu * ph)) * u[i];
            }
            w = spectral_shift(grid_, w, -mc.y);  // adjoint of shifting by +y
            auto hstar = sbases_[l]->synth_left_adjoint(w);
            auto contrib = center_argument_adjoint(hstar, l, 0.0, false);
            for (int j = 0; j < grid_.n; ++j) psi[l][j] += contrib[j];
        }
        // counter-term: -idft(phibar)
        {
            auto w = dft(grid_, u);
            const double ratio = grid_.dk() / grid_.dx();
            for (int l = 0; l + 1 < m; ++l)
                for (int j = 0; j < grid_.n; ++j) psi[l][j] -= ratio * w[j];
        }
        // pull back through the recursion chain
        std::vector<cplx> acc = psi[m - 1];
        for (int l = m - 2; l >= 0; --l) {
            auto lower = recur_adjoint(l, acc, false);
            acc = psi[l];
            for (int j = 0; j < grid_.n; ++j) acc[j] += lower[j];
        }
        return acc;
    }

    std::pair<std::vector<cplx>, std::vector<cplx>> matrix_adjoint(const Field2& u) const {
        const int m = cfg_.m();
        std::vector<std::vector<cplx>> psi1(m, std::vector<cplx>(grid_.n, cplx(0)));
        std::vector<std::vector<cplx>> psi2(m, std::vector<cplx>(grid_.n, cplx(0)));
        for (int l = 0; l < m; ++l) {
            const auto& mc = cfg_.centers[l].motion;
            Field2 w(grid_);
            for (int i = 0; i < grid_.n; ++i) {
                double ph = galilei_phase(mc, 0.0, grid_.x(i));
                w.c1[i] = std::conj(std::exp(iu * ph)) * u.c1[i];
                w.c2[i] = std::conj(std::exp(-iu * ph)) * u.c2[i];
            }
            w.c1 = spectral_shift(grid_, w.c1, -mc.y);
            w.c2 = spectral_shift(grid_, w.c2, -mc.y);
            CoeffPair hstar = mbases_[l]->synth_G_adjoint(w);
            auto c1 = center_argument_adjoint(hstar.c1, l, 0.0, false);
            auto c2 = center_argument_adjoint(hstar.c2, l, 0.0, true);
            for (int j = 0; j < grid_.n; ++j) {
                psi1[l][j] += c1[j];
                psi2[l][j] += c2[j];
            }
        }
        {
            auto w1 = dft(grid_, u.c1);
            auto w2 = dft(grid_, u.c2);
            const double ratio = grid_.dk() / grid_.dx();
            for (int l = 0; l + 1 < m; ++l) {
                double gph = cfg_.centers[l].motion.gamma_phase;
                for (int j = 0; j < grid_.n; ++j) {
                    psi1[l][j] -= ratio * std::conj(std::exp(iu * gph)) * w1[j];
                    psi2[l][j] -= ratio * std::conj(std::exp(-iu * gph)) * w2[j];
                }
            }
        }
        std::vector<cplx> acc1 = psi1[m - 1], acc2 = psi2[m - 1];
        for (int l = m - 2; l >= 0; --l) {
            auto low1 = recur_adjoint(l, acc1, false);
            auto low2 = recur_adjoint(l, acc2, true);
            acc1 = psi1[l];
            acc2 = psi2[l];
            for (int j = 0; j < grid_.n; ++j) {
                acc1[j] += low1[j];
                acc2[j] += low2[j];
            }
        }
        return {acc1, acc2};
    }

    // ------------------------------------------------------------------ lsqr

    using Vec = std::vector<cplx>;
    static double vnorm(const Vec& v) {
        double s = 0;
        for (auto& z : v) s += std::norm(z);
        return std::sqrt(s);
    }

    template <class Fwd, class Adj>
    std::tuple<Vec, int, double> lsqr(const Fwd& A, const Adj& At, const Vec& b, int ncols,
                                      double tol, int maxit) const {
        Vec x(ncols, cplx(0));
        Vec u = b;
        double beta = vnorm(u);
        double bnorm = beta;
        if (beta == 0) return {x, 0, 0.0};
        for (auto& z : u) z /= beta;
        Vec v = At(u);
        double alpha = vnorm(v);
        for (auto& z : v) z /= alpha;
        Vec w = v;
        double phibar = beta, rhobar = alpha;
        int it = 0;
        double rel = 1.0;
        for (it = 1; it <= maxit; ++it) {
            Vec Av = A(v);
            for (size_t i = 0; i < u.size(); ++i) Av[i] -= alpha * u[i];
            beta = vnorm(Av);
            if (beta > 0) {
                u = Av;
                for (auto& z : u) z /= beta;
            }
            Vec Atu = At(u);
            for (int i = 0; i < ncols; ++i) Atu[i] -= beta * v[i];
            double alpha_new = vnorm(Atu);
            if (alpha_new > 0) {
                v = Atu;
                for (auto& z : v) z /= alpha_new;
            }
            double rho = std::hypot(rhobar, beta);
            double c = rhobar / rho, s = beta / rho;
            double theta = s * alpha_new;
            rhobar = -c * alpha_new;
            double phi = c * phibar;
            phibar = s * phibar;
            double step = phi / rho;
            for (int i = 0; i < ncols; ++i) {
                x[i] += step * w[i];
                w[i] = v[i] - (theta / rho) * w[i];
            }
            alpha = alpha_new;
            rel = phibar / bnorm;  // current residual estimate
            if (std::abs(step) * vnorm(w) < tol * std::max(1.0, vnorm(x)) && it > 4) break;
            if (rel < tol) break;
        }
        return {x, it, rel};
    }

    // ------------------------------------------------------------------ setup

    void build_bases(int threads) {
        std::map<std::string, std::shared_ptr<ScalarBasis>> scache;
        std::map<std::string, std::shared_ptr<MatrixBasis>> mcache;
        for (const auto& c : cfg_.centers) {
            if (cfg_.model == ModelKind::Scalar) {
                std::string key = potential_key(c.scalar);
                auto it = scache.find(key);
                if (it == scache.end())
                    it = scache.emplace(key, std::make_shared<ScalarBasis>(c.scalar, grid_,
                                                                           threads))
                             .first;
                sbases_.push_back(it->second);
            } else {
                std::string key = potential_key(c.matrix.U) + "|" + potential_key(c.matrix.W) +
                                  "|w" + std::to_string(c.motion.omega);
                auto it = mcache.find(key);
                if (it == mcache.end())
                    it = mcache.emplace(key, std::make_shared<MatrixBasis>(
                                                 c.matrix, c.motion.omega, grid_, threads))
                             .first;
                mbases_.push_back(it->second);
            }
        }
    }

    static std::string potential_key(const ScalarPotential& p) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "f%d a%.12g b%.12g d%d g%.12g", int(p.family), p.a, p.b,
                      p.depth, p.gamma);
        return buf;
    }

    void build_tables() {
        const int m = cfg_.m();
        const int n = grid_.n;
        for (int l = 0; l + 1 < m; ++l) {
            const auto& mc = cfg_.centers[l].motion;
            const auto& mcn = cfg_.centers[l + 1].motion;
            const ScatteringData& rs =
                cfg_.model == ModelKind::Scalar ? sbases_[l]->scattering()
                                                : mbases_[l]->scattering();
            CubicInterp ri(grid_.k(0), grid_.dk(), rs.r, cplx(0));
            CubicInterp si(grid_.k(0), grid_.dk(), rs.s, cplx(1));
            std::vector<cplx> rho1(n), invs1(n), rho2(n), invs2(n);
            for (int j = 0; j < n; ++j) {
                double k = grid_.k(j);
                // row 1: arguments shifted by -v_l/2
                cplx s1v = si(k - mc.v / 2);
                cplx phase1 = std::exp(iu * (-2.0 * mc.y * (k - mcn.v / 2) +
                                             mc.y * (mc.v - mcn.v)));
                rho1[j] = ri(k - mc.v / 2) * phase1;
                invs1[j] = std::abs(s1v) < 1e-6
                               ? cplx(std::numeric_limits<double>::infinity(), 0)
                               : 1.0 / s1v;
                // row 2: arguments shifted by +v_l/2
                cplx s2v = si(k + mc.v / 2);
                cplx phase2 = std::exp(iu * (-2.0 * mc.y * (k + mcn.v / 2) +
                                             mc.y * (mcn.v - mc.v)));
                rho2[j] = ri(k + mc.v / 2) * phase2;
                invs2[j] = std::abs(s2v) < 1e-6
                               ? cplx(std::numeric_limits<double>::infinity(), 0)
                               : 1.0 / s2v;
            }
            rho1_.push_back(std::move(rho1));
            invs1_.push_back(std::move(invs1));
            rho2_.push_back(std::move(rho2));
            invs2_.push_back(std::move(invs2));
            refl1_.emplace_back(grid_, -1.0, mc.v);   // phi(-k + v_l)
            refl2_.emplace_back(grid_, -1.0, -mc.v);  // phi(-k - v_l)
        }
        for (int l = 0; l < m; ++l) {
            shift_plus_.emplace_back(grid_, 1.0, cfg_.centers[l].motion.v / 2);
            shift_minus_.emplace_back(grid_, 1.0, -cfg_.centers[l].motion.v / 2);
        }
        // mode columns at t = 0
        for (int l = 0; l < m; ++l) {
            int count = int((cfg_.model == ModelKind::Scalar ? sbases_[l]->spectrum()
                                                             : mbases_[l]->spectrum())
                                .states.size());
            for (int s = 0; s < count; ++s) mode_index_.push_back({l, s});
        }
        for (int c = 0; c < mode_count(); ++c) {
            if (cfg_.model == ModelKind::Scalar)
                smode_cols_.push_back(mode_field_scalar(c, 0.0).v);
            else
                mmode_cols_.push_back(mode_field_matrix(c, 0.0));
        }
    }

    ChargeTransferConfig cfg_;
    SpatialGrid grid_;
    std::vector<std::shared_ptr<ScalarBasis>> sbases_;
    std::vector<std::shared_ptr<MatrixBasis>> mbases_;
    std::vector<std::vector<cplx>> rho1_, invs1_, rho2_, invs2_;
    std::vector<Resampler> refl1_, refl2_, shift_plus_, shift_minus_;
    std::vector<std::pair<int, int>> mode_index_;
    std::vector<std::vector<cplx>> smode_cols_;
    std::vector<Field2> mmode_cols_;
};

}  // namespace ctm
