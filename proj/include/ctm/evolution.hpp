#pragma once

#include <Eigen/Dense>

#include "ctm/dispersive_map.hpp"
#include "ctm/grid.hpp"
#include "ctm/potentials.hpp"

namespace ctm {

// ---------------------------------------------------------------------------
// Direct time integration by Strang splitting. The free half-steps are exact
// diagonal multipliers in k-space (e^{-i dt k^2 sigma3}); the potential step
// applies the exact exponential of the traceless 2x2 midpoint potential per
// node. Scalar runs live in the first component.

struct Trajectory {
    ModelKind model = ModelKind::Scalar;
    std::vector<double> t;
    std::vector<Field2> psi;
    std::vector<double> norms;  // conservation diagnostic
    double dt = 0;
};

class Propagator {
public:
    explicit Propagator(const ChargeTransferConfig& cfg) : cfg_(cfg), grid_(cfg.grid) {
        cfg_.validate();
    }

    // growth tolerance: rate of the largest unstable mode (0 for stable)
    void set_max_growth_rate(double r) { growth_rate_ = r; }

    // one Strang step from time t with step dt (dt may be negative)
    void step(Field2& psi, double t, double dt) const {
        apply_free(psi, 0.5 * dt);
        apply_potential(psi, t + 0.5 * dt, dt);
        apply_free(psi, 0.5 * dt);
    }

    Trajectory propagate(const Field2& psi0, double t0, double t_final, double dt,
                         int sample_stride = 0) const {
        if (dt == 0) throw ConfigError("propagate: dt must be nonzero");
        int steps = int(std::llround((t_final - t0) / dt));
        if (steps < 0 || std::abs(t0 + steps * dt - t_final) > 1e-9 * std::max(1.0, std::abs(dt)))
            throw ConfigError("propagate: (t_final - t0) must be a multiple of dt");
        if (sample_stride <= 0) sample_stride = std::max(1, steps / 200);
        Trajectory traj;
        traj.model = cfg_.model;
        traj.dt = dt;
        Field2 psi = psi0;
        double n0 = norm_l2(psi);
        traj.t.push_back(t0);
        traj.psi.push_back(psi);
        traj.norms.push_back(n0);
        for (int s = 0; s < steps; ++s) {
            double t = t0 + s * dt;
            step(psi, t, dt);
            double nn = norm_l2(psi);
            double elapsed = std::abs((s + 1) * dt);
            double allowed = n0 * 20.0 * std::exp(1.5 * growth_rate_ * elapsed);
            if (!std::isfinite(nn) || nn > allowed)
                throw NumericalError("propagate: norm growth beyond the unstable-mode rate; "
                                     "dt too large");
            if ((s + 1) % sample_stride == 0 || s + 1 == steps) {
                traj.t.push_back(t0 + (s + 1) * dt);
                traj.psi.push_back(psi);
                traj.norms.push_back(nn);
            }
        }
        return traj;
    }

    Field2 evolve(const Field2& psi0, double t0, double t_final, double dt) const {
        auto traj = propagate(psi0, t0, t_final, dt, 1 << 30);
        return traj.psi.back();
    }

private:
    void apply_free(Field2& psi, double dt) const {
        auto h1 = dft(grid_, psi.c1);
        for (int j = 0; j < grid_.n; ++j) {
            double k2 = grid_.k(j) * grid_.k(j);
            h1[j] *= std::exp(-iu * (dt * k2));
        }
        psi.c1 = idft(grid_, h1);
        if (cfg_.model == ModelKind::Matrix) {
            auto h2 = dft(grid_, psi.c2);
            for (int j = 0; j < grid_.n; ++j) {
                double k2 = grid_.k(j) * grid_.k(j);
                h2[j] *= std::exp(iu * (dt * k2));
            }
            psi.c2 = idft(grid_, h2);
        }
    }

    void apply_potential(Field2& psi, double t_mid, double dt) const {
        if (cfg_.model == ModelKind::Scalar) {
            for (int i = 0; i < grid_.n; ++i) {
                double x = grid_.x(i);
                double vsum = 0;
                for (const auto& c : cfg_.centers)
                    vsum += c.scalar(x - c.motion.v * t_mid - c.motion.y);
                psi.c1[i] *= std::exp(-iu * (dt * vsum));
            }
            return;
        }
        for (int i = 0; i < grid_.n; ++i) {
            double x = grid_.x(i);
            double a = 0;
            cplx b = 0;
            for (const auto& c : cfg_.centers) {
                double z = x - c.motion.v * t_mid - c.motion.y;
                a += c.matrix.U(z);
                b += -std::exp(iu * theta_phase(c.motion, t_mid, x)) * c.matrix.W(z);
            }
            // M = [a, b; -conj(b), -a]; M^2 = (a^2 - |b|^2) Id
            cplx rho = cplx(a * a - std::norm(b), 0.0);
            cplx mu = std::sqrt(rho);
            cplx cosf, sincf;  // cos(mu dt), sin(mu dt)/mu
            if (std::abs(mu) * std::abs(dt) < 1e-6) {
                cplx z2 = rho * dt * dt;
                cosf = 1.0 - z2 / 2.0 + z2 * z2 / 24.0;
                sincf = dt * (1.0 - z2 / 6.0);
            } else {
                cosf = std::cos(mu * dt);
                sincf = std::sin(mu * dt) / mu;
            }
            cplx p1 = psi.c1[i], p2 = psi.c2[i];
            psi.c1[i] = cosf * p1 - iu * sincf * (a * p1 + b * p2);
            psi.c2[i] = cosf * p2 - iu * sincf * (-std::conj(b) * p1 - a * p2);
        }
    }

    ChargeTransferConfig cfg_;
    SpatialGrid grid_;
    double growth_rate_ = 0.0;
};

// ---------------------------------------------------------------------------
// mode-coefficient extraction: solve the small sigma3-Gram system among the
// traveling discrete modes and pair the state.

struct ModeTrack {
    std::vector<ModeCoefficient> coeffs;
    double gram_condition = 0;
};

inline ModeTrack mode_coefficients(const DispersiveMap& M, const Field2& psi, double t) {
    const SpatialGrid& g = M.grid();
    const int nm = M.mode_count();
    ModeTrack out;
    if (nm == 0) return out;
    const bool scalar = M.config().model == ModelKind::Scalar;
    std::vector<Field2> cols;
    for (int c = 0; c < nm; ++c) {
        if (scalar) {
            Field2 f(g);
            f.c1 = M.mode_field_scalar(c, t).v;
            cols.push_back(std::move(f));
        } else {
            cols.push_back(M.mode_field_matrix(c, t));
        }
    }
    auto pair_sigma3 = [&](const Field2& f, const Field2& h) {
        // <f, sigma3 h> = int (f1 conj(h1) - f2 conj(h2))
        cplx acc = 0;
        for (int i = 0; i < g.n; ++i) {
            acc += f.c1[i] * std::conj(h.c1[i]);
            if (!scalar) acc -= f.c2[i] * std::conj(h.c2[i]);
        }
        return acc * g.dx();
    };
    Eigen::MatrixXcd G(nm, nm);
    Eigen::VectorXcd b(nm);
    for (int j = 0; j < nm; ++j) {
        b(j) = pair_sigma3(psi, cols[j]);
        for (int k = 0; k < nm; ++k) G(j, k) = pair_sigma3(cols[k], cols[j]);
    }
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(G, Eigen::ComputeThinU | Eigen::ComputeThinV);
    double cond = svd.singularValues()(0) / svd.singularValues()(nm - 1);
    if (cond > 1e6)
        throw NumericalError("mode_coefficients: Gram condition number " +
                             std::to_string(cond) + "; centers too close");
    Eigen::VectorXcd a = svd.solve(b);
    out.gram_condition = cond;
    for (int c = 0; c < nm; ++c) {
        auto [l, s] = M.mode_id(c);
        out.coeffs.push_back({l, s, M.mode_state(c).role, a(c)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// mode ODE residual b(t) = i a'(t) - lambda a(t), with a' from 4th-order
// differences, and a fitted exponential envelope for |b|.

struct ModeOdeFit {
    std::vector<double> t;
    std::vector<cplx> residual;
    DecayFit fit;
};

inline ModeOdeFit mode_ode_residual(const std::vector<double>& ts, const std::vector<cplx>& a,
                                    cplx lambda) {
    if (ts.size() < 7) throw ConfigError("mode_ode_residual: need >= 7 samples");
    double h = ts[1] - ts[0];
    ModeOdeFit out;
    std::vector<double> mags;
    for (size_t i = 2; i + 2 < ts.size(); ++i) {
        cplx da = (-a[i + 2] + 8.0 * a[i + 1] - 8.0 * a[i - 1] + a[i - 2]) / (12.0 * h);
        cplx b = iu * da - lambda * a[i];
        out.t.push_back(ts[i]);
        out.residual.push_back(b);
        mags.push_back(std::abs(b));
    }
    out.fit = fit_exponential_decay(out.t, mags);
    return out;
}

// ---------------------------------------------------------------------------
// backward construction of the wave-operator solution: anchor S(phi) at a
// late time, propagate back to 0, and (for unstable spectra) zero the
// unstable coefficients at the anchor by shooting passes.

struct WaveSolution {
    Field2 psi0;
    double anchor_time = 0;
    int shooting_passes = 0;
    double unstable_floor = 0;  // largest |a| on unstable modes at the anchor
};

inline WaveSolution construct_wave_solution(const DispersiveMap& M, const PhiProfile& profile,
                                            double t_anchor, double dt, int max_passes = 3) {
    const auto& cfg = M.config();
    Propagator prop(cfg);
    const bool scalar = cfg.model == ModelKind::Scalar;
    double growth = 0;
    std::vector<int> unstable_cols;
    for (int c = 0; c < M.mode_count(); ++c) {
        double im = M.mode_state(c).lambda.imag();
        if (im > 1e-8) {
            growth = std::max(growth, im);
            unstable_cols.push_back(c);
        }
    }
    prop.set_max_growth_rate(growth);

    Field2 anchor(M.grid());
    if (scalar)
        anchor.c1 = M.evaluate_scalar(profile, t_anchor).v;
    else
        anchor = M.evaluate_matrix(profile, t_anchor);

    WaveSolution ws;
    ws.anchor_time = t_anchor;
    for (int pass = 0;; ++pass) {
        ws.psi0 = prop.evolve(anchor, t_anchor, 0.0, -dt);
        ws.shooting_passes = pass;
        if (unstable_cols.empty()) break;
        // re-propagate forward and measure unstable content at the anchor
        Field2 fwd = prop.evolve(ws.psi0, 0.0, t_anchor, dt);
        auto track = mode_coefficients(M, fwd, t_anchor);
        double worst = 0;
        for (int c : unstable_cols) worst = std::max(worst, std::abs(track.coeffs[c].a));
        ws.unstable_floor = worst;
        if (worst < 1e-8 || pass + 1 >= max_passes) {
            if (worst > 1e-4)
                throw NumericalError(
                    "construct_wave_solution: unstable content " + std::to_string(worst) +
                    " not suppressed after " + std::to_string(pass + 1) + " shooting passes");
            break;
        }
        // subtract the unstable components at the anchor and shoot again
        for (int c : unstable_cols) {
            Field2 mode = M.mode_field_matrix(c, t_anchor);
            cplx a = track.coeffs[c].a;
            for (int i = 0; i < M.grid().n; ++i) {
                anchor.c1[i] -= a * mode.c1[i];
                anchor.c2[i] -= a * mode.c2[i];
            }
        }
    }
    return ws;
}

// ---------------------------------------------------------------------------
// Jordan-block check: project the trajectory on the traveling (Z1, Y) pair
// and fit the linear growth of the Y-coefficient.

struct GeneralizedModeFit {
    LinearFit slope_fit;        // |c_Y(t)| vs t
    double normalized_slope = 0;  // slope / |c_{Z1}(0)|
};

inline GeneralizedModeFit generalized_mode_check(const DispersiveMap& M, const Trajectory& traj,
                                                 int center, int gen_col) {
    const SpatialGrid& g = M.grid();
    const BoundState& st = M.mode_state(gen_col);
    if (st.role != ChainRole::Generalized)
        throw ConfigError("generalized_mode_check: column is not a generalized mode");
    const auto& mc = M.config().centers[center].motion;
    std::vector<double> ts;
    std::vector<double> cy;
    double z1_at0 = 0;
    for (size_t s = 0; s < traj.t.size(); ++s) {
        double t = traj.t[s];
        // build the traveling (Z1, Y) fields
        Field2 fz(g), fy(g);
        for (int i = 0; i < g.n; ++i) {
            double x = g.x(i);
            double ph = galilei_phase(mc, t, x);
            double z = x - mc.v * t - mc.y;
            fz.c1[i] = std::exp(iu * ph) * st.z1_at(z);
            fz.c2[i] = std::exp(-iu * ph) * st.z2_at(z);
            fy.c1[i] = std::exp(iu * ph) * st.y1_at(z);
            fy.c2[i] = std::exp(-iu * ph) * st.y2_at(z);
        }
        // least squares of psi on span{fz, fy}
        auto ip = [&](const Field2& a, const Field2& b) {
            cplx acc = 0;
            for (int i = 0; i < g.n; ++i)
                acc += a.c1[i] * std::conj(b.c1[i]) + a.c2[i] * std::conj(b.c2[i]);
            return acc * g.dx();
        };
        Eigen::Matrix2cd G;
        G(0, 0) = ip(fz, fz);
        G(0, 1) = ip(fy, fz);
        G(1, 0) = ip(fz, fy);
        G(1, 1) = ip(fy, fy);
        Eigen::Vector2cd rhs;
        rhs(0) = ip(traj.psi[s], fz);
        rhs(1) = ip(traj.psi[s], fy);
        Eigen::Vector2cd c = G.fullPivLu().solve(rhs);
        ts.push_back(t);
        cy.push_back(std::abs(c(1)));
        if (s == 0) z1_at0 = std::abs(c(0));
    }
    GeneralizedModeFit out;
    out.slope_fit = fit_line(ts, cy);
    out.normalized_slope = out.slope_fit.slope / std::max(z1_at0, 1e-300);
    return out;
}

}  // namespace ctm
