#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "ctm/numerics.hpp"

namespace ctm {

// ---------------------------------------------------------------------------
// Coefficient vectors: 2m-2 complex functions on one uniform extended k-grid.

struct CoefficientGrid {
    double k0 = 0;   // first node
    double dk = 0;   // spacing
    int n = 0;       // nodes

    double k(int j) const { return k0 + j * dk; }
    double k_max() const { return k0 + (n - 1) * dk; }
};

using CoefficientVector = std::vector<std::vector<cplx>>;

inline CoefficientVector zero_coefficients(int components, const CoefficientGrid& g) {
    return CoefficientVector(components, std::vector<cplx>(g.n, cplx(0)));
}

inline double coeff_norm(const CoefficientGrid& g, const CoefficientVector& v) {
    double s = 0;
    for (const auto& c : v)
        for (const auto& z : c) s += std::norm(z);
    return std::sqrt(s * g.dk);
}

// per-center scattering coefficients as callables
struct CenterCoefficients {
    std::function<cplx(double)> r;
    std::function<cplx(double)> s;
};

inline CenterCoefficients trivial_coefficients() {
    return {[](double) { return cplx(0); }, [](double) { return cplx(1); }};
}

// ---------------------------------------------------------------------------
// The two structured operator families on 2m-2 components. Component and
// center indices are 1-based to match the display layout; storage is
// 0-based underneath.
//
// Form 1 rows:
//   T_{2l}   = g_{2l}(k)   - r_l(k+v_l/2) g_{2l-1}(-k-v_l)
//                          - s_l(k+v_l/2) g_{2l-2}(k)            [if 2l-2 >= 1]
//   T_{2l+1} = g_{2l+1}(k) - r_{l+2}(-k-v_{l+2}/2) g_{2l+2}(-k-v_{l+2})
//                          - s_{l+2}(-k-v_{l+2}/2) g_{2l+3}(k)   [if 2l+3 <= 2m-2]
// Form 2 rows:
//   T_{2n-1} = g_{2n-1}(k) - r_n(-k+v_n/2) g_{2n}(-k+v_n)
//                          - s_n(-k+v_n/2) g_{2n-3}(k)           [if 2n-3 >= 1]
//   T_{2n}   = g_{2n}(k)   - r_{n+1}(k-v_{n+1}/2) g_{2n-1}(-k+v_{n+1})
//                          - s_{n+1}(k-v_{n+1}/2) g_{2n+2}(k)    [if 2n+2 <= 2m-2]

class FormOperator {
public:
    FormOperator(int form, std::vector<double> velocities, std::vector<CenterCoefficients> rs,
                 const CoefficientGrid& grid,
                 std::function<void(const CoefficientVector&, CoefficientVector&)> perturbation =
                     nullptr)
        : form_(form), v_(std::move(velocities)), rs_(std::move(rs)), grid_(grid),
          perturbation_(std::move(perturbation)) {
        if (form_ != 1 && form_ != 2) throw ConfigError("FormOperator: form must be 1 or 2");
        m_ = int(v_.size());
        if (m_ < 2) throw ConfigError("FormOperator: need at least two centers");
        if (int(rs_.size()) != m_) throw ConfigError("FormOperator: one (r,s) pair per center");
        double c = std::numeric_limits<double>::infinity();
        for (int l = 0; l + 1 < m_; ++l) {
            if (!(v_[l] > v_[l + 1]))
                throw ConfigError("FormOperator: velocities must decrease strictly");
            c = std::min(c, 0.5 * (v_[l] - v_[l + 1]));
        }
        half_gap_ = c;
        double vmax = 0;
        for (double vv : v_) vmax = std::max(vmax, std::abs(vv));
        // one application must keep core-window evaluations interior
        if (grid_.n < 16 || grid_.dk <= 0) throw ConfigError("FormOperator: bad grid");
        max_abs_v_ = vmax;
    }

    int components() const { return 2 * m_ - 2; }
    int m() const { return m_; }
    double half_gap() const { return half_gap_; }
    const CoefficientGrid& grid() const { return grid_; }

    CoefficientVector apply_T(const CoefficientVector& g) const {
        CoefficientVector out = g;
        CoefficientVector rg = apply_R(g);
        for (int c = 0; c < components(); ++c)
            for (int j = 0; j < grid_.n; ++j) out[c][j] -= rg[c][j];
        return out;
    }

    // R = Id - T (the coupling part)
    CoefficientVector apply_R(const CoefficientVector& g) const {
        if (int(g.size()) != components()) throw ConfigError("apply_R: component count");
        CoefficientVector out = zero_coefficients(components(), grid_);
        std::vector<CubicInterp> interp;
        interp.reserve(g.size());
        for (const auto& c : g) interp.emplace_back(grid_.k0, grid_.dk, c, cplx(0));
        auto at = [&](int comp1, double k) -> cplx {  // 1-based component
            return interp[comp1 - 1](k);
        };
        const int M = components();
        for (int j = 0; j < grid_.n; ++j) {
            double k = grid_.k(j);
            if (form_ == 1) {
                for (int l = 1; l <= m_ - 1; ++l) {  // even rows 2l
                    cplx acc = rs_[l - 1].r(k + v(l) / 2) * at(2 * l - 1, -k - v(l));
                    if (2 * l - 2 >= 1) acc += rs_[l - 1].s(k + v(l) / 2) * at(2 * l - 2, k);
                    out[2 * l - 1][j] = acc;
                }
                for (int l = 0; l <= m_ - 2; ++l) {  // odd rows 2l+1
                    cplx acc = rs_[l + 1].r(-k - v(l + 2) / 2) * at(2 * l + 2, -k - v(l + 2));
                    if (2 * l + 3 <= M) acc += rs_[l + 1].s(-k - v(l + 2) / 2) * at(2 * l + 3, k);
                    out[2 * l][j] = acc;
                }
            } else {
                for (int nn = 1; nn <= m_ - 1; ++nn) {  // odd rows 2n-1
                    cplx acc = rs_[nn - 1].r(-k + v(nn) / 2) * at(2 * nn, -k + v(nn));
                    if (2 * nn - 3 >= 1) acc += rs_[nn - 1].s(-k + v(nn) / 2) * at(2 * nn - 3, k);
                    out[2 * nn - 2][j] = acc;
                }
                for (int nn = 1; nn <= m_ - 1; ++nn) {  // even rows 2n
                    cplx acc = rs_[nn].r(k - v(nn + 1) / 2) * at(2 * nn - 1, -k + v(nn + 1));
                    if (2 * nn + 2 <= M) acc += rs_[nn].s(k - v(nn + 1) / 2) * at(2 * nn + 2, k);
                    out[2 * nn - 1][j] = acc;
                }
            }
        }
        if (perturbation_) {
            CoefficientVector extra = zero_coefficients(components(), grid_);
            perturbation_(g, extra);
            for (int c = 0; c < components(); ++c)
                for (int j = 0; j < grid_.n; ++j) out[c][j] += extra[c][j];
        }
        return out;
    }

    // mass in the outer 4% of the grid; iterating with material edge mass
    // means shifted evaluations were truncated
    double edge_mass(const CoefficientVector& g) const {
        int edge = std::max(2, grid_.n / 25);
        double e = 0;
        for (const auto& c : g) {
            for (int j = 0; j < edge; ++j) e = std::max(e, std::abs(c[j]));
            for (int j = grid_.n - edge; j < grid_.n; ++j) e = std::max(e, std::abs(c[j]));
        }
        return e;
    }

private:
    double v(int center1) const { return v_[center1 - 1]; }  // 1-based

    int form_;
    int m_ = 0;
    std::vector<double> v_;
    std::vector<CenterCoefficients> rs_;
    CoefficientGrid grid_;
    double half_gap_ = 0;
    double max_abs_v_ = 0;
    std::function<void(const CoefficientVector&, CoefficientVector&)> perturbation_;
};

// ---------------------------------------------------------------------------
// certified bound ||R^{j(m-1)}|| <= min( j m C(m)^j / j!,
//                                        j m C(m)^j / (floor((j-3)/2)!)^2 ),
// with C(m) = 2^{m-1} C / min(c, 1); negative factorial floors clamp to 0!.

inline double theoretical_bound(int m, int j, double c_coeff, double c_gap) {
    if (m < 2 || j < 1 || c_coeff <= 0 || c_gap <= 0)
        throw ConfigError("theoretical_bound: positive inputs required");
    double cm = std::pow(2.0, m - 1) * c_coeff / std::min(c_gap, 1.0);
    double logcmj = j * std::log(cm);
    double b1 = j * m * std::exp(logcmj - std::lgamma(double(j) + 1.0));
    int fl = (j - 3) / 2;
    if (j < 3) fl = 0;
    double b2 = j * m * std::exp(logcmj - 2.0 * std::lgamma(double(fl) + 1.0));
    return std::min(b1, b2);
}

// ---------------------------------------------------------------------------
// Neumann inversion of T = Id - R:  g = sum_n R^n rhs.

struct NeumannResult {
    CoefficientVector solution;
    int iterations = 0;
    double certified_tail = 0;
    double residual = 0;  // ||T g - rhs|| / ||rhs||
};

inline NeumannResult neumann_solve(const FormOperator& op, const CoefficientVector& rhs,
                                   double tol, double c_coeff = 1.0, int max_iter = 4000) {
    const auto& grid = op.grid();
    const int m = op.m();
    NeumannResult res;
    res.solution = rhs;
    CoefficientVector p = rhs;
    double rhs_norm = coeff_norm(grid, rhs);
    if (rhs_norm == 0) return res;
    double cgap = op.half_gap();
    // certified tail after N = j(m-1) applications: remaining block sums
    auto tail_from = [&](int iter) {
        int j0 = iter / (m - 1) + 1;
        double t = 0;
        for (int j = j0; j < j0 + 400; ++j) {
            double b = theoretical_bound(m, j, c_coeff, cgap);
            t += (m - 1) * std::pow(2.0, m - 2) * b;
            if (b < 1e-18 && j > j0 + 4) break;
        }
        return t * rhs_norm;
    };
    std::vector<double> history;
    for (int it = 1; it <= max_iter; ++it) {
        p = op.apply_R(p);
        for (int c = 0; c < op.components(); ++c)
            for (int j = 0; j < grid.n; ++j) res.solution[c][j] += p[c][j];
        double inc = coeff_norm(grid, p);
        history.push_back(inc);
        res.iterations = it;
        if (inc < 1e-15 * rhs_norm) {
            // a vanishing increment kills every later power exactly
            res.certified_tail = 0.0;
            break;
        }
        // divergence heuristic: increments growing over 5(m-1) consecutive powers
        int span = 5 * (m - 1);
        if (int(history.size()) > span) {
            bool growing = true;
            for (int s = 0; s < span; ++s) {
                size_t idx = history.size() - 1 - s;
                if (history[idx] <= history[idx - 1] * (1.0 + 1e-12)) growing = false;
            }
            double bound_now =
                theoretical_bound(m, std::max(1, it / (m - 1)), c_coeff, cgap) * rhs_norm;
            if (growing && inc > 10.0 * std::max(bound_now, rhs_norm))
                throw NumericalError("neumann_solve: increments keep growing "
                                     "(operator hypotheses violated)");
        }
        if (op.edge_mass(p) > 1e-6 * rhs_norm)
            throw NumericalError("neumann_solve: shifted evaluations reached the grid edge; "
                                 "widen the k-grid");
        double tail = tail_from(it);
        if (inc < tol * rhs_norm && tail < tol * rhs_norm) {
            res.certified_tail = tail;
            break;
        }
    }
    // verify the defining equation
    CoefficientVector tg = op.apply_T(res.solution);
    double rnorm = 0;
    for (int c = 0; c < op.components(); ++c)
        for (int j = 0; j < grid.n; ++j) rnorm += std::norm(tg[c][j] - rhs[c][j]);
    res.residual = std::sqrt(rnorm * grid.dk) / rhs_norm;
    if (res.residual > 10.0 * tol)
        throw NumericalError("neumann_solve: verification residual " +
                             std::to_string(res.residual) + " exceeds 10 tol");
    return res;
}

// ---------------------------------------------------------------------------
// Product extremum of prod_j 1/(1+|k+q_j|) against the factorial/gap bound
// max( 1/((floor((M-2)/2)!)^2 gap^{M-2}), 1/((M-1)! gap^{M-1}) ). The bound
// controls the extremum the operator estimates consume: the largest value
// over k (attained near the middle shift; it scales like gap^{1-M}).

struct ProductBound {
    double measured_min = 0;  // measured extremum of the product over k
    double paper_bound = 0;
};

inline ProductBound product_bound_min(const std::vector<double>& q) {
    const int M = int(q.size());
    if (M < 2) throw ConfigError("product_bound_min: need M >= 2");
    double gap = std::numeric_limits<double>::infinity();
    for (int j = 0; j + 1 < M; ++j) {
        if (!(q[j] > q[j + 1])) throw ConfigError("product_bound_min: q must decrease strictly");
        gap = std::min(gap, q[j] - q[j + 1]);
    }
    auto prod = [&](double k) {
        double p = 1;
        for (double qj : q) p /= 1.0 + std::abs(k + qj);
        return p;
    };
    // the product decays monotonically beyond the extreme shifts, so the
    // extremum lives inside the hull of the {-q_j}; scan + local refine
    double lo = -q.front() - 2.0, hi = -q.back() + 2.0;
    double best = 0, bestk = lo;
    int nscan = 50000;
    for (int i = 0; i <= nscan; ++i) {
        double k = lo + (hi - lo) * i / nscan;
        double p = prod(k);
        if (p > best) {
            best = p;
            bestk = k;
        }
    }
    double a = bestk - (hi - lo) / nscan, b = bestk + (hi - lo) / nscan;
    for (int it = 0; it < 200; ++it) {
        double m1 = a + (b - a) / 3, m2 = b - (b - a) / 3;
        if (prod(m1) > prod(m2))
            b = m2;
        else
            a = m1;
    }
    best = std::max(best, prod(0.5 * (a + b)));

    ProductBound out;
    out.measured_min = best;
    int f1 = std::max(0, (M - 2) / 2);
    double b1 = std::exp(-2.0 * std::lgamma(double(f1) + 1.0)) / std::pow(gap, M - 2);
    double b2 = std::exp(-std::lgamma(double(M))) / std::pow(gap, M - 1);
    out.paper_bound = std::max(b1, b2);
    return out;
}

// ---------------------------------------------------------------------------
// structural regression: with every r = 0 the coupling chain dies after
// m-1 applications

inline double reflection_annihilation_residual(const FormOperator& op,
                                               const CoefficientVector& g) {
    CoefficientVector p = g;
    for (int n = 0; n < op.m() - 1; ++n) p = op.apply_R(p);
    double gn = coeff_norm(op.grid(), g);
    return coeff_norm(op.grid(), p) / std::max(gn, 1e-300);
}

}  // namespace ctm
