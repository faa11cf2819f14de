#pragma once

#include <functional>

#include "ctm/grid.hpp"
#include "ctm/numerics.hpp"

namespace ctm {

// Half-line projections in the dual variable. For samples g on a uniform
// grid (an x-field, or a k-profile with the k-grid playing the role of the
// axis), P_plus keeps the strictly positive dual frequencies and P_minus
// the rest; the zero bin goes to P_minus by convention. P_plus projects
// onto the Hardy class H^2(C_+) of the sampled axis.

inline std::vector<cplx> p_plus(const SpatialGrid& g, const std::vector<cplx>& v) {
    auto hat = dft(g, v);
    for (int j = 0; j < g.n; ++j)
        if (!(g.k(j) > 0)) hat[j] = 0;
    return idft(g, hat);
}

inline std::vector<cplx> p_minus(const SpatialGrid& g, const std::vector<cplx>& v) {
    auto hat = dft(g, v);
    for (int j = 0; j < g.n; ++j)
        if (g.k(j) > 0) hat[j] = 0;
    return idft(g, hat);
}

// || P_-( e^{+i y0 k} c(k + h0) f_+(k) ) ||_2  for f_+ in H^2(C_+)
// (pass plus_class = false for the mirrored quantity with f_- and P_+).
// The coefficient c is r or s from a scattering table or a closed form.
inline double interaction_norm(const SpatialGrid& g, const std::vector<cplx>& f_hardy,
                               bool plus_class, double y0,
                               const std::function<cplx(double)>& coeff, double h0) {
    std::vector<cplx> w(g.n);
    for (int j = 0; j < g.n; ++j) {
        double k = g.k(j);
        double phase = (plus_class ? 1.0 : -1.0) * y0 * k;
        w[j] = std::exp(iu * phase) * coeff(k + h0) * f_hardy[j];
    }
    auto proj = plus_class ? p_minus(g, w) : p_plus(g, w);
    return norm_l2(g, proj);
}

}  // namespace ctm
