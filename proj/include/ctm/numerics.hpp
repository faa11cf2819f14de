#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

namespace ctm {

using cplx = std::complex<double>;
inline constexpr double pi = 3.141592653589793238462643383279502884;
inline constexpr cplx iu{0.0, 1.0};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// least squares

struct LinearFit {
    double slope = 0;
    double intercept = 0;
    double r2 = 0;
};

inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ConfigError("fit_line: need >= 2 points");
    const size_t n = x.size();
    double mx = 0, my = 0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(n);
    my /= double(n);
    double sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ssres = 0;
    for (size_t i = 0; i < n; ++i) {
        double e = y[i] - (f.intercept + f.slope * x[i]);
        ssres += e * e;
    }
    f.r2 = (syy > 0) ? 1.0 - ssres / syy : 1.0;
    return f;
}

// Fit |y| ~ A e^{-beta t}; returns (beta, log A, r2) via log-linear fit.
// Values at or below `floor` are dropped.
struct DecayFit {
    double beta = 0;
    double log_amplitude = 0;
    double r2 = 0;
    size_t points = 0;
};

inline DecayFit fit_exponential_decay(const std::vector<double>& t, const std::vector<double>& v,
                                      double floor = 1e-14) {
    std::vector<double> ts, ls;
    for (size_t i = 0; i < t.size(); ++i)
        if (v[i] > floor) {
            ts.push_back(t[i]);
            ls.push_back(std::log(v[i]));
        }
    DecayFit d;
    d.points = ts.size();
    if (ts.size() < 2) return d;
    LinearFit f = fit_line(ts, ls);
    d.beta = -f.slope;
    d.log_amplitude = f.intercept;
    d.r2 = f.r2;
    return d;
}

// ---------------------------------------------------------------------------
// quadrature (used by test oracles as well)

namespace detail {
template <class F>
double adaptive_simpson_rec(const F& f, double a, double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}
}  // namespace detail

template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol = 1e-12, int depth = 40) {
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    double whole = (b - a) / 6.0 * (fa + 4 * fm + fb);
    return detail::adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth);
}

// ---------------------------------------------------------------------------
// interpolation on uniform grids

// 4-point (cubic Lagrange) interpolation of uniformly sampled data.
// Points outside [x0, x0+(n-1)h] evaluate to `fill`.
class CubicInterp {
public:
    CubicInterp(double x0, double h, const std::vector<cplx>& values, cplx fill = 0.0)
        : x0_(x0), h_(h), v_(values), fill_(fill) {}

    cplx operator()(double x) const {
        const int n = int(v_.size());
        double s = (x - x0_) / h_;
        if (s < 0.0 || s > double(n - 1)) return fill_;
        int i1 = std::clamp(int(std::floor(s)), 1, n - 3);
        double u = s - double(i1);
        // Lagrange weights for the stencil {i1-1, i1, i1+1, i1+2}
        double wm = -u * (u - 1) * (u - 2) / 6.0;
        double w0 = (u + 1) * (u - 1) * (u - 2) / 2.0;
        double w1 = -u * (u + 1) * (u - 2) / 2.0;
        double w2 = u * (u + 1) * (u - 1) / 6.0;
        return wm * v_[i1 - 1] + w0 * v_[i1] + w1 * v_[i1 + 1] + w2 * v_[i1 + 2];
    }

private:
    double x0_, h_;
    std::vector<cplx> v_;
    cplx fill_;
};

// ---------------------------------------------------------------------------
// deterministic randomness

inline std::mt19937_64 make_rng(uint64_t seed) { return std::mt19937_64(seed); }

inline cplx random_unit_cplx(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    return cplx(u(rng), u(rng));
}

// ---------------------------------------------------------------------------
// parallel loop helper

inline void parallel_for(int n, const std::function<void(int)>& body, int threads = 0) {
    if (threads <= 0) threads = int(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&]() {
            for (;;) {
                int i = next.fetch_add(1);
                if (i >= n) return;
                body(i);
            }
        });
    for (auto& th : pool) th.join();
}

}  // namespace ctm
