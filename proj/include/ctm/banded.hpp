#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ctm/numerics.hpp"

namespace ctm {

// Banded LU (no pivoting) for FD operators. Storage: row r holds the
// coefficients of columns r-bw .. r+bw.
template <class T>
class BandedMatrix {
public:
    BandedMatrix(int n, int bw) : n_(n), bw_(bw), a_(size_t(n) * (2 * bw + 1), T(0)) {}

    int size() const { return n_; }
    int bandwidth() const { return bw_; }

    T& at(int r, int c) { return a_[size_t(r) * (2 * bw_ + 1) + (c - r + bw_)]; }
    T get(int r, int c) const {
        if (std::abs(c - r) > bw_) return T(0);
        return a_[size_t(r) * (2 * bw_ + 1) + (c - r + bw_)];
    }

    void factor() {
        for (int i = 0; i < n_; ++i) {
            T piv = at(i, i);
            if (std::abs(piv) < 1e-300) throw NumericalError("BandedMatrix: zero pivot");
            for (int r = i + 1; r <= std::min(n_ - 1, i + bw_); ++r) {
                T f = at(r, i) / piv;
                at(r, i) = f;  // store multiplier
                for (int c = i + 1; c <= std::min(n_ - 1, i + bw_); ++c)
                    at(r, c) -= f * at(i, c);
            }
        }
        factored_ = true;
    }

    void solve(std::vector<T>& b) const {
        if (!factored_) throw NumericalError("BandedMatrix: factor() first");
        for (int i = 0; i < n_; ++i)
            for (int r = i + 1; r <= std::min(n_ - 1, i + bw_); ++r)
                b[r] -= const_cast<BandedMatrix*>(this)->at(r, i) * b[i];
        for (int i = n_ - 1; i >= 0; --i) {
            T acc = b[i];
            for (int c = i + 1; c <= std::min(n_ - 1, i + bw_); ++c)
                acc -= const_cast<BandedMatrix*>(this)->at(i, c) * b[c];
            b[i] = acc / const_cast<BandedMatrix*>(this)->at(i, i);
        }
    }

private:
    int n_, bw_;
    bool factored_ = false;
    std::vector<T> a_;
};

}  // namespace ctm
