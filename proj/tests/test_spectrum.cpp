#include <catch2/catch_amalgamated.hpp>

#include "ctm/spectrum.hpp"

using namespace ctm;
using Catch::Approx;

namespace {

// linearization of the cubic NLS around its soliton sqrt(2w) sech(sqrt(w) x):
// U = -2 phi^2 = -4w sech^2(sqrt(w) x), W = phi^2 = 2w sech^2(sqrt(w) x)
MatrixPotential cubic_soliton_potential(double w) {
    MatrixPotential mp;
    mp.U = ScalarPotential::sech_square(-4.0 * w, std::sqrt(w));
    mp.W = ScalarPotential::sech_square(2.0 * w, std::sqrt(w));
    return mp;
}

}  // namespace

TEST_CASE("zero potential has no discrete spectrum") {
    auto sp = scalar_discrete_spectrum(ScalarPotential::zero());
    REQUIRE(sp.states.empty());
}

TEST_CASE("Poschl-Teller depth 1: lambda = -1, eigenfunction sech/sqrt(2)") {
    auto sp = scalar_discrete_spectrum(ScalarPotential::poschl_teller(1));
    REQUIRE(sp.states.size() == 1);
    const auto& st = sp.states[0];
    REQUIRE(std::abs(st.lambda - cplx(-1.0)) < 1e-7);
    REQUIRE(st.residual < 1e-6);
    double err = 0, nrm = 0;
    for (size_t i = 0; i < st.z1.size(); ++i) {
        double x = st.x0 + i * st.h;
        cplx expect = 1.0 / (std::sqrt(2.0) * std::cosh(x));
        // the numerical eigenfunction may carry a global sign
        err += std::norm(std::abs(st.z1[i]) - std::abs(expect));
        nrm += std::norm(expect);
    }
    REQUIRE(std::sqrt(err / nrm) < 1e-6);
}

TEST_CASE("Poschl-Teller depth 2 has two bound states at -4 and -1") {
    auto sp = scalar_discrete_spectrum(ScalarPotential::poschl_teller(2));
    REQUIRE(sp.states.size() == 2);
    REQUIRE(std::abs(sp.states[0].lambda - cplx(-4.0)) < 1e-6);
    REQUIRE(std::abs(sp.states[1].lambda - cplx(-1.0)) < 1e-6);
}

TEST_CASE("matrix spectrum with W=0 reduces to shifted scalar pairs") {
    MatrixPotential mp;
    mp.U = ScalarPotential::poschl_teller(1);
    mp.W = ScalarPotential::zero();
    auto sp = matrix_discrete_spectrum(mp, 2.0);
    // scalar eigenvalue -1, omega 2 -> matrix pair {+1, -1}
    std::vector<double> lams;
    for (const auto& st : sp.states)
        if (st.role == ChainRole::Ordinary) {
            REQUIRE(std::abs(st.lambda.imag()) < 1e-8);
            lams.push_back(st.lambda.real());
        }
    std::sort(lams.begin(), lams.end());
    REQUIRE(lams.size() == 2);
    REQUIRE(lams[0] == Approx(-1.0).margin(1e-6));
    REQUIRE(lams[1] == Approx(1.0).margin(1e-6));
    REQUIRE(sp.n_real_pairs == 1);
    REQUIRE(sp.n_imag_pairs == 0);
    REQUIRE(sp.dim_kernel == 0);
    // block support: the +1 mode lives in the first component
    for (const auto& st : sp.states) {
        if (st.role != ChainRole::Ordinary) continue;
        double n1 = detail::grid_norm(st.z1, st.h), n2 = detail::grid_norm(st.z2, st.h);
        if (st.lambda.real() > 0)
            REQUIRE(n2 < 1e-6 * n1);
        else
            REQUIRE(n1 < 1e-6 * n2);
    }
}

TEST_CASE("cubic-soliton linearization: generalized kernel of dimension 4") {
    double w = 1.0;
    auto sp = matrix_discrete_spectrum(cubic_soliton_potential(w), w);
    REQUIRE(sp.dim_kernel == 2);
    REQUIRE(sp.dim_kernel_sq == 4);
    REQUIRE(sp.n_imag_pairs == 0);
    REQUIRE(sp.n_real_pairs == 0);
    int n_kernel = 0, n_gen = 0;
    for (const auto& st : sp.states) {
        if (st.role == ChainRole::Kernel) {
            ++n_kernel;
            REQUIRE(st.residual < 1e-6);
        }
        if (st.role == ChainRole::Generalized) {
            ++n_gen;
            REQUIRE(st.residual < 1e-4);  // chain residual ||H Z1 - Z0||
            REQUIRE_FALSE(st.y1.empty());
        }
    }
    REQUIRE(n_kernel == 2);
    REQUIRE(n_gen == 2);

    // kernel span contains [phi; -phi] and [phi'; phi'] (up to normalization)
    auto phi = [&](double x) { return std::sqrt(2.0 * w) / std::cosh(std::sqrt(w) * x); };
    auto dphi = [&](double x) {
        double u = std::sqrt(w) * x;
        return -std::sqrt(2.0 * w) * std::sqrt(w) * std::tanh(u) / std::cosh(u);
    };
    const BoundState* kref = nullptr;
    for (const auto& st : sp.states)
        if (st.role == ChainRole::Kernel) {
            kref = &st;
            break;
        }
    REQUIRE(kref != nullptr);
    const int nn = int(kref->z1.size());
    for (int which = 0; which < 2; ++which) {
        std::vector<cplx> t1(nn), t2(nn);
        double nrm = 0;
        for (int i = 0; i < nn; ++i) {
            double x = kref->x0 + i * kref->h;
            cplx a = which == 0 ? cplx(phi(x)) : cplx(dphi(x));
            t1[i] = a;
            t2[i] = which == 0 ? -a : a;
            nrm += std::norm(t1[i]) + std::norm(t2[i]);
        }
        nrm = std::sqrt(nrm * kref->h);
        for (int i = 0; i < nn; ++i) {
            t1[i] /= nrm;
            t2[i] /= nrm;
        }
        for (const auto& st : sp.states) {
            if (st.role != ChainRole::Kernel) continue;
            cplx d = 0;
            for (int i = 0; i < nn; ++i) {
                double x = kref->x0 + i * kref->h;
                d += t1[i] * std::conj(st.z1_at(x)) + t2[i] * std::conj(st.z2_at(x));
            }
            d *= kref->h;
            for (int i = 0; i < nn; ++i) {
                double x = kref->x0 + i * kref->h;
                t1[i] -= d * st.z1_at(x);
                t2[i] -= d * st.z2_at(x);
            }
        }
        double rem = 0;
        for (int i = 0; i < nn; ++i) rem += std::norm(t1[i]) + std::norm(t2[i]);
        REQUIRE(std::sqrt(rem * kref->h) < 1e-4);
    }
}

TEST_CASE("septic-power soliton linearization has an unstable imaginary pair") {
    // supercritical power sigma = 3: U = -(sigma+1)^2 w sech^2(sigma sqrt(w) x),
    // W = sigma (sigma+1) w sech^2(...)
    double w = 1.0, sigma = 3.0;
    MatrixPotential mp;
    mp.U = ScalarPotential::sech_square(-(sigma + 1) * (sigma + 1) * w, sigma * std::sqrt(w));
    mp.W = ScalarPotential::sech_square(sigma * (sigma + 1) * w, sigma * std::sqrt(w));
    auto sp = matrix_discrete_spectrum(mp, w);
    REQUIRE(sp.n_imag_pairs >= 1);
    double growth = 0;
    for (const auto& st : sp.states)
        if (st.role == ChainRole::Ordinary) growth = std::max(growth, st.lambda.imag());
    REQUIRE(growth > 0.1);
}
