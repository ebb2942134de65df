#include <doctest.h>

#include <cmath>
#include <complex>

#include "cubicstring/jost.hpp"

using namespace cubicstring;

namespace {

Potential step_kappa2() { return Potential(1.0, 8.0, 1.0); }

Potential bump_potential(double amp = 0.05) {
    Perturbation pert;
    pert.kind = Perturbation::Kind::GaussianBumps;
    pert.bumps.push_back({1.0, 0.5, amp});
    return Potential(1.0, 8.0, 1.0, pert);
}

Potential two_sided_bumps() {
    Perturbation pert;
    pert.kind = Perturbation::Kind::GaussianBumps;
    pert.bumps.push_back({1.0, 0.5, 0.05});
    pert.bumps.push_back({-1.2, 0.6, 0.04});
    return Potential(1.0, 8.0, 1.0, pert);
}

}  // namespace

TEST_SUITE_BEGIN("jost");

TEST_CASE("pure step: v is the plane wave on the right half-axis") {
    auto p = step_kappa2();
    const cplx lambda(0.11, 0.05);
    const cplx iz = cplx(0, 1) * lambda * p.n_plus();
    for (int k = 0; k < 3; ++k) {
        for (double x : {0.0, 0.7, 2.5}) {
            auto r = solve_v_neumann(p, lambda, k, x);
            const cplx e = std::exp(iz * zeta(k) * x);
            CHECK(std::abs(r.eval.value - e) < 1e-13);
            CHECK(std::abs(r.eval.d1 - iz * zeta(k) * e) < 1e-13);
            CHECK(std::abs(r.eval.d2 - iz * zeta(k) * iz * zeta(k) * e) < 1e-13);
            CHECK(r.diag.terms_used == 1);
        }
    }
    CHECK_THROWS_AS(solve_v(p, cplx(0, 0), 0, 0.0), std::invalid_argument);
}

TEST_CASE("pure step: u is the plane wave on the left half-axis") {
    auto p = step_kappa2();
    const cplx lambda(0.08, -0.03);
    const cplx iz = cplx(0, 1) * lambda * p.n_minus();
    for (int k = 0; k < 3; ++k) {
        for (double x : {0.0, -0.9, -3.0}) {
            auto r = solve_u_neumann(p, lambda, k, x);
            const cplx e = std::exp(iz * zeta(k) * x);
            CHECK(std::abs(r.eval.value - e) < 1e-13);
            CHECK(std::abs(r.eval.d1 - iz * zeta(k) * e) < 1e-13);
            CHECK(std::abs(r.eval.d2 - iz * zeta(k) * iz * zeta(k) * e) < 1e-13);
            CHECK(r.diag.terms_used == 1);
        }
    }
}

TEST_CASE("globally constant coefficient: both families are plane waves everywhere") {
    Potential p(2.0, 2.0, 1.0);
    const cplx lambda(0.15, 0.0);
    const cplx iz = cplx(0, 1) * lambda * p.n_plus();
    for (double x : {-1.3, 0.4, 2.0}) {
        auto rv = solve_v_neumann(p, lambda, 1, x);
        auto ru = solve_u_neumann(p, lambda, 1, x);
        const cplx e = std::exp(iz * zeta(1) * x);
        CHECK(std::abs(rv.eval.value - e) < 1e-12);
        CHECK(std::abs(ru.eval.value - e) < 1e-12);
    }
}

TEST_CASE("Neumann and ODE backends agree for the bump potential") {
    auto p = bump_potential();
    for (cplx lambda : {cplx(0.0, 0.1), cplx(0.07, 0.02), cplx(-0.05, -0.06)}) {
        for (int k = 0; k < 3; ++k) {
            auto a = solve_v_neumann(p, lambda, k, 0.0);
            auto b = solve_v_ode(p, lambda, k, 0.0);
            CHECK(std::abs(a.eval.value - b.eval.value) / std::abs(b.eval.value) < 1e-7);
            CHECK(std::abs(a.eval.d1 - b.eval.d1) / std::abs(b.eval.d1) < 1e-7);
            CHECK(std::abs(a.eval.d2 - b.eval.d2) / std::abs(b.eval.d2) < 1e-7);
        }
    }
    auto q = two_sided_bumps();
    for (int k = 0; k < 3; ++k) {
        auto a = solve_u_neumann(q, cplx(0.03, -0.04), k, 0.0);
        auto b = solve_u_ode(q, cplx(0.03, -0.04), k, 0.0);
        CHECK(std::abs(a.eval.value - b.eval.value) / std::abs(b.eval.value) < 1e-7);
        CHECK(std::abs(a.eval.d1 - b.eval.d1) / std::abs(b.eval.d1) < 1e-7);
    }
}

TEST_CASE("Volterra equation residual") {
    auto p = bump_potential();
    const cplx lambda(0.0, 0.08);
    const int k = 0;
    const cplx z = lambda * p.n_plus();
    const cplx iz = cplx(0, 1) * z;
    for (double x : {0.0, 0.8}) {
        auto r = solve_v_neumann(p, lambda, k, x);
        // independent check: quadrature over ODE-backend values
        auto integrand = [&](double t) {
            const cplx vt = solve_v_ode(p, lambda, k, t).eval.value;
            return s_eval(2, iz * (x - t)) * (p(t) / p.m_plus() - 1.0) * vt;
        };
        const double hi = p.support_edge_plus(1e-12);
        const cplx rhs = std::exp(iz * zeta(k) * x) - iz * integrate(integrand, x, hi, 1e-11);
        CHECK(std::abs(r.eval.value - rhs) < 1e-9);
    }
}

TEST_CASE("asymptotic flatness beyond the perturbation support") {
    auto p = bump_potential();
    const cplx lambda(0.05, 0.02);
    const double far = p.support_edge_plus() + 5.0 / p.a();
    for (int k = 0; k < 3; ++k) {
        const cplx val = psi(p, lambda, k, far);
        CHECK(std::abs(val - 1.0) < 1e-8);
    }
}

TEST_CASE("decay rate of v0 inside the upper decay sector") {
    auto p = bump_potential();
    const cplx lambda(0.02, 0.1);  // strictly inside the k=0 sector
    REQUIRE(in_omega(lambda, 0));
    const double rate = std::imag(lambda * zeta(0)) * p.n_plus();
    const double x1 = 6.0, x2 = 14.0;
    const double a1 = std::abs(solve_v(p, lambda, 0, x1).eval.value);
    const double a2 = std::abs(solve_v(p, lambda, 0, x2).eval.value);
    const double observed = -std::log(a2 / a1) / (x2 - x1);
    CHECK(observed == doctest::Approx(rate).epsilon(0.1));
}

TEST_CASE("psi growth at large lambda on the bisecting ray") {
    // For a positive bump the normalized solution does not tend to 1
    // pointwise along the imaginary axis: a stationary-phase estimate gives
    // log|psi| ~ |z| sigma_+(x)/3. Check that exponent (it doubles with
    // |lambda|) and that the a-priori envelope 2 exp(|z| sigma_+(0)) holds.
    auto p = bump_potential();
    const double x = 0.5;
    const double sig = sigma(p, x, Side::Plus);
    auto log_psi = [&](double T) {
        return std::log(std::abs(psi(p, cplx(0.0, T), 0, x, JostBackend::ODE)));
    };
    const double g6 = log_psi(6.0), g12 = log_psi(12.0);
    CHECK(g12 / g6 == doctest::Approx(2.0).epsilon(0.2));
    CHECK(g6 == doctest::Approx(6.0 * p.n_plus() * sig / 3.0).epsilon(0.3));
    CHECK(g12 < std::log(2.0) + 12.0 * p.n_plus() * sigma(p, 0.0, Side::Plus));
}

TEST_CASE("small-lambda limit recovers the quadratic-weight tail moment") {
    // resolves the recovery constants: (psi_0 - 1)/(i z_+)^3 -> -M_+(x) as
    // lambda -> 0, and (phi_0 - 1)/(i z_-)^3 -> +M_-(x), both with the
    // (x-t)^2/2 weight
    auto p = two_sided_bumps();
    const double x = 0.5;
    const cplx lambda(0.0, 0.01);
    {
        const cplx iz = cplx(0, 1) * lambda * p.n_plus();
        const cplx ratio = (psi(p, lambda, 0, x) - 1.0) / (iz * iz * iz);
        const double want = -M_profile(p, x, Side::Plus);
        CHECK(std::abs(ratio - want) / std::abs(want) < 5e-2);
    }
    {
        const double xm = 0.0;
        const cplx iz = cplx(0, 1) * lambda * p.n_minus();
        const cplx ratio = (phi(p, lambda, 0, xm) - 1.0) / (iz * iz * iz);
        const double want = M_profile(p, xm, Side::Minus);
        CHECK(std::abs(ratio - want) / std::abs(want) < 5e-2);
    }
}

TEST_CASE("kernel bounds: pure step") {
    auto p = step_kappa2();
    auto diag = kernel_bound_check(p, cplx(0.1, 0.05), 6, Side::Plus);
    // all iterated kernels beyond the first vanish; only the n=1 envelope
    // comparison contributes
    CHECK(diag.bound_margin <= 1.0 + 1e-12);
}

TEST_CASE("kernel bounds: bump potential stays below the factorial envelope") {
    auto p = bump_potential();
    for (Side side : {Side::Plus, Side::Minus}) {
        auto diag = kernel_bound_check(p, cplx(0.1, 0.0), 10, side);
        CHECK(diag.bound_margin <= 1.0 + 1e-9);
    }
}

TEST_SUITE_END();
