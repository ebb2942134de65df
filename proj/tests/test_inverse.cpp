#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "cubicstring/inverse.hpp"

using namespace cubicstring;

namespace {

// shared pure-step data set (two-to-one limit ratio of the wave speeds)
const ScatteringData& step_data() {
    static const ScatteringData d = [] {
        Potential p(1.0, 8.0, 1.0);
        return compute_scattering_data(p, 30.0, 96, JostBackend::Auto, 0.0);
    }();
    return d;
}

const Potential& step_potential() {
    static const Potential p(1.0, 8.0, 1.0);
    return p;
}

}  // namespace

TEST_SUITE_BEGIN("inverse");

TEST_CASE("data grid is graded then uniform; window tapers to zero") {
    const auto g = make_data_tau_grid(40.0, 128);
    CHECK(g.size() == 128);
    CHECK(g.front() > 0.0);
    CHECK(g.back() == doctest::Approx(40.0));
    for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] > g[i - 1]);

    CHECK(taper_window(0.0, 10.0) == 1.0);
    CHECK(taper_window(6.9, 10.0) == 1.0);
    CHECK(taper_window(10.0, 10.0) == 0.0);
    CHECK(taper_window(12.0, 10.0) == 0.0);
    const double mid = taper_window(8.5, 10.0);
    CHECK(mid > 0.0);
    CHECK(mid < 1.0);
}

TEST_CASE("weight rows reproduce the ray quadrature functionals") {
    const auto tau = make_data_tau_grid(25.0, 80);
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int k = 0; k < 3; ++k) {
        RayDensity d;
        d.ray_k = k;
        d.tau = tau;
        d.values.resize(tau.size());
        for (std::size_t j = 0; j < tau.size(); ++j)
            d.values[j] = cplx(U(rng), U(rng)) * taper_window(tau[j], tau.back());

        detail::InterpWeights iw(tau);
        for (cplx lam : {0.7 * std::exp(cplx(0, -1.2)), cplx(1.3, 0.4), cplx(-0.8, 0.9),
                         cplx(0.05, -0.02)}) {
            cplx truth;
            try {
                truth = cauchy_integral(d, lam);
            } catch (const std::invalid_argument&) {
                continue;  // point fell on this ray
            }
            const auto row = detail::cauchy_weight_row(iw, k, false, lam);
            cplx acc = 0;
            for (std::size_t j = 0; j < tau.size(); ++j) acc += row[j] * d.values[j];
            CHECK(std::abs(acc - truth) < 1e-12);
        }
        for (std::size_t ti : {std::size_t(0), std::size_t(5), std::size_t(40), tau.size() - 2}) {
            for (RaySide side : {RaySide::Left, RaySide::Right}) {
                const cplx truth = boundary_value(d, tau[ti], side);
                const auto row = detail::boundary_weight_row(iw, ti, side);
                cplx acc = 0;
                for (std::size_t j = 0; j < tau.size(); ++j) acc += row[j] * d.values[j];
                CHECK(std::abs(acc - truth) < 1e-12);
            }
        }
    }
}

TEST_CASE("matched limits give the trivial field") {
    const auto [s1s, s2s] = step_coefficients(1.0);
    CHECK(std::abs(s1s) < 1e-14);
    CHECK(std::abs(s2s) < 1e-14);

    Potential p(1.0, 1.0, 1.0);
    const auto data = compute_scattering_data(p, 20.0, 64, JostBackend::Auto, 0.0);
    double smax = 0.0;
    for (std::size_t j = 0; j < data.tau_grid.size(); ++j)
        smax = std::max({smax, std::abs(data.s1[j]), std::abs(data.s2[j])});
    CHECK(smax < 1e-12);

    const auto sys = assemble_direct(data, 0.7);
    const auto sol = solve_system(sys);
    CHECK_FALSE(sol.flagged);
    CHECK(sys.conditioning < 1e2);
    for (std::size_t j = 0; j < sol.v1.size(); j += 9) {
        const cplx it(0, sys.tau[j]);
        const cplx a = reflect_v(p, it, 1, 0.7, JostBackend::Auto).value;
        const cplx b = reflect_v(p, it, 2, 0.7, JostBackend::Auto).value;
        CHECK(std::abs(sol.v1[j] - a) < 1e-6);
        CHECK(std::abs(sol.v2[j] - b) < 1e-6);
    }
    // With vanishing jump data every difference density is zero, so the
    // reconstructed sectional function collapses to 1/Q and psi0 to 1.
    const cplx lam(0, -0.3);
    CHECK(std::abs(reconstruct_psi0(sys, sol, lam) - 1.0) < 1e-8);
}

TEST_CASE("step profile: system shape, conditioning, and round trip") {
    const auto& data = step_data();
    const auto& p = step_potential();
    const auto sys = assemble_direct(data, 0.8);
    const std::size_t N = data.tau_grid.size();
    CHECK(sys.matrix.rows() == 2 * static_cast<Eigen::Index>(N));
    CHECK(sys.matrix.cols() == 2 * static_cast<Eigen::Index>(N));
    CHECK(sys.conditioning < 1e3);

    const auto sol = solve_system(sys);
    CHECK_FALSE(sol.flagged);
    for (std::size_t j = 0; j < N; j += 7) {
        const cplx it = cplx(0, sys.tau[j]);
        const cplx a = reflect_v(p, it, 1, 0.8, JostBackend::Auto).value;
        const cplx b = reflect_v(p, it, 2, 0.8, JostBackend::Auto).value;
        CHECK(std::abs(sol.v1[j] - a) < 1e-6 * std::max(1.0, std::abs(a)));
        CHECK(std::abs(sol.v2[j] - b) < 1e-6 * std::max(1.0, std::abs(b)));
    }
    const cplx lam(0, -0.2);
    const cplx psi = reconstruct_psi0(sys, sol, lam);
    const cplx ref = reflect_v(p, lam, 0, 0.8, JostBackend::Auto).value *
                     std::exp(cplx(0, 1) * lam * p.n_plus() * 0.8);
    CHECK(std::abs(psi - ref) < 1e-6);
}

TEST_CASE("full-profile subtraction model reproduces the step solution") {
    const auto& data = step_data();
    const auto& p = step_potential();
    const auto pm = make_profile_model(p, data.tau_grid, JostBackend::Auto);
    const auto sys = assemble_direct(data, 0.8, {}, {}, &pm);
    const auto sol = solve_system(sys);
    CHECK_FALSE(sol.flagged);
    for (std::size_t j = 0; j < sol.v1.size(); j += 11) {
        const cplx it = cplx(0, sys.tau[j]);
        const cplx a = reflect_v(p, it, 1, 0.8, JostBackend::Auto).value;
        CHECK(std::abs(sol.v1[j] - a) < 1e-6 * std::max(1.0, std::abs(a)));
    }
    const cplx lam(0, -0.35);
    const cplx psi = reconstruct_psi0(sys, sol, lam);
    const cplx ref = reflect_v(p, lam, 0, 0.8, JostBackend::Auto).value *
                     std::exp(cplx(0, 1) * lam * p.n_plus() * 0.8);
    CHECK(std::abs(psi - ref) < 1e-6);
}

TEST_CASE("dual side reduces to the reflected engine") {
    const auto& data = step_data();
    const Potential pr = reflect_potential(step_potential());
    CHECK(pr.m_plus() == doctest::Approx(8.0));
    CHECK(pr.m_minus() == doctest::Approx(1.0));

    const auto sys = assemble_dual(data, -0.6);
    const auto sol = solve_system(sys);
    CHECK_FALSE(sol.flagged);
    CHECK(sys.conditioning < 1e3);
    for (std::size_t j = 0; j < sol.v1.size(); j += 13) {
        const cplx it = cplx(0, sys.tau[j]);
        const cplx a = reflect_v(pr, it, 1, 0.6, JostBackend::Auto).value;
        CHECK(std::abs(sol.v1[j] - a) < 1e-6 * std::max(1.0, std::abs(a)));
    }
    const cplx lam(0, -0.25);
    const cplx psi = reconstruct_psi0(sys, sol, lam);
    const cplx ref = reflect_v(pr, lam, 0, 0.6, JostBackend::Auto).value *
                     std::exp(cplx(0, 1) * lam * pr.n_plus() * 0.6);
    CHECK(std::abs(psi - ref) < 1e-6);
}

TEST_CASE("manufactured pole residues are recovered exactly") {
    ScatteringData data = step_data();
    data.mu = {0.9};
    data.nu = {-1.1};
    auto sys = assemble_direct(data, 0.8);
    const std::size_t N = data.tau_grid.size();
    CHECK(sys.matrix.rows() == 2 * static_cast<Eigen::Index>(N) + 2);
    CHECK(sys.n_mu == 1);
    CHECK(sys.n_nu == 1);

    const cplx R1(0.3, -0.2), R2(0.1, 0.4);
    Eigen::VectorXcd y = sys.dressed_target;
    y[2 * N] = R1;
    y[2 * N + 1] = R2;
    sys.rhs = sys.matrix * y;
    const auto sol = solve_system(sys);
    CHECK_FALSE(sol.flagged);
    REQUIRE(sol.res_mu.size() == 1);
    REQUIRE(sol.res_nu.size() == 1);
    CHECK(std::abs(sol.res_mu[0] - R1) < 1e-6);
    CHECK(std::abs(sol.res_nu[0] - R2) < 1e-6);
}

TEST_CASE("phase-shift extraction recovers a synthetic optical-length excess") {
    const double delta = 0.02;
    const auto tau = make_data_tau_grid(40.0, 128);
    const auto [s1s, s2s] = step_coefficients(2.0);
    (void)s2s;
    std::vector<cplx> s1(tau.size());
    const double s3 = std::sqrt(3.0);
    for (std::size_t j = 0; j < tau.size(); ++j)
        s1[j] = s1s * std::exp(cplx(0, s3 * delta * tau[j]));
    CHECK(extract_phase_shift(tau, s1, 2.0) == doctest::Approx(delta).epsilon(1e-8));
}

TEST_CASE("mini round trip: step profile recovered along the abscissa grid") {
    const auto& data = step_data();
    std::vector<double> xg;
    for (int i = 0; i < 14; ++i) xg.push_back(0.2 + 2.2 * i / 13.0);
    const auto f = reconstruct_field(data, HalfAxis::Direct, xg);
    CHECK_FALSE(f.any_flagged);
    for (std::size_t i = 0; i < xg.size(); ++i) {
        CHECK(f.conditioning[i] < 1e3);
        CHECK(std::abs(f.m_ode[i] - 1.0) < 5e-3);
    }
    const auto rec = recover_m(f);
    for (std::size_t i = 0; i < xg.size(); ++i)
        CHECK(std::abs(rec.route_b[i] - 1.0) < 5e-3);
}

TEST_CASE("invalid inputs are rejected") {
    ScatteringData bad = step_data();
    bad.s1.pop_back();
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    ScatteringData tiny = step_data();
    tiny.tau_grid.resize(1);
    tiny.r0.resize(1);
    tiny.s1.resize(1);
    tiny.s2.resize(1);
    tiny.r0_dual.resize(1);
    tiny.s1_dual.resize(1);
    tiny.s2_dual.resize(1);
    CHECK_THROWS_AS(tiny.validate(), std::invalid_argument);
    CHECK_THROWS_AS(assemble_direct(tiny, 0.5), std::invalid_argument);

    CHECK_THROWS_AS(assemble_direct(step_data(), -0.5), std::invalid_argument);
    CHECK_THROWS_AS(assemble_direct(step_data(), 1e6), std::invalid_argument);
    CHECK_THROWS_AS(reconstruct_field(step_data(), HalfAxis::Direct, {0.0, 0.1}),
                    std::invalid_argument);
}

TEST_SUITE_END();
