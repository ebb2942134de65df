// Acceptance gate: nine graded criteria, one pass/fail line each, pinned
// tolerances. Exits nonzero if any criterion fails.
#include <chrono>
#include <cstdio>
#include <random>
#include <string>

#include "cubicstring/inverse.hpp"
#include "cubicstring/quadrature.hpp"

using namespace cubicstring;

namespace {

int failures = 0;

void line(int idx, bool pass, const std::string& detail) {
    std::printf("criterion %d: %s  %s\n", idx, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Potential step_profile() { return Potential(1.0, 8.0, 1.0); }

Potential bump_profile() {
    Perturbation pert;
    pert.kind = Perturbation::Kind::GaussianBumps;
    pert.bumps.push_back({1.0, 0.5, 0.05});
    return Potential(1.0, 8.0, 1.0, pert);
}

// --------------------------------------------------------------------------

void criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    using CL = std::complex<long double>;
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> coord(-5.0, 5.0);
    long double worst_ident = 0, worst_euler = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        cplx z(coord(rng), coord(rng));
        if (std::abs(z) > 5.0) z *= 5.0 / std::abs(z);
        const CL zl(z.real(), z.imag());
        const auto t = s_triple_t<long double>(zl);
        const CL ident =
            t.s0 * t.s0 * t.s0 + t.s1 * t.s1 * t.s1 + t.s2 * t.s2 * t.s2 - 3.0L * t.s0 * t.s1 * t.s2;
        worst_ident = std::max(worst_ident, std::abs(ident - 1.0L));
        for (int k = 0; k < 3; ++k) {
            const CL zk = zeta_t<long double>(k);
            const CL rec = t.s0 + zk * t.s1 + zk * zk * t.s2;
            worst_euler = std::max(worst_euler, std::abs(std::exp(zl * zk) - rec));
        }
    }
    double worst_fd = 0;
    const double h = 1e-6;
    for (int trial = 0; trial < 100; ++trial) {
        cplx z(coord(rng) * 0.6, coord(rng) * 0.6);
        for (int k = 0; k < 3; ++k) {
            const cplx fd = (s_eval(k, z + h) - s_eval(k, z - h)) / (2.0 * h);
            worst_fd = std::max(worst_fd, std::abs(fd - s_eval((k + 2) % 3, z)));
        }
    }
    const double dt = seconds_since(t0);
    const bool pass = worst_ident <= 1e-12 && worst_euler <= 1e-12 && worst_fd <= 1e-8 && dt < 1.0;
    line(1, pass,
         "generalized trig identities: determinant " + num(double(worst_ident)) +
             " (<=1e-12), recomposition " + num(double(worst_euler)) + " (<=1e-12), derivative cycle " +
             num(worst_fd) + " (<=1e-8), " + num(dt) + "s (<1s)");
}

void criterion_2() {
    const auto t0 = std::chrono::steady_clock::now();
    const Potential p = bump_profile();
    const double radius = 0.8 * std::min(validity_disk(p).radius_plus, validity_disk(p).radius_minus);
    double worst_rel = 0;
    for (int j = 0; j < 20; ++j) {
        const double r = radius * (0.15 + 0.85 * j / 19.0);
        const cplx lam = r * std::exp(cplx(0, 0.37 + 0.29 * j));
        for (int k = 0; k < 3; ++k) {
            const auto a = solve_v_neumann(p, lam, k, 0.0);
            const auto b = solve_v_ode(p, lam, k, 0.0);
            worst_rel = std::max(worst_rel,
                                 std::abs(a.eval.value - b.eval.value) / std::abs(b.eval.value));
        }
        if (j % 7 == 0) {
            const auto a = solve_u_neumann(p, lam, 0, 0.0);
            const auto b = solve_u_ode(p, lam, 0, 0.0);
            worst_rel = std::max(worst_rel,
                                 std::abs(a.eval.value - b.eval.value) / std::abs(b.eval.value));
        }
    }
    double worst_margin = 0;
    for (Side side : {Side::Plus, Side::Minus}) {
        const auto diag = kernel_bound_check(p, cplx(0.08, 0.04), 10, side);
        worst_margin = std::max(worst_margin, diag.bound_margin);
    }
    const double dt = seconds_since(t0);
    const bool pass = worst_rel <= 1e-6 && worst_margin <= 1.0 && dt < 30.0;
    line(2, pass,
         "series vs integrator backends: worst relative error " + num(worst_rel) +
             " (<=1e-6) over 20 spectral points, kernel-bound margin " + num(worst_margin) +
             " (<=1) for orders up to 10, " + num(dt) + "s (<30s)");
}

void criterion_3() {
    const Potential p = bump_profile();
    const double s3 = std::sqrt(3.0);
    double worst_ratio = 0;
    for (cplx lam : {cplx(0.04, -0.02), cplx(-0.03, 0.05), cplx(0.06, 0.01)}) {
        // the verified constant carries a minus sign with this column order
        const cplx want = -3.0 * s3 * p.m_plus() * lam * lam * lam;
        for (double x : {0.0, 0.4, 1.1}) {
            const auto a = solve_v(p, lam, 0, x).eval;
            const auto b = solve_v(p, lam, 1, x).eval;
            const auto c = solve_v(p, lam, 2, x).eval;
            worst_ratio = std::max(worst_ratio, std::abs(wronskian3(a, b, c) / want - 1.0));
        }
    }
    const auto rep = pair_wronskian_identity_check(p, cplx(0.04, -0.02));
    const bool pass = worst_ratio <= 1e-6 && rep.x_spread <= 1e-6;
    line(3, pass,
         "Wronskian constants: triple ratio deviation " + num(worst_ratio) +
             " (<=1e-6), pair-identity x-spread " + num(rep.x_spread) + " (<=1e-6)");
}

void criterion_4() {
    double worst_det = 0, worst_j = 0, worst_uni = 0, worst_dual_inv_step = 0, worst_en = 0,
           worst_dual_uni = 0, worst_rec_sym = 0, worst_rec_printed = 0;
    const Eigen::Matrix3cd J = involution_J();
    for (int which = 0; which < 2; ++which) {
        const Potential p = which == 0 ? step_profile() : bump_profile();
        for (int j = 0; j < 20; ++j) {
            const double r = 0.02 + 0.13 * j / 19.0;
            const cplx lam = (j % 3 == 0) ? cplx(r, 0.0) : r * std::exp(cplx(0, 0.41 + 0.31 * j));
            const auto T = transition_matrix(p, lam);
            const auto Tc = (std::conj(lam) == lam) ? T : transition_matrix(p, std::conj(lam));
            const double k2 = T.kappa * T.kappa;
            worst_det = std::max(worst_det, std::abs(T.t.determinant() - p.m_minus() / p.m_plus()) /
                                                (p.m_minus() / p.m_plus()));
            worst_j = std::max(worst_j, (T.t * J * Tc.t.adjoint() - k2 * J).norm());
            const auto c = coefficients(T);
            const auto cc = coefficients(Tc);
            worst_uni = std::max(worst_uni, unitarity_residual(c, cc, T.kappa));
            const auto D = dual_matrix(p, T);
            if (which == 0)
                worst_dual_inv_step = std::max(
                    worst_dual_inv_step, (D.t * T.t - Eigen::Matrix3cd::Identity()).norm());
            worst_en = std::max(worst_en, energetic_balance_check(p, lam));
            const auto Dc = dual_matrix(p, Tc);
            worst_dual_uni = std::max(
                worst_dual_uni, dual_unitarity_residual(coefficients(D), coefficients(Dc), T.kappa));
            const auto rec = reciprocity_check(p, lam);
            worst_rec_sym = std::max(worst_rec_sym, rec.symmetric);
            worst_rec_printed = std::max(worst_rec_printed, rec.printed);
        }
    }
    const bool pass = worst_det <= 1e-6 && worst_j <= 1e-6 && worst_uni <= 1e-6 &&
                      worst_dual_inv_step <= 1e-10 && worst_en <= 1e-6 && worst_dual_uni <= 1e-6 &&
                      worst_rec_sym <= 1e-6;
    line(4, pass,
         "conservation laws at 20 spectral samples, step and bump: det " + num(worst_det) +
             ", J-unitarity " + num(worst_j) + ", scalar unitarity " + num(worst_uni) +
             ", dual inverse (step) " + num(worst_dual_inv_step) + " (<=1e-10), energetic balance " +
             num(worst_en) + ", dual unitarity " + num(worst_dual_uni) +
             ", reciprocity symmetric " + num(worst_rec_sym) +
             " (all <=1e-6); printed-variant reciprocity reported: " + num(worst_rec_printed));
}

void criterion_5() {
    const Potential p = step_profile();
    const double s3 = std::sqrt(3.0);
    const auto T = transition_matrix(p, cplx(0.05, -0.03));
    const double r_corner = std::abs(T.t(0, 0) - cplx(7.0 / 3.0, 0.0));
    const double r_01 = std::abs(T.t(0, 1) - cplx(-2.0 / 3.0, s3 / 3.0));
    const double r_02 = std::abs(T.t(0, 2) - cplx(-2.0 / 3.0, -s3 / 3.0));
    const double r_det = std::abs(T.t.determinant() - 8.0);
    const bool pass = r_corner <= 1e-8 && r_01 <= 1e-8 && r_02 <= 1e-8 && r_det <= 1e-8;
    line(5, pass,
         "closed-form step oracle: corner " + num(r_corner) + ", off-diagonals " + num(r_01) + "/" +
             num(r_02) + ", determinant " + num(r_det) + " (all <=1e-8)");
}

void criterion_6() {
    // Sokhotski jump on an oscillatory density
    RayDensity d;
    d.ray_k = 2;
    d.tau = make_tau_grid(16.0, 128);
    d.values.resize(d.tau.size());
    for (std::size_t i = 0; i < d.tau.size(); ++i)
        d.values[i] = cplx(std::sin(d.tau[i]), std::cos(d.tau[i])) * std::exp(-0.3 * d.tau[i]);
    double worst_jump = 0;
    for (double t : {0.7, 3.3, 9.1}) {
        const cplx jump = boundary_value(d, t, RaySide::Left) - boundary_value(d, t, RaySide::Right);
        worst_jump = std::max(worst_jump, std::abs(jump - d.interp()(t)));
    }

    // principal value against a symmetric-excision oracle, two densities
    auto pv_oracle = [](const std::function<double(double)>& f, double t, double T) {
        auto excised = [&](double eps) {
            const double lo =
                integrate_real([&](double x) { return f(x) / (x - t); }, 0.0, t - eps, 1e-13);
            const double hi =
                integrate_real([&](double x) { return f(x) / (x - t); }, t + eps, T, 1e-13);
            return lo + hi;
        };
        const double e1 = excised(1e-3), e2 = excised(5e-4);
        return 2.0 * e2 - e1;
    };
    const double T = 10.0;
    double worst_pv = 0;
    {
        auto f = [](double x) { return 1.0 / (1.0 + x * x); };
        RayDensity dr;
        dr.ray_k = 0;
        dr.tau = make_tau_grid(T, 256);
        dr.values.resize(dr.tau.size());
        for (std::size_t i = 0; i < dr.tau.size(); ++i) dr.values[i] = f(dr.tau[i]);
        const double t = 1.0;
        const cplx pv =
            (boundary_value(dr, t, RaySide::Left) - 0.5 * dr.interp()(t)) * (2.0 * pi * cplx(0, 1));
        worst_pv = std::max(worst_pv, std::abs(pv.real() - pv_oracle(f, t, T)));
    }
    {
        auto f = [](double x) { return std::exp(-0.5 * (x - 2.0) * (x - 2.0)); };
        RayDensity dr;
        dr.ray_k = 0;
        dr.tau = make_tau_grid(T, 512);
        dr.values.resize(dr.tau.size());
        for (std::size_t i = 0; i < dr.tau.size(); ++i) dr.values[i] = f(dr.tau[i]);
        const double t = 2.5;
        const cplx pv =
            (boundary_value(dr, t, RaySide::Right) + 0.5 * dr.interp()(t)) * (2.0 * pi * cplx(0, 1));
        worst_pv = std::max(worst_pv, std::abs(pv.real() - pv_oracle(f, t, T)));
    }
    const bool pass = worst_jump <= 1e-10 && worst_pv <= 1e-8;
    line(6, pass,
         "boundary-value machinery: jump residual " + num(worst_jump) +
             " (<=1e-10), principal value vs excision oracle " + num(worst_pv) + " (<=1e-8)");
}

void criterion_7() {
    const auto t0 = std::chrono::steady_clock::now();
    const Potential p = step_profile();
    const auto data = compute_scattering_data(p, 40.0, 128, JostBackend::Auto, 0.0);
    double worst = 0;
    {
        std::vector<double> xg;
        for (int i = 0; i < 60; ++i) xg.push_back(3.0 * i / 59.0);
        const auto f = reconstruct_field(data, HalfAxis::Direct, xg);
        const auto r = recover_m(f);
        for (std::size_t i = 0; i < r.x.size(); ++i)
            worst = std::max(worst, std::abs(r.route_b[i] - p(r.x[i])) / p(r.x[i]));
    }
    {
        std::vector<double> xg;
        for (int i = 0; i < 60; ++i) xg.push_back(0.05 + (3.0 - 0.05) * i / 59.0);
        const auto f = reconstruct_field(data, HalfAxis::Dual, xg);
        const auto r = recover_m(f);
        for (std::size_t i = 0; i < r.x.size(); ++i)
            worst = std::max(worst, std::abs(r.route_b[i] - p(r.x[i])) / p(r.x[i]));
    }
    const double dt = seconds_since(t0);
    const bool pass = worst <= 1e-3 && dt < 300.0;
    line(7, pass,
         "pure-step round trip on both half-axes, 128 ray nodes x 60 abscissas: worst relative "
         "error " + num(worst) + " (<=1e-3), " + num(dt) + "s (<300s)");
}

void criterion_8() {
    const auto t0 = std::chrono::steady_clock::now();
    const Potential p = bump_profile();
    const auto data = compute_scattering_data(p, 40.0, 128, JostBackend::Auto, 0.0);
    std::vector<double> xg;
    for (int i = 0; i < 60; ++i) xg.push_back(3.0 * i / 59.0);
    FieldOptions opt;
    opt.refine_iterations = 3;
    const auto f = reconstruct_field(data, HalfAxis::Direct, xg, opt);
    const auto r = recover_m(f);
    double sup = 0, cond = 0;
    for (std::size_t i = 0; i < r.x.size(); ++i) {
        cond = std::max(cond, r.conditioning[i]);
        if (r.x[i] <= 2.0)  // effective support of the perturbation
            sup = std::max(sup, std::abs(r.route_b[i] - p(r.x[i])) / p(r.x[i]));
    }
    const double dt = seconds_since(t0);
    const bool within_tol = sup <= 5e-2;
    const bool degraded = cond > 1e8;  // the only admissible excuse for missing the gate
    const bool pass = within_tol || degraded;
    line(8, pass,
         "perturbed round trip (5% localized excess): sup relative error " + num(sup) +
             " on the perturbation support (<=5e-2), measured conditioning " + num(cond) +
             (within_tol ? "" : degraded ? " — tolerance missed, conditioning beyond 1e8 (degraded)"
                                         : " — tolerance missed without conditioning excuse") +
             ", " + num(dt) + "s");
}

void criterion_9() {
    const Potential p = step_profile();
    const auto report = find_bound_states(p, 1.2);
    const bool empty = report.mu_ray.empty() && report.nu_ray.empty();

    auto data = compute_scattering_data(p, 30.0, 96, JostBackend::Auto, 0.0);
    data.mu = {0.9};
    data.nu = {-1.1};
    auto sys = assemble_direct(data, 0.8);
    const std::size_t N = data.tau_grid.size();
    const cplx R1(0.3, -0.2), R2(0.1, 0.4);
    Eigen::VectorXcd y = sys.dressed_target;
    y[2 * N] = R1;
    y[2 * N + 1] = R2;
    sys.rhs = sys.matrix * y;
    const auto sol = solve_system(sys);
    const double worst =
        std::max(std::abs(sol.res_mu[0] - R1), std::abs(sol.res_nu[0] - R2));
    const bool pass = empty && worst <= 1e-6;
    line(9, pass,
         std::string("bound-state machinery: pure-step search ") +
             (empty ? "empty" : "NON-EMPTY") + ", manufactured residue recovery " + num(worst) +
             " (<=1e-6)");
}

}  // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    std::printf("acceptance: %d of 9 criteria failed, total %s s\n", failures,
                num(seconds_since(t0)).c_str());
    return failures == 0 ? 0 : 1;
}
