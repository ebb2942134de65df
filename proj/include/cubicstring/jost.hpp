#ifndef CUBICSTRING_JOST_HPP
#define CUBICSTRING_JOST_HPP

#include <algorithm>
#include <array>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "cubicstring/potential.hpp"
#include "cubicstring/trig3.hpp"

namespace cubicstring {

/// Jost solutions of i y''' = m(x) lambda^3 y:
///   family v: v_k -> exp(i z_plus zeta_k x),  x -> +infinity, z_plus = lambda n_plus;
///   family u: u_k -> exp(i z_minus zeta_k x), x -> -infinity, z_minus = lambda n_minus.
/// Two backends: a Neumann (iterated-kernel) series for the Volterra integral
/// equation, and high-order adaptive integration of the ODE from beyond the
/// perturbation support with the asymptotic seed. The Neumann kernel
///   exp(i z zeta_k (t-x)) s_2(i z (x-t))
/// splits into three pure exponentials exp(i z (zeta_k - zeta_j)(t-x)), so one
/// sweep of cumulative tail integrals evaluates every collocation point.

struct JostEval {
    char family = 'v';
    int k = 0;
    cplx lambda;
    double x = 0;
    cplx value, d1, d2;
};

struct NeumannDiagnostics {
    int terms_used = 0;
    double last_term_norm = 0;
    double bound_margin = 0;  ///< observed |K_n| over the analytic kernel bound
    double tail_bound = 0;    ///< estimate of the neglected far-tail contribution
    bool converged = true;
};

struct JostResult {
    JostEval eval;
    NeumannDiagnostics diag;
};

enum class JostBackend { Auto, Neumann, ODE };

/// Kernel envelope d(z) = exp(|Im z|) cosh(sqrt(3) Re z / 2).
inline double kernel_envelope(cplx w) {
    return std::exp(std::abs(w.imag())) * std::cosh(std::sqrt(3.0) / 2.0 * w.real());
}

namespace detail {

inline constexpr int gl_n = 15;

struct GLRule {
    std::array<double, gl_n> xi, w;      // nodes/weights on [-1,1]
    std::array<double, gl_n> bary;       // barycentric weights for the nodes
    std::array<std::array<double, gl_n>, gl_n> pw_right;  // int_{xi_i}^{1} l_j
    std::array<std::array<double, gl_n>, gl_n> pw_left;   // int_{-1}^{xi_i} l_j
};

inline const GLRule& gl_rule() {
    static const GLRule rule = [] {
        GLRule r{};
        using G = boost::math::quadrature::gauss<double, gl_n>;
        const auto& ab = G::abscissa();  // nonnegative half
        const auto& wt = G::weights();
        // unfold symmetric half-arrays into ascending order
        int idx = 0;
        for (int i = gl_n / 2; i >= 1; --i) {
            r.xi[idx] = -ab[i];
            r.w[idx] = wt[i];
            ++idx;
        }
        r.xi[idx] = ab[0];
        r.w[idx] = wt[0];
        ++idx;
        for (int i = 1; i <= gl_n / 2; ++i) {
            r.xi[idx] = ab[i];
            r.w[idx] = wt[i];
            ++idx;
        }
        for (int i = 0; i < gl_n; ++i) {
            double b = 1.0;
            for (int j = 0; j < gl_n; ++j)
                if (j != i) b *= (r.xi[i] - r.xi[j]);
            r.bary[i] = 1.0 / b;
        }
        // partial weights: integrate each Lagrange basis polynomial from xi_i
        // to 1 with a rule exact for its degree
        using G31 = boost::math::quadrature::gauss<double, 31>;
        auto lagrange = [&r](int j, double t) {
            double num = 1.0;
            for (int m = 0; m < gl_n; ++m)
                if (m != j) num *= (t - r.xi[m]);
            return num * r.bary[j];
        };
        for (int i = 0; i < gl_n; ++i) {
            for (int j = 0; j < gl_n; ++j) {
                r.pw_right[i][j] = G31::integrate(
                    [&](double t) { return lagrange(j, t); }, r.xi[i], 1.0);
                r.pw_left[i][j] = G31::integrate(
                    [&](double t) { return lagrange(j, t); }, -1.0, r.xi[i]);
            }
        }
        return r;
    }();
    return rule;
}

/// Composite panels with Gauss-Legendre nodes between given breakpoints.
struct PanelGrid {
    std::vector<double> bnd;    // panel boundaries, ascending
    std::vector<double> nodes;  // panels() * gl_n ascending nodes
    std::vector<double> wts;

    int panels() const { return static_cast<int>(bnd.size()) - 1; }

    void build(std::vector<double> breakpoints) {
        std::sort(breakpoints.begin(), breakpoints.end());
        breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end(),
                                      [](double a, double b) { return std::abs(a - b) < 1e-13; }),
                          breakpoints.end());
        bnd = std::move(breakpoints);
        const auto& r = gl_rule();
        nodes.clear();
        wts.clear();
        for (int p = 0; p < panels(); ++p) {
            const double c = 0.5 * (bnd[p] + bnd[p + 1]);
            const double h = 0.5 * (bnd[p + 1] - bnd[p]);
            for (int i = 0; i < gl_n; ++i) {
                nodes.push_back(c + h * r.xi[i]);
                wts.push_back(h * r.w[i]);
            }
        }
    }
};

/// Cumulative exponential-weighted tail integrals over a panel grid.
/// For samples g at the grid nodes returns, at every node t_i (and at every
/// panel boundary), the value of
///   side +:  int_{t_i}^{bnd.back()}  exp(mu (t - t_i)) g(t) dt
///   side -:  int_{bnd.front()}^{t_i} exp(mu (t - t_i)) g(t) dt.
struct ExpTail {
    std::vector<cplx> at_node;
    std::vector<cplx> at_bnd;
};

inline ExpTail exp_tail(const PanelGrid& grid, const std::vector<cplx>& g, cplx mu, bool plus_side) {
    const auto& r = gl_rule();
    const int P = grid.panels();
    ExpTail out;
    out.at_node.assign(g.size(), cplx(0));
    out.at_bnd.assign(P + 1, cplx(0));

    // panel-local scaled samples: ghat[i'] = exp(mu (t_i' - anchor)) g_i'
    // with the anchor chosen at the boundary toward which we accumulate
    if (plus_side) {
        // S_p = int_{a_p}^{end} exp(mu (t - a_p)) g dt, backward recursion
        for (int p = P - 1; p >= 0; --p) {
            const double a = grid.bnd[p], b = grid.bnd[p + 1];
            cplx panel = 0;
            for (int i = 0; i < gl_n; ++i) {
                const int gi = p * gl_n + i;
                panel += grid.wts[gi] * std::exp(mu * (grid.nodes[gi] - a)) * g[gi];
            }
            out.at_bnd[p] = panel + std::exp(mu * (b - a)) * out.at_bnd[p + 1];
        }
        for (int p = 0; p < P; ++p) {
            const double a = grid.bnd[p], b = grid.bnd[p + 1];
            const double h = 0.5 * (b - a);
            for (int i = 0; i < gl_n; ++i) {
                const int gi = p * gl_n + i;
                const double ti = grid.nodes[gi];
                cplx partial = 0;
                for (int j = 0; j < gl_n; ++j) {
                    const int gj = p * gl_n + j;
                    partial += h * r.pw_right[i][j] * std::exp(mu * (grid.nodes[gj] - ti)) * g[gj];
                }
                out.at_node[gi] = partial + std::exp(mu * (b - ti)) * out.at_bnd[p + 1];
            }
        }
    } else {
        // S_p = int_{start}^{a_p} exp(mu (t - a_p)) g dt, forward recursion
        for (int p = 0; p < P; ++p) {
            const double a = grid.bnd[p], b = grid.bnd[p + 1];
            cplx panel = 0;
            for (int i = 0; i < gl_n; ++i) {
                const int gi = p * gl_n + i;
                panel += grid.wts[gi] * std::exp(mu * (grid.nodes[gi] - b)) * g[gi];
            }
            out.at_bnd[p + 1] = panel + std::exp(mu * (a - b)) * out.at_bnd[p];
        }
        for (int p = 0; p < P; ++p) {
            const double a = grid.bnd[p], b = grid.bnd[p + 1];
            const double h = 0.5 * (b - a);
            for (int i = 0; i < gl_n; ++i) {
                const int gi = p * gl_n + i;
                const double ti = grid.nodes[gi];
                cplx partial = 0;
                for (int j = 0; j < gl_n; ++j) {
                    const int gj = p * gl_n + j;
                    partial += h * r.pw_left[i][j] * std::exp(mu * (grid.nodes[gj] - ti)) * g[gj];
                }
                out.at_node[gi] = partial + std::exp(mu * (a - ti)) * out.at_bnd[p];
            }
        }
    }
    return out;
}

/// Breakpoints for the half-infinite integration range of one solve.
/// plus side: [x0, edge + 40/a]; minus side: [-(edge) - 40/a, x0] mirrored.
inline std::vector<double> make_breakpoints(const Potential& p, double x0, bool plus_side) {
    std::vector<double> br;
    const double fine_h = 0.25;
    if (plus_side) {
        const double edge = std::max(x0, p.support_edge_plus());
        const double far = edge + 40.0 / p.a();
        br.push_back(x0);
        if (x0 < 0) br.push_back(0.0);
        if (p.perturbation().kind == Perturbation::Kind::GaussianBumps)
            for (const auto& b : p.perturbation().bumps)
                if (b.center > x0 && b.center < edge) br.push_back(b.center);
        for (double t = std::ceil(x0 / fine_h) * fine_h; t < edge; t += fine_h) br.push_back(t);
        br.push_back(edge);
        for (int i = 1; i <= 8; ++i) br.push_back(edge + (far - edge) * i / 8.0);
    } else {
        const double edge = std::min(x0, p.support_edge_minus());
        const double far = edge - 40.0 / p.a();
        br.push_back(x0);
        if (x0 > 0) br.push_back(0.0);
        if (p.perturbation().kind == Perturbation::Kind::GaussianBumps)
            for (const auto& b : p.perturbation().bumps)
                if (b.center < x0 && b.center > edge) br.push_back(b.center);
        for (double t = std::floor(x0 / fine_h) * fine_h; t > edge; t -= fine_h) br.push_back(t);
        br.push_back(edge);
        for (int i = 1; i <= 8; ++i) br.push_back(edge - (far - edge) * -1.0 * i / 8.0);
    }
    return br;
}

struct NeumannSolution {
    PanelGrid grid;
    std::vector<cplx> psi_nodes;  // normalized solution at grid nodes
    cplx psi_x;                   // normalized solution at x0 (first/last boundary)
    cplx I2, I1, I0;              // weighted tail integrals of qtil * psi at x0
    NeumannDiagnostics diag;
};

/// Runs the Neumann iteration for the normalized solution psi_k (family v,
/// plus_side=true) or phi_k (family u, plus_side=false).
inline NeumannSolution neumann_solve(const Potential& p, cplx lambda, int k, double x0,
                                     bool plus_side) {
    NeumannSolution sol;
    const double mside = plus_side ? p.m_plus() : p.m_minus();
    const cplx z = lambda * (plus_side ? p.n_plus() : p.n_minus());
    const cplx iz = cplx(0, 1) * z;
    const cplx zk = zeta(k);

    sol.grid.build(make_breakpoints(p, x0, plus_side));
    const auto& nodes = sol.grid.nodes;
    const int N = static_cast<int>(nodes.size());

    std::vector<double> qtil(N);
    for (int i = 0; i < N; ++i) qtil[i] = p(nodes[i]) / mside - 1.0;

    std::array<cplx, 3> mu;
    for (int j = 0; j < 3; ++j) mu[j] = iz * (zk - zeta(j));

    // series sign: psi = sum (-iz K)^n 1 on the plus side, (+iz K)^n 1 on minus
    const cplx step = (plus_side ? -iz : iz) / 3.0;

    std::vector<cplx> term(N, cplx(1));
    cplx term_x = 1;
    sol.psi_nodes.assign(N, cplx(1));
    sol.psi_x = 1;

    const int max_terms = 60;
    const double tol = 1e-12;
    sol.diag.terms_used = 1;
    std::vector<cplx> g(N);
    for (int n = 1; n <= max_terms; ++n) {
        for (int i = 0; i < N; ++i) g[i] = qtil[i] * term[i];
        std::vector<cplx> next(N, cplx(0));
        cplx next_x = 0;
        for (int j = 0; j < 3; ++j) {
            const auto tail = exp_tail(sol.grid, g, mu[j], plus_side);
            const cplx cj = zeta(j);  // zeta_j^{-2}
            for (int i = 0; i < N; ++i) next[i] += step * cj * tail.at_node[i];
            next_x += step * cj * (plus_side ? tail.at_bnd.front() : tail.at_bnd.back());
        }
        double sup = 0;
        for (int i = 0; i < N; ++i) sup = std::max(sup, std::abs(next[i]));
        sol.diag.last_term_norm = sup;
        if (sup < tol) break;  // vanishing term is not retained
        for (int i = 0; i < N; ++i) sol.psi_nodes[i] += next[i];
        sol.psi_x += next_x;
        term.swap(next);
        term_x = next_x;
        sol.diag.terms_used = n + 1;
    }
    sol.diag.converged = sol.diag.last_term_norm < tol;
    if (!sol.diag.converged)
        throw std::runtime_error("neumann_solve: series did not reach tolerance in 60 terms");

    // final weighted integrals with the converged solution
    for (int i = 0; i < N; ++i) g[i] = qtil[i] * sol.psi_nodes[i];
    sol.I2 = sol.I1 = sol.I0 = 0;
    for (int j = 0; j < 3; ++j) {
        const auto tail = exp_tail(sol.grid, g, mu[j], plus_side);
        const cplx v = plus_side ? tail.at_bnd.front() : tail.at_bnd.back();
        sol.I2 += zeta(j) * v / 3.0;            // s_2 weight: zeta_j^{-2}
        sol.I1 += zeta(j) * zeta(j) * v / 3.0;  // s_1 weight: zeta_j^{-1}
        sol.I0 += v / 3.0;                      // s_0 weight
    }

    // neglected tail beyond the truncated range: envelope below the
    // truncation level decaying at rate >= a against growth <= 2|z|
    const double az = std::abs(z);
    const double rate = std::max(p.a() - 2.0 * az, 0.1 * p.a());
    sol.diag.tail_bound = az * 1e-14 / rate;
    return sol;
}

}  // namespace detail

/// Neumann-series solution of the v-family (normalization at +infinity).
inline JostResult solve_v_neumann(const Potential& p, cplx lambda, int k, double x) {
    if (lambda == cplx(0)) throw std::invalid_argument("solve_v: lambda = 0");
    if (k < 0 || k > 2) throw std::out_of_range("solve_v: k must be 0, 1 or 2");
    const cplx z = lambda * p.n_plus();
    const cplx iz = cplx(0, 1) * z;
    const cplx zk = zeta(k);
    auto sol = detail::neumann_solve(p, lambda, k, x, true);
    const cplx e = std::exp(iz * zk * x);
    JostResult r;
    r.eval = {'v', k, lambda, x, sol.psi_x * e,
              iz * (zk - iz * sol.I1) * e,
              iz * iz * (zk * zk - iz * sol.I0) * e};
    r.diag = sol.diag;
    return r;
}

/// Neumann-series solution of the u-family (normalization at -infinity).
inline JostResult solve_u_neumann(const Potential& p, cplx lambda, int k, double x) {
    if (lambda == cplx(0)) throw std::invalid_argument("solve_u: lambda = 0");
    if (k < 0 || k > 2) throw std::out_of_range("solve_u: k must be 0, 1 or 2");
    const cplx z = lambda * p.n_minus();
    const cplx iz = cplx(0, 1) * z;
    const cplx zk = zeta(k);
    auto sol = detail::neumann_solve(p, lambda, k, x, false);
    const cplx e = std::exp(iz * zk * x);
    JostResult r;
    r.eval = {'u', k, lambda, x, sol.psi_x * e,
              (iz * zk + iz * iz * sol.I1) * e,
              (iz * zk) * (iz * zk) * e + iz * iz * iz * sol.I0 * e};
    r.diag = sol.diag;
    return r;
}

namespace detail {

/// Back-integration from beyond the perturbation support with the plane-wave
/// seed. Works on the normalized function w = y exp(-i z zeta_k x), which
/// stays O(1) along the stable direction, so the controlled stepper's error
/// tolerances are meaningful even when y itself is exponentially small:
///   w''' = -3 (i z zeta_k) w'' - 3 (i z zeta_k)^2 w'
///          - i lambda^3 (m(x) - m_side) w,    w(seed) = (1,0,0).
inline JostResult ode_solve(const Potential& p, cplx lambda, int k, double x, bool plus_side) {
    namespace odeint = boost::numeric::odeint;
    using state = std::array<cplx, 3>;
    const double mside = plus_side ? p.m_plus() : p.m_minus();
    const cplx z = lambda * (plus_side ? p.n_plus() : p.n_minus());
    const cplx izk = cplx(0, 1) * z * zeta(k);
    const cplx il3 = cplx(0, -1) * lambda * lambda * lambda;

    const double seed_x = plus_side ? std::max(x, p.support_edge_plus(1e-13)) + 0.5
                                    : std::min(x, p.support_edge_minus(1e-13)) - 0.5;
    state s{cplx(1), cplx(0), cplx(0)};
    auto stepper = odeint::make_controlled(1e-12, 1e-12,
                                           odeint::runge_kutta_fehlberg78<state>());
    const double dir = (x < seed_x) ? -1.0 : 1.0;
    // stop at the jump point so m(x) is smooth inside every step; a step
    // ending exactly at 0 must read m from its own side of the jump
    std::vector<double> stops;
    stops.push_back(seed_x);
    if (seed_x * x < 0) stops.push_back(0.0);
    stops.push_back(x);
    for (size_t s_i = 0; s_i + 1 < stops.size(); ++s_i) {
        const double from = stops[s_i], to = stops[s_i + 1];
        if (from == to) continue;
        const bool seg_negative = 0.5 * (from + to) < 0.0;
        auto rhs = [&](const state& w, state& dw, double t) {
            const double mval = (seg_negative && t >= 0.0)
                                    ? p.m_minus() * (1.0 + p.pert_at(t))
                                    : (!seg_negative && t <= 0.0)
                                          ? p.m_plus() * (1.0 + p.pert_at(t))
                                          : p(t);
            dw[0] = w[1];
            dw[1] = w[2];
            dw[2] = -3.0 * izk * w[2] - 3.0 * izk * izk * w[1] + il3 * (mval - mside) * w[0];
        };
        odeint::integrate_adaptive(stepper, rhs, s, from, to, dir * 1e-3);
    }
    const cplx e = std::exp(izk * x);
    JostResult r;
    r.eval = {plus_side ? 'v' : 'u', k, lambda, x,
              s[0] * e,
              (s[1] + izk * s[0]) * e,
              (s[2] + 2.0 * izk * s[1] + izk * izk * s[0]) * e};
    r.diag.terms_used = 0;
    r.diag.converged = true;
    return r;
}

}  // namespace detail

inline JostResult solve_v_ode(const Potential& p, cplx lambda, int k, double x) {
    if (lambda == cplx(0)) throw std::invalid_argument("solve_v: lambda = 0");
    return detail::ode_solve(p, lambda, k, x, true);
}

inline JostResult solve_u_ode(const Potential& p, cplx lambda, int k, double x) {
    if (lambda == cplx(0)) throw std::invalid_argument("solve_u: lambda = 0");
    return detail::ode_solve(p, lambda, k, x, false);
}

/// Backend selection: the Neumann series is guaranteed inside the validity
/// disk |lambda| < a/(2 n_side); outside it the ODE backend takes over.
inline JostResult solve_v(const Potential& p, cplx lambda, int k, double x,
                          JostBackend backend = JostBackend::Auto) {
    switch (backend) {
        case JostBackend::Neumann: return solve_v_neumann(p, lambda, k, x);
        case JostBackend::ODE: return solve_v_ode(p, lambda, k, x);
        case JostBackend::Auto: break;
    }
    const double disk = p.a() / (2.0 * p.n_plus());
    return (std::abs(lambda) < 0.95 * disk) ? solve_v_neumann(p, lambda, k, x)
                                            : solve_v_ode(p, lambda, k, x);
}

inline JostResult solve_u(const Potential& p, cplx lambda, int k, double x,
                          JostBackend backend = JostBackend::Auto) {
    switch (backend) {
        case JostBackend::Neumann: return solve_u_neumann(p, lambda, k, x);
        case JostBackend::ODE: return solve_u_ode(p, lambda, k, x);
        case JostBackend::Auto: break;
    }
    const double disk = p.a() / (2.0 * p.n_minus());
    return (std::abs(lambda) < 0.95 * disk) ? solve_u_neumann(p, lambda, k, x)
                                            : solve_u_ode(p, lambda, k, x);
}

/// Normalized solutions psi_k = v_k exp(-i z_plus zeta_k x) and
/// phi_k = u_k exp(-i z_minus zeta_k x). For lambda in the k=0 decay sector
/// the bound |psi_0| < 2 exp(|z_plus| sigma_plus(0)) is enforced at runtime.
inline cplx psi(const Potential& p, cplx lambda, int k, double x,
                JostBackend backend = JostBackend::Auto) {
    const auto r = solve_v(p, lambda, k, x, backend);
    const cplx val = r.eval.value * std::exp(-cplx(0, 1) * lambda * p.n_plus() * zeta(k) * x);
    if (k == 0 && in_omega(lambda, 0)) {
        const double cap = 2.0 * std::exp(std::abs(lambda) * p.n_plus() * sigma(p, 0.0, Side::Plus));
        if (std::abs(val) >= cap)
            throw std::runtime_error("psi: sector bound on |psi_0| violated");
    }
    return val;
}

inline cplx phi(const Potential& p, cplx lambda, int k, double x,
                JostBackend backend = JostBackend::Auto) {
    const auto r = solve_u(p, lambda, k, x, backend);
    const cplx val = r.eval.value * std::exp(-cplx(0, 1) * lambda * p.n_minus() * zeta(k) * x);
    if (k == 0 && in_omega(lambda, 0, true)) {
        const double cap = 2.0 * std::exp(std::abs(lambda) * p.n_minus() * sigma(p, 0.0, Side::Minus));
        if (std::abs(val) >= cap)
            throw std::runtime_error("phi: sector bound on |phi_0| violated");
    }
    return val;
}

/// Direct verification of the iterated-kernel estimates
///   |K_n(z,x,t)| < d(z(t-x)) sigma^{n-1}(x)/(n-1)!
/// on a uniform (x,t) grid, by building the kernels recursively.
inline NeumannDiagnostics kernel_bound_check(const Potential& p, cplx lambda, int n_max,
                                             Side side = Side::Plus) {
    if (n_max < 1 || n_max > 20) throw std::invalid_argument("kernel_bound_check: n_max in [1,20]");
    const bool plus = side == Side::Plus;
    const cplx z = lambda * (plus ? p.n_plus() : p.n_minus());
    const double mside = plus ? p.m_plus() : p.m_minus();

    const double lo = plus ? 0.0 : p.support_edge_minus() - 1.0;
    const double hi = plus ? p.support_edge_plus() + 1.0 : 0.0;
    const int M = 81;
    const double h = (hi - lo) / (M - 1);
    std::vector<double> xs(M), qt(M), sg(M);
    for (int i = 0; i < M; ++i) {
        xs[i] = lo + i * h;
        qt[i] = p(xs[i]) / mside - 1.0;
        sg[i] = sigma(p, xs[i], side);
    }
    auto K1 = [&](double x, double t) { return s_eval(2, cplx(0, 1) * z * (x - t)); };

    // K[i][j] ~ K_n(x_i, t_j) on the triangle x < t (plus) or t < x (minus)
    std::vector<std::vector<cplx>> K(M, std::vector<cplx>(M, cplx(0)));
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j) K[i][j] = K1(xs[i], xs[j]);

    NeumannDiagnostics diag;
    diag.terms_used = n_max;
    double fact = 1.0;  // (n-1)!
    for (int n = 1; n <= n_max; ++n) {
        double margin = 0;
        for (int i = 0; i < M; ++i) {
            for (int j = 0; j < M; ++j) {
                const bool ordered = plus ? (xs[j] > xs[i]) : (xs[j] < xs[i]);
                if (!ordered) continue;
                const double bound =
                    kernel_envelope(z * (xs[j] - xs[i])) * std::pow(sg[i], n - 1) / fact;
                if (bound > 0) margin = std::max(margin, std::abs(K[i][j]) / bound);
            }
        }
        diag.bound_margin = std::max(diag.bound_margin, margin);
        if (n == n_max) break;
        // K_{n+1}(x,t) = int_x^t K_n(x,s) q(s) K_1(s,t) ds (trapezoid in s)
        std::vector<std::vector<cplx>> Kn(M, std::vector<cplx>(M, cplx(0)));
        for (int i = 0; i < M; ++i) {
            for (int j = 0; j < M; ++j) {
                const int a = std::min(i, j), b = std::max(i, j);
                if (b - a < 1) continue;
                cplx acc = 0;
                for (int s_i = a; s_i <= b; ++s_i) {
                    const double w = (s_i == a || s_i == b) ? 0.5 * h : h;
                    acc += w * K[i][s_i] * qt[s_i] * K1(xs[s_i], xs[j]);
                }
                const bool keep = plus ? (i < j) : (i > j);
                Kn[i][j] = keep ? acc : cplx(0);
            }
        }
        K.swap(Kn);
        fact *= n;
    }
    return diag;
}

}  // namespace cubicstring

#endif
