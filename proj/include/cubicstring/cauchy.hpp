#ifndef CUBICSTRING_CAUCHY_HPP
#define CUBICSTRING_CAUCHY_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

#include "cubicstring/geometry.hpp"
#include "cubicstring/potential.hpp"
#include "cubicstring/quadrature.hpp"

namespace cubicstring {

/// Which side of an outward-oriented ray a boundary value is taken from.
/// "Left" is the side reached by rotating the outward direction a quarter
/// turn counterclockwise; it carries the +d(t)/2 half-density term.
enum class RaySide { Left, Right };

namespace detail {

/// Piecewise polynomial interpolation by the 6-point Lagrange rule: on the
/// interval [x_i, x_{i+1}] the quintic through the six nearest nodes is used.
/// The result is continuous, sixth-order accurate on smooth data, and a
/// linear function of the nodal values, which keeps every quadrature rule
/// built on top of it linear in the density samples (a requirement for
/// collocation matrices assembled from these integrals).  Clamps to the end
/// values outside the grid.
struct HermiteInterp {
    std::vector<double> x;
    std::vector<cplx> y;

    HermiteInterp() = default;
    HermiteInterp(std::vector<double> xs, std::vector<cplx> ys)
        : x(std::move(xs)), y(std::move(ys)) {
        if (x.size() != y.size() || x.size() < 2)
            throw std::invalid_argument("interp: need matching grids with at least two nodes");
    }

    std::size_t interval(double t) const {
        if (t <= x.front()) return 0;
        if (t >= x.back()) return x.size() - 2;
        auto it = std::upper_bound(x.begin(), x.end(), t);
        return static_cast<std::size_t>(it - x.begin()) - 1;
    }

    cplx operator()(double t) const {
        if (t <= x.front()) return y.front();
        if (t >= x.back()) return y.back();
        const std::size_t n = x.size();
        const std::size_t i = interval(t);
        std::size_t stencil = std::min(n, std::size_t(6));
        std::size_t j0 = (i < 2) ? 0 : i - 2;
        if (j0 + stencil > n) j0 = n - stencil;
        cplx acc = 0.0;
        for (std::size_t a = 0; a < stencil; ++a) {
            double l = 1.0;
            for (std::size_t b = 0; b < stencil; ++b) {
                if (a == b) continue;
                l *= (t - x[j0 + b]) / (x[j0 + a] - x[j0 + b]);
            }
            acc += l * y[j0 + a];
        }
        return acc;
    }
};

/// Fixed Gauss-Legendre nodes/weights on [-1,1] (7 points: exact through
/// degree 13, enough for cubic interpolants against smooth kernels).
inline const std::array<double, 7>& gauss7_nodes() {
    static const std::array<double, 7> n = {-0.9491079123427585, -0.7415311855993945,
                                            -0.4058451513773972, 0.0,
                                            0.4058451513773972,  0.7415311855993945,
                                            0.9491079123427585};
    return n;
}
inline const std::array<double, 7>& gauss7_weights() {
    static const std::array<double, 7> w = {0.1294849661688697, 0.2797053914892766,
                                            0.3818300505051189, 0.4179591836734694,
                                            0.3818300505051189, 0.2797053914892766,
                                            0.1294849661688697};
    return w;
}

/// Integrate interp(tau) * kernel(tau) over [a, b] (a subrange of the grid),
/// splitting at every knot and at the optional extra break point.
template <class Kernel>
cplx hermite_kernel_integral(const HermiteInterp& f, Kernel&& kernel, double a, double b,
                             double extra_break = std::nan("")) {
    cplx acc = 0.0;
    auto do_panel = [&](double pa, double pb) {
        if (pb - pa <= 0) return;
        const double c = 0.5 * (pa + pb), hw = 0.5 * (pb - pa);
        const auto& xs = gauss7_nodes();
        const auto& ws = gauss7_weights();
        for (std::size_t g = 0; g < xs.size(); ++g) {
            const double t = c + hw * xs[g];
            acc += hw * ws[g] * f(t) * kernel(t);
        }
    };
    std::vector<double> brk;
    brk.push_back(a);
    for (double xx : f.x)
        if (xx > a && xx < b) brk.push_back(xx);
    if (std::isfinite(extra_break) && extra_break > a && extra_break < b) brk.push_back(extra_break);
    brk.push_back(b);
    std::sort(brk.begin(), brk.end());
    for (std::size_t i = 0; i + 1 < brk.size(); ++i) do_panel(brk[i], brk[i + 1]);
    return acc;
}

}  // namespace detail

/// Density of a jump across one of the six rays through the origin in the
/// directions +i*zeta_k (direct family) or -i*zeta_k (reflected family),
/// sampled on a positive tau grid and interpolated by a piecewise cubic with
/// finite-difference slopes.  The density is extended to tau = 0 by linear
/// extrapolation from the first two nodes (jump densities vanish linearly at
/// the origin; constant test densities extend exactly).
struct RayDensity {
    int ray_k = 0;           ///< direction index: ray points along +/- i*zeta(ray_k)
    bool reflected = false;  ///< false: +i*zeta_k ray, true: -i*zeta_k ray
    std::vector<double> tau;  ///< strictly increasing, positive
    std::vector<cplx> values;
    double tail_bound = 0.0;  ///< recorded bound on the neglected tail beyond tau.back()

    /// Interpolant over {0} + tau with the value at 0 extrapolated linearly.
    detail::HermiteInterp interp() const {
        std::vector<double> xs;
        std::vector<cplx> ys;
        xs.reserve(tau.size() + 1);
        ys.reserve(tau.size() + 1);
        xs.push_back(0.0);
        // Extrapolate to the origin through a geometrically spread stencil
        // (consecutive nodes roughly doubling in tau).  A stencil clustered
        // at the first node would amplify rounding noise by the fifth power
        // of the extrapolation distance over the stencil span.
        if (tau.size() >= 2) {
            std::vector<std::size_t> idx;
            double target = tau.front();
            std::size_t j = 0;
            while (idx.size() < 6 && j < tau.size()) {
                while (j + 1 < tau.size() && tau[j] < target) ++j;
                if (!idx.empty() && idx.back() == j) break;
                idx.push_back(j);
                target = 2.0 * tau[j];
                ++j;
            }
            cplx acc = 0.0;
            for (std::size_t a : idx) {
                double l = 1.0;
                for (std::size_t b : idx) {
                    if (a == b) continue;
                    l *= (0.0 - tau[b]) / (tau[a] - tau[b]);
                }
                acc += l * values[a];
            }
            ys.push_back(acc);
        } else {
            ys.push_back(values.empty() ? cplx(0) : values[0]);
        }
        xs.insert(xs.end(), tau.begin(), tau.end());
        ys.insert(ys.end(), values.begin(), values.end());
        return detail::HermiteInterp(std::move(xs), std::move(ys));
    }

    void validate() const {
        if (ray_k < 0 || ray_k > 2) throw std::invalid_argument("RayDensity: ray_k out of range");
        if (tau.size() != values.size() || tau.size() < 2)
            throw std::invalid_argument("RayDensity: grid/value size mismatch or too small");
        double prev = 0.0;
        for (std::size_t i = 0; i < tau.size(); ++i) {
            if (!(tau[i] > prev)) throw std::invalid_argument("RayDensity: grid not increasing");
            if (!std::isfinite(values[i].real()) || !std::isfinite(values[i].imag()))
                throw std::invalid_argument("RayDensity: non-finite value");
            prev = tau[i];
        }
    }
};

/// Graded geometric mesh with n nodes on (0, t_max]; the smallest node is
/// t_max * floor_ratio.  Refined near zero where the Cauchy denominators
/// tau + i*zeta*lambda can become small.
inline std::vector<double> make_tau_grid(double t_max, int n = 256, double floor_ratio = 1e-4) {
    if (!(t_max > 0) || n < 2 || !(floor_ratio > 0) || !(floor_ratio < 1))
        throw std::invalid_argument("make_tau_grid: bad parameters");
    std::vector<double> g(static_cast<std::size_t>(n));
    const double q = std::pow(floor_ratio, 1.0 / (n - 1));
    for (int j = 0; j < n; ++j) g[static_cast<std::size_t>(j)] = t_max * std::pow(q, n - 1 - j);
    g.back() = t_max;
    return g;
}

/// Build a RayDensity by sampling `f` on a graded mesh, truncating where the
/// density has decayed below `cut` (the neglected tail bound |d(T)|(1+|ln T|)
/// is recorded).
inline RayDensity sample_ray_density(int ray_k, bool reflected,
                                     const std::function<cplx(double)>& f, double t_max,
                                     int n = 256, double cut = 1e-12) {
    RayDensity d;
    d.ray_k = ray_k;
    d.reflected = reflected;
    d.tau = make_tau_grid(t_max, n);
    d.values.resize(d.tau.size());
    for (std::size_t i = 0; i < d.tau.size(); ++i) d.values[i] = f(d.tau[i]);
    // truncate where the density stays below the cut from some node onward
    std::size_t keep = d.tau.size();
    while (keep > 8 && std::abs(d.values[keep - 1]) < cut && std::abs(d.values[keep - 2]) < cut)
        --keep;
    d.tau.resize(keep);
    d.values.resize(keep);
    const double T = d.tau.back();
    d.tail_bound = std::abs(d.values.back()) * (1.0 + std::abs(std::log(T)));
    return d;
}

namespace detail {

/// Map the evaluation point into the ray's own parameter plane: the Cauchy
/// integral over the ray lambda' = (+/-) i tau zeta_k reduces to
/// (1/2 pi i) \int d(tau) dtau / (tau - w(lambda)) with w as returned here.
inline cplx ray_parameter(const RayDensity& d, cplx lambda) {
    const cplx zinv = zeta((3 - d.ray_k) % 3);  // conjugate root: zeta_k^{-1}
    cplx w = cplx(0, -1) * zinv * lambda;       // direct ray: w = -i zeta_k^{-1} lambda
    if (d.reflected) w = -w;
    return w;
}

}  // namespace detail

/// Cauchy-type integral of the density along its ray, evaluated off the ray:
///   (1/2 pi i) \int_0^T d(tau) dtau / (tau - w),  w the pulled-back point.
/// For a direct ray along i*zeta_k this is the printed kernel form
/// dtau / (tau + i*zeta_{-k} lambda).  Throws if lambda lies on the ray.
inline cplx cauchy_integral(const RayDensity& d, cplx lambda) {
    d.validate();
    const cplx w = detail::ray_parameter(d, lambda);
    const double T = d.tau.back();
    if (std::abs(w.imag()) < 1e-13 * std::max(1.0, std::abs(w.real())) && w.real() > -1e-13 &&
        w.real() < T * (1.0 + 1e-13))
        throw std::invalid_argument("cauchy_integral: point lies on the ray; use boundary_value");
    const auto f = d.interp();
    const cplx val = detail::hermite_kernel_integral(
        f, [&](double t) { return 1.0 / (t - w); }, 0.0, T, w.real());
    return val / (2.0 * pi * cplx(0, 1));
}

/// Sokhotski boundary value of the ray's Cauchy integral at the interior grid
/// point t, from the requested side of the outward-oriented ray:
///   (1/2 pi i) [ PV + d(t) ln((T - t)/t) ] +/- d(t)/2,
/// with the principal value computed by singularity subtraction,
///   PV = \int_0^T (d(tau) - d(t)) / (tau - t) dtau.
/// The "Left" side (counterclockwise from the outward direction) takes +1/2.
inline cplx boundary_value(const RayDensity& d, double t, RaySide side) {
    d.validate();
    const double T = d.tau.back();
    if (!(t > 0.0) || !(t < T))
        throw std::invalid_argument("boundary_value: t must lie strictly inside the grid");
    const auto f = d.interp();
    const cplx dt = f(t);
    // singularity-subtracted integrand (d(tau) - d(t)) / (tau - t): piecewise
    // smooth once the panels split at t and at the knots, so fixed Gauss
    // panels integrate it accurately (exactly, for a density constant near t)
    cplx acc = 0.0;
    {
        const auto& xs = detail::gauss7_nodes();
        const auto& ws = detail::gauss7_weights();
        std::vector<double> brk;
        brk.push_back(0.0);
        for (double xx : f.x)
            if (xx > 0.0 && xx < T) brk.push_back(xx);
        if (t > 0.0 && t < T) brk.push_back(t);
        brk.push_back(T);
        std::sort(brk.begin(), brk.end());
        for (std::size_t i = 0; i + 1 < brk.size(); ++i) {
            const double pa = brk[i], pb = brk[i + 1];
            if (pb - pa <= 0) continue;
            const double c = 0.5 * (pa + pb), hw = 0.5 * (pb - pa);
            for (std::size_t g = 0; g < xs.size(); ++g) {
                const double tt = c + hw * xs[g];
                acc += hw * ws[g] * (f(tt) - dt) / (tt - t);
            }
        }
    }
    const cplx log_term = dt * std::log((T - t) / t);
    const cplx half = (side == RaySide::Left ? 0.5 : -0.5) * dt;
    return (acc + log_term) / (2.0 * pi * cplx(0, 1)) + half;
}

/// Entire, nonvanishing damping divisor Q(lambda) = exp(c * (e^{-i theta0} *
/// lambda * n)^2).  theta0 rotates the growth cone onto the directions where
/// damping is actually needed; the rotation used is recorded alongside any
/// output that depends on it.
struct DampingQ {
    double c = 0.0;       ///< growth constant (default: sigma_+(0) + sigma_-(0))
    double n = 1.0;       ///< frequency scale (n_plus for the right half-axis data)
    double theta0 = 0.0;  ///< growth-cone rotation angle
};

/// Default damping for a given coefficient profile.
inline DampingQ make_damping(const Potential& p) {
    DampingQ q;
    q.c = sigma(p, 0.0, Side::Plus) + sigma(p, 0.0, Side::Minus);
    q.n = p.n_plus();
    return q;
}

inline cplx q_eval(const DampingQ& q, cplx lambda) {
    const cplx z = std::exp(cplx(0, -q.theta0)) * lambda * q.n;
    return std::exp(q.c * z * z);
}

/// Jump-factor kinds.  P1/P2 multiply the single unknown boundary value on
/// the oblique rays (directions -i*zeta_2-conjugate pair); P3/P4 multiply the
/// two unknowns on the central ray.  The T-prefixed kinds are the mirrored
/// factors of the left-half-axis problem (frequency n_minus, tilded
/// coefficients).
enum class JumpKind { P1, P2, P3, P4, PT1, PT2, PT3, PT4 };

/// Samplers for the reflection coefficients entering the jump factors.  For
/// direct kinds these are s1, s2; for dual kinds the tilded versions.
struct CoeffSampler {
    std::function<cplx(cplx)> s1, s2;
};

/// Jump factor at the point lambda on the corresponding ray.
///
/// Direct factors (z = lambda * n_plus), derived from the wave expansions
/// and the pair-product identities; each multiplies the boundary value of the
/// indicated normalized solution:
///   P1(lambda,x) = -sqrt3 z zeta_2 s1(lambda zeta_2) e^{i z x}        (ray -i/6 turn; times v1+)
///   P2(lambda,x) = +sqrt3 z zeta_1 s2(lambda zeta_1) e^{i z x}        (ray at 7pi/6; times v2+)
///   P3(lambda,x) = -sqrt3 z zeta_2 [s2(lambda zeta_2) e^{i z zeta_1 x} + e^{i z zeta_2 x}]
///   P4(lambda,x) = +sqrt3 z zeta_1 [e^{i z zeta_1 x} + s1(lambda zeta_1) e^{i z zeta_2 x}]
/// Dual factors: identical forms with z = lambda * n_minus and tilded
/// coefficient samplers, used on the reflected rays for x <= 0.
inline cplx jump_data(JumpKind kind, cplx lambda, double x, const CoeffSampler& c,
                      const Potential& p) {
    const bool dual = kind == JumpKind::PT1 || kind == JumpKind::PT2 || kind == JumpKind::PT3 ||
                      kind == JumpKind::PT4;
    const double n = dual ? p.n_minus() : p.n_plus();
    const cplx z = lambda * n;
    const cplx iz = cplx(0, 1) * z;
    const double s3 = std::sqrt(3.0);
    switch (kind) {
        case JumpKind::P1:
        case JumpKind::PT1:
            return -s3 * z * zeta(2) * c.s1(lambda * zeta(2)) * std::exp(iz * x);
        case JumpKind::P2:
        case JumpKind::PT2:
            return s3 * z * zeta(1) * c.s2(lambda * zeta(1)) * std::exp(iz * x);
        case JumpKind::P3:
        case JumpKind::PT3:
            return -s3 * z * zeta(2) *
                   (c.s2(lambda * zeta(2)) * std::exp(iz * zeta(1) * x) +
                    std::exp(iz * zeta(2) * x));
        case JumpKind::P4:
        case JumpKind::PT4:
            return s3 * z * zeta(1) *
                   (std::exp(iz * zeta(1) * x) + c.s1(lambda * zeta(1)) * std::exp(iz * zeta(2) * x));
    }
    throw std::invalid_argument("jump_data: unknown kind");
}

}  // namespace cubicstring

#endif  // CUBICSTRING_CAUCHY_HPP
