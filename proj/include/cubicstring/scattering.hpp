#ifndef CUBICSTRING_SCATTERING_HPP
#define CUBICSTRING_SCATTERING_HPP

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "cubicstring/jost.hpp"

namespace cubicstring {

/// Third-order Wronskian: determinant of the 3x3 matrix whose columns are
/// the three function values with their first and second derivatives.
/// All three evaluations must share the same (lambda, x).
inline cplx wronskian3(const JostEval& a, const JostEval& b, const JostEval& c) {
    if (a.lambda != b.lambda || a.lambda != c.lambda || a.x != b.x || a.x != c.x)
        throw std::invalid_argument("wronskian3: evaluations at different (lambda, x)");
    Eigen::Matrix3cd m;
    m << a.value, b.value, c.value, a.d1, b.d1, c.d1, a.d2, b.d2, c.d2;
    return m.determinant();
}

/// The fixed involution that intertwines a solution triple with its
/// conjugate-reflected counterpart. Hermitian and squares to the identity.
inline Eigen::Matrix3cd involution_J() {
    Eigen::Matrix3cd j = Eigen::Matrix3cd::Zero();
    j(0, 0) = 1.0;
    j(1, 2) = zeta(2);
    j(2, 1) = zeta(1);
    return j;
}

/// Conjugate reflection ("+"): f_plus(lambda) = conj(f(conj(lambda))).
/// Implemented exactly by conjugating a solve at the reflected point,
/// never by integrating a conjugated equation.
inline JostEval reflect_v(const Potential& p, cplx lambda, int k, double x,
                          JostBackend backend = JostBackend::Auto) {
    const auto r = solve_v(p, std::conj(lambda), k, x, backend).eval;
    JostEval e = r;
    e.lambda = lambda;
    e.value = std::conj(r.value);
    e.d1 = std::conj(r.d1);
    e.d2 = std::conj(r.d2);
    return e;
}

inline JostEval reflect_u(const Potential& p, cplx lambda, int k, double x,
                          JostBackend backend = JostBackend::Auto) {
    const auto r = solve_u(p, std::conj(lambda), k, x, backend).eval;
    JostEval e = r;
    e.lambda = lambda;
    e.value = std::conj(r.value);
    e.d1 = std::conj(r.d1);
    e.d2 = std::conj(r.d2);
    return e;
}

struct PairWronskianReport {
    /// residual of each of the three pair identities at each probe abscissa
    std::vector<std::array<double, 3>> residuals;
    double max_residual = 0;
    /// worst spread of any identity's residual across the probe abscissas
    double x_spread = 0;
};

/// Pair-Wronskian identities for the right-normalized family:
///   W{v1,v2} = sqrt(3) z_+ zeta_0 v0_plus,
///   W{v0,v1} = sqrt(3) z_+ zeta_2 v1_plus,
///   W{v2,v0} = sqrt(3) z_+ zeta_1 v2_plus,
/// where W{f,g} = f g' - g f' and "plus" is the conjugate reflection.
inline PairWronskianReport pair_wronskian_identity_check(
    const Potential& p, cplx lambda, const std::vector<double>& xs = {0.0, 0.4, 0.9},
    JostBackend backend = JostBackend::Auto) {
    PairWronskianReport rep;
    const cplx zp = lambda * p.n_plus();
    const double s3 = std::sqrt(3.0);
    for (double x : xs) {
        std::array<JostEval, 3> v, vp;
        for (int k = 0; k < 3; ++k) {
            v[k] = solve_v(p, lambda, k, x, backend).eval;
            vp[k] = reflect_v(p, lambda, k, x, backend);
        }
        auto pair_w = [](const JostEval& f, const JostEval& g) {
            return f.value * g.d1 - g.value * f.d1;
        };
        std::array<double, 3> row;
        row[0] = std::abs(pair_w(v[1], v[2]) - s3 * zp * zeta(0) * vp[0].value);
        row[1] = std::abs(pair_w(v[0], v[1]) - s3 * zp * zeta(2) * vp[1].value);
        row[2] = std::abs(pair_w(v[2], v[0]) - s3 * zp * zeta(1) * vp[2].value);
        for (double r : row) rep.max_residual = std::max(rep.max_residual, r);
        rep.residuals.push_back(row);
    }
    for (int i = 0; i < 3; ++i) {
        double lo = std::numeric_limits<double>::max(), hi = 0;
        for (const auto& row : rep.residuals) {
            lo = std::min(lo, row[i]);
            hi = std::max(hi, row[i]);
        }
        rep.x_spread = std::max(rep.x_spread, hi - lo);
    }
    return rep;
}

/// Matrix connecting the left-normalized solution triple to the
/// right-normalized one: u = T v.
struct TransitionMatrix {
    cplx lambda;
    double kappa = 1;
    Eigen::Matrix3cd t;
};

namespace detail {

/// Row 0 of the transition matrix from the cross-Wronskian representation,
/// evaluated at abscissa x (the result is x-independent):
///   t_{0,0} = -zeta_0 / (3 z_+^2) {u0 (v0p)'' - u0' (v0p)' + u0'' v0p},
///   t_{0,1} = -zeta_1 / (3 z_+^2) {u0 (v2p)'' - u0' (v2p)' + u0'' v2p},
///   t_{0,2} = -zeta_2 / (3 z_+^2) {u0 (v1p)'' - u0' (v1p)' + u0'' v1p},
/// with vkp the conjugate reflection of v_k. The prefactor comes from
/// dividing the cross Wronskian by the exact triple Wronskian -3 sqrt(3)
/// z_+^3 of the right-normalized family.
inline std::array<cplx, 3> transition_row0(const Potential& p, cplx lambda, double x,
                                           JostBackend backend) {
    if (lambda == cplx(0)) throw std::invalid_argument("transition_row0: lambda = 0");
    const auto u = solve_u(p, lambda, 0, x, backend).eval;
    std::array<JostEval, 3> vp;
    for (int l = 0; l < 3; ++l) vp[l] = reflect_v(p, lambda, l, x, backend);
    const cplx zp = lambda * p.n_plus();
    const cplx pref = -1.0 / (3.0 * zp * zp);
    auto form = [&](const JostEval& w) {
        return u.value * w.d2 - u.d1 * w.d1 + u.d2 * w.value;
    };
    return {pref * zeta(0) * form(vp[0]), pref * zeta(1) * form(vp[2]),
            pref * zeta(2) * form(vp[1])};
}

}  // namespace detail

/// Transition matrix from row 0 plus the rotation symmetry: the rows at
/// lambda are the row-0 entries at lambda*zeta_1 and lambda*zeta_2 in cycled
/// column order, so only three row-0 evaluations are ever performed.
inline TransitionMatrix transition_matrix(const Potential& p, cplx lambda,
                                          JostBackend backend = JostBackend::Auto) {
    TransitionMatrix T;
    T.lambda = lambda;
    T.kappa = p.kappa();
    const auto r0 = detail::transition_row0(p, lambda, 0.0, backend);
    const auto r1 = detail::transition_row0(p, lambda * zeta(1), 0.0, backend);
    const auto r2 = detail::transition_row0(p, lambda * zeta(2), 0.0, backend);
    T.t << r0[0], r0[1], r0[2],  //
        r1[2], r1[0], r1[1],     //
        r2[1], r2[2], r2[0];
    return T;
}

/// Transformation coefficient r0 and scattering coefficients s1, s2 of the
/// wave incident from the right. A vanishing t00 flags a bound-state
/// candidate instead of dividing.
struct Coefficients {
    cplx r0, s1, s2;
    bool bound_state_candidate = false;
};

inline Coefficients coefficients(const TransitionMatrix& T) {
    Coefficients c;
    const cplx t00 = T.t(0, 0);
    const double scale = T.t.cwiseAbs().maxCoeff();
    if (std::abs(t00) < 1e-9 * std::max(scale, 1.0)) {
        c.bound_state_candidate = true;
        const double nan = std::numeric_limits<double>::quiet_NaN();
        c.r0 = c.s1 = c.s2 = cplx(nan, nan);
        return c;
    }
    c.r0 = 1.0 / t00;
    c.s1 = T.t(0, 1) / t00;
    c.s2 = T.t(0, 2) / t00;
    return c;
}

/// Diagonal transformation matrix R: entries 1/t00 evaluated at lambda,
/// lambda*zeta_1, lambda*zeta_2, read off the diagonal of T.
inline Eigen::Matrix3cd transformation_matrix(const TransitionMatrix& T) {
    Eigen::Matrix3cd r = Eigen::Matrix3cd::Zero();
    for (int k = 0; k < 3; ++k) {
        if (T.t(k, k) == cplx(0))
            throw std::invalid_argument("transformation_matrix: vanishing diagonal entry");
        r(k, k) = 1.0 / T.t(k, k);
    }
    return r;
}

/// Hollow scattering matrix S with the rotated coefficients placed so that
/// T = R^{-1} (I + S) holds identically.
inline Eigen::Matrix3cd scattering_matrix(const TransitionMatrix& T) {
    Eigen::Matrix3cd s = Eigen::Matrix3cd::Zero();
    s(0, 1) = T.t(0, 1) / T.t(0, 0);
    s(0, 2) = T.t(0, 2) / T.t(0, 0);
    s(1, 0) = T.t(1, 0) / T.t(1, 1);
    s(1, 2) = T.t(1, 2) / T.t(1, 1);
    s(2, 0) = T.t(2, 0) / T.t(2, 2);
    s(2, 1) = T.t(2, 1) / T.t(2, 2);
    return s;
}

/// Dual transition matrix (v = T_dual u): kappa^{-2} J T*(conj lambda) J.
/// Requires the matrix at the reflected point; when lambda is real the given
/// matrix is reused without extra solves.
inline TransitionMatrix dual_matrix(const Potential& p, const TransitionMatrix& T,
                                    JostBackend backend = JostBackend::Auto) {
    const cplx lc = std::conj(T.lambda);
    const Eigen::Matrix3cd tc =
        (lc == T.lambda) ? T.t : transition_matrix(p, lc, backend).t;
    const Eigen::Matrix3cd j = involution_J();
    TransitionMatrix D;
    D.lambda = T.lambda;
    D.kappa = T.kappa;
    D.t = (1.0 / (T.kappa * T.kappa)) * j * tc.adjoint() * j;
    return D;
}

/// Scalar unitarity residual of the direct problem, i.e. the (0,0) entry of
/// T J T*(conj lambda) = kappa^2 J written in coefficient form:
///   kappa^2 r0 r0p = 1 + zeta_2 s1 s2p + zeta_1 s2 s1p
/// ("p" marks the conjugate reflection). Note the zeta factors follow the
/// off-diagonal entries of the involution: zeta_2 multiplies the s1 term.
inline double unitarity_residual(const Coefficients& c, const Coefficients& c_reflected,
                                 double kappa) {
    const cplx r0p = std::conj(c_reflected.r0);
    const cplx s1p = std::conj(c_reflected.s1), s2p = std::conj(c_reflected.s2);
    return std::abs(kappa * kappa * c.r0 * r0p - 1.0 - zeta(2) * c.s1 * s2p -
                    zeta(1) * c.s2 * s1p);
}

/// Scalar unitarity residual of the dual problem:
///   kappa^{-2} r0d r0dp = 1 + zeta_2 s1d s2dp + zeta_1 s2d s1dp.
inline double dual_unitarity_residual(const Coefficients& d,
                                      const Coefficients& d_reflected, double kappa) {
    const cplx r0p = std::conj(d_reflected.r0);
    const cplx s1p = std::conj(d_reflected.s1), s2p = std::conj(d_reflected.s2);
    return std::abs(d.r0 * r0p / (kappa * kappa) - 1.0 - zeta(2) * d.s1 * s2p -
                    zeta(1) * d.s2 * s1p);
}

struct ReciprocityReport {
    /// residual of the identity in its traditionally printed form (dual
    /// coefficients only in the first slots, zeta_1 leading); this form does
    /// not follow from the unitarity pair and is generally nonzero
    double printed = 0;
    /// residual of the identity that actually follows from subtracting the
    /// direct and dual unitarity relations:
    ///   zeta_2 s1 s2p + zeta_1 s2 s1p = zeta_2 s1d s2dp + zeta_1 s2d s1dp
    double symmetric = 0;
};

/// Reciprocity between the direct and dual scattering coefficients ("p"
/// marks the conjugate reflection, "d" the dual problem). Both the printed
/// and the derived symmetric variants are reported.
inline ReciprocityReport reciprocity_check(const Potential& p, cplx lambda,
                                           JostBackend backend = JostBackend::Auto) {
    const auto T = transition_matrix(p, lambda, backend);
    const cplx lc = std::conj(lambda);
    const auto Tc = (lc == lambda) ? T : transition_matrix(p, lc, backend);
    const auto c = coefficients(T);
    const auto cc = coefficients(Tc);
    const auto cd = coefficients(dual_matrix(p, T, backend));
    const auto cdc = coefficients(dual_matrix(p, Tc, backend));
    const cplx s1p = std::conj(cc.s1), s2p = std::conj(cc.s2);
    const cplx s1dp = std::conj(cdc.s1), s2dp = std::conj(cdc.s2);
    ReciprocityReport rep;
    const cplx lhs_printed = zeta(1) * c.s1 * s2p + zeta(2) * c.s2 * s1p;
    rep.printed =
        std::abs(lhs_printed - (zeta(1) * cd.s1 * s2p + zeta(2) * cd.s2 * s1p));
    const cplx lhs = zeta(2) * c.s1 * s2p + zeta(1) * c.s2 * s1p;
    rep.symmetric =
        std::abs(lhs - (zeta(2) * cd.s1 * s2dp + zeta(1) * cd.s2 * s1dp));
    return rep;
}

/// Energetic-balance residual between scattered and transformed waves:
///   || (I+S) J (I+S(conj lambda)^*) - kappa^2 R J R(conj lambda)^* ||.
inline double energetic_balance_check(const Potential& p, cplx lambda,
                                      JostBackend backend = JostBackend::Auto) {
    const auto T = transition_matrix(p, lambda, backend);
    const cplx lc = std::conj(lambda);
    const auto Tc = (lc == lambda) ? T : transition_matrix(p, lc, backend);
    const Eigen::Matrix3cd j = involution_J();
    const Eigen::Matrix3cd i3 = Eigen::Matrix3cd::Identity();
    const Eigen::Matrix3cd s = scattering_matrix(T), sc = scattering_matrix(Tc);
    const Eigen::Matrix3cd r = transformation_matrix(T), rc = transformation_matrix(Tc);
    const double k2 = T.kappa * T.kappa;
    return ((i3 + s) * j * (i3 + sc.adjoint()) - k2 * r * j * rc.adjoint()).norm();
}

struct BoundState {
    cplx lambda;                ///< location of the zero of t00
    double ray_parameter = 0;   ///< mu > 0 or nu < 0 along its ray
    double multiplicity = 0;    ///< local order estimate from a log-log fit
    double abs_t00 = 0;         ///< |t00| at the polished point
};

struct BoundStateReport {
    std::vector<BoundState> mu_ray;  ///< zeros lambda = mu * zeta_2, mu > 0
    std::vector<BoundState> nu_ray;  ///< zeros lambda = nu * zeta_1, nu < 0
    double min_abs_t00_mu = 0;       ///< smallest sampled |t00| on each ray
    double min_abs_t00_nu = 0;
};

namespace detail {

inline std::vector<BoundState> scan_ray(const Potential& p, cplx direction, double lo,
                                        double hi, int n_samples, JostBackend backend,
                                        double& min_abs) {
    auto t00 = [&](double s) {
        return transition_row0(p, s * direction, 0.0, backend)[0];
    };
    std::vector<double> par(n_samples), mag(n_samples);
    for (int i = 0; i < n_samples; ++i) {
        par[i] = lo + (hi - lo) * (i + 0.5) / n_samples;
        mag[i] = std::abs(t00(par[i]));
    }
    min_abs = *std::min_element(mag.begin(), mag.end());
    std::vector<BoundState> found;
    for (int i = 1; i + 1 < n_samples; ++i) {
        if (!(mag[i] < mag[i - 1] && mag[i] < mag[i + 1] && mag[i] < 1e-2)) continue;
        // golden-section polish of |t00| in the bracketing interval
        double a = par[i - 1], b = par[i + 1];
        for (int it = 0; it < 80; ++it) {
            const double c = a + 0.381966 * (b - a), d = b - 0.381966 * (b - a);
            if (std::abs(t00(c)) < std::abs(t00(d))) b = d; else a = c;
        }
        const double s0 = 0.5 * (a + b);
        const double f0 = std::abs(t00(s0));
        if (f0 > 1e-9) continue;
        // order estimate: slope of log|t00| against log distance from the zero
        const double h1 = std::max(1e-4, 1e-3 * std::abs(s0));
        const double g1 = std::abs(t00(s0 + h1)), g2 = std::abs(t00(s0 + 2 * h1));
        BoundState bs;
        bs.ray_parameter = s0;
        bs.lambda = s0 * direction;
        bs.abs_t00 = f0;
        bs.multiplicity = std::log(g2 / g1) / std::log(2.0);
        found.push_back(bs);
    }
    return found;
}

}  // namespace detail

/// Search for zeros of t00 on the two rays that the reality of lambda^3
/// confines them to: lambda = mu*zeta_2 (mu > 0) and lambda = nu*zeta_1
/// (nu < 0), within the given radius.
inline BoundStateReport find_bound_states(const Potential& p, double search_disk_radius,
                                          JostBackend backend = JostBackend::Auto,
                                          int n_samples = 48) {
    if (search_disk_radius <= 0)
        throw std::invalid_argument("find_bound_states: radius must be positive");
    BoundStateReport rep;
    const double eps = search_disk_radius / (4.0 * n_samples);
    rep.mu_ray = detail::scan_ray(p, zeta(2), eps, search_disk_radius, n_samples, backend,
                                  rep.min_abs_t00_mu);
    rep.nu_ray = detail::scan_ray(p, zeta(1), -search_disk_radius, -eps, n_samples,
                                  backend, rep.min_abs_t00_nu);
    return rep;
}

}  // namespace cubicstring

#endif
