#ifndef CUBICSTRING_TRIG3_HPP
#define CUBICSTRING_TRIG3_HPP

#include <complex>
#include <stdexcept>

#include "cubicstring/geometry.hpp"
#include "cubicstring/quadrature.hpp"

namespace cubicstring {

/// Generalized trigonometric functions of third order,
///   s_k(z) = (1/3) * sum_j zeta_j^{-k} exp(zeta_j z),
/// the basis of solutions of y''' = y with s_k^{(j)}(0) = delta_{kj}.
/// They obey the derivative cycle s_k' = s_{(k-1) mod 3}, the cubic identity
/// s0^3+s1^3+s2^3-3 s0 s1 s2 = 1, and exp(z*zeta_k) = s0 + zeta_k s1 + zeta_k^2 s2.
///
/// Evaluation is templated on the real scalar: the cubic identity has terms of
/// size exp(3|z|)/27, so verifying it to tight absolute tolerances at |z| ~ 5
/// needs the long double instantiation; everyday use takes double.

/// Largest |Re(zeta_j z)| accepted before exp() would leave the double range.
inline constexpr double trig3_overflow_guard = 700.0;

template <class Real>
std::complex<Real> zeta_t(int k) {
    using C = std::complex<Real>;
    static const Real r = std::sqrt(Real(3)) / Real(2);
    switch (k) {
        case 0: return C(1, 0);
        case 1: return C(Real(-0.5), r);
        case 2: return C(Real(-0.5), -r);
        default: throw std::out_of_range("zeta_t: index must be 0, 1 or 2");
    }
}

template <class Real>
struct TrigTripleT {
    std::complex<Real> s0, s1, s2;

    std::complex<Real> operator[](int k) const {
        switch (k) {
            case 0: return s0;
            case 1: return s1;
            case 2: return s2;
            default: throw std::out_of_range("TrigTriple: index must be 0, 1 or 2");
        }
    }
};

using TrigTriple = TrigTripleT<double>;

namespace detail {

inline void check_trig3_guard(cplx z) {
    for (int j = 0; j < 3; ++j) {
        if (std::abs(std::real(zeta(j) * z)) > trig3_overflow_guard)
            throw std::domain_error("trig3: |Re(zeta_j z)| exceeds overflow guard");
    }
}

}  // namespace detail

template <class Real>
TrigTripleT<Real> s_triple_t(std::complex<Real> z) {
    detail::check_trig3_guard(cplx(static_cast<double>(z.real()), static_cast<double>(z.imag())));
    const auto e0 = std::exp(z);
    const auto e1 = std::exp(zeta_t<Real>(1) * z);
    const auto e2 = std::exp(zeta_t<Real>(2) * z);
    // zeta_j^{-1} = zeta_j^2, zeta_j^{-2} = zeta_j.
    TrigTripleT<Real> t;
    t.s0 = (e0 + e1 + e2) / Real(3);
    t.s1 = (e0 + zeta_t<Real>(2) * e1 + zeta_t<Real>(1) * e2) / Real(3);
    t.s2 = (e0 + zeta_t<Real>(1) * e1 + zeta_t<Real>(2) * e2) / Real(3);
    return t;
}

/// Double-precision triple, computed through the long double path so the
/// returned values are accurate to their representation error.
inline TrigTriple s_triple(cplx z) {
    const auto t = s_triple_t<long double>(std::complex<long double>(z.real(), z.imag()));
    auto down = [](std::complex<long double> v) {
        return cplx(static_cast<double>(v.real()), static_cast<double>(v.imag()));
    };
    return TrigTriple{down(t.s0), down(t.s1), down(t.s2)};
}

inline cplx s_eval(int k, cplx z) {
    if (k < 0 || k > 2) throw std::out_of_range("s_eval: index must be 0, 1 or 2");
    return s_triple(z)[k];
}

/// Solution of the constant-coefficient Cauchy problem
///   i y''' = lambda^3 y - f,  y(0)=y0, y'(0)=y1, y''(0)=y2:
///   y(x) = y0 s0(i lam x) + y1 s1(i lam x)/(i lam) + y2 s2(i lam x)/(i lam)^2
///          + i * int_0^x s2(i lam (x-t))/(i lam)^2 f(t) dt.
/// (The sign convention for f is the one this quadrature formula satisfies;
/// it is the convention under which the scattering integral equations below
/// follow by variation of parameters.)
template <class F>
cplx cauchy_solution(cplx y0, cplx y1, cplx y2, cplx lambda, double x, F&& f) {
    if (lambda == cplx(0.0, 0.0)) throw std::invalid_argument("cauchy_solution: lambda = 0");
    const cplx il = cplx(0, 1) * lambda;
    const TrigTriple t = s_triple(il * x);
    cplx y = y0 * t.s0 + y1 * t.s1 / il + y2 * t.s2 / (il * il);
    cplx forced = integrate([&](double u) { return s_eval(2, il * (x - u)) * f(u); },
                            0.0, x);
    return y + cplx(0, 1) * forced / (il * il);
}

inline cplx cauchy_solution(cplx y0, cplx y1, cplx y2, cplx lambda, double x) {
    if (lambda == cplx(0.0, 0.0)) throw std::invalid_argument("cauchy_solution: lambda = 0");
    const cplx il = cplx(0, 1) * lambda;
    const TrigTriple t = s_triple(il * x);
    return y0 * t.s0 + y1 * t.s1 / il + y2 * t.s2 / (il * il);
}

}  // namespace cubicstring

#endif
