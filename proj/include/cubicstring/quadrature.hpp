#ifndef CUBICSTRING_QUADRATURE_HPP
#define CUBICSTRING_QUADRATURE_HPP

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <complex>
#include <stdexcept>

namespace cubicstring {

/// Adaptive Gauss-Kronrod integration of a complex-valued function on [a,b].
/// Real and imaginary parts are integrated separately so the error control of
/// the underlying real quadrature applies to each component.
template <class F>
std::complex<double> integrate(F&& f, double a, double b, double tol = 1e-12,
                               unsigned max_depth = 15) {
    using boost::math::quadrature::gauss_kronrod;
    auto re = [&](double t) { return std::real(f(t)); };
    auto im = [&](double t) { return std::imag(f(t)); };
    double er = 0, ei = 0;
    double vr = gauss_kronrod<double, 31>::integrate(re, a, b, max_depth, tol, &er);
    double vi = gauss_kronrod<double, 31>::integrate(im, a, b, max_depth, tol, &ei);
    return {vr, vi};
}

/// Adaptive Gauss-Kronrod integration of a real-valued function on [a,b];
/// b may be infinite.
template <class F>
double integrate_real(F&& f, double a, double b, double tol = 1e-12,
                      unsigned max_depth = 15) {
    using boost::math::quadrature::gauss_kronrod;
    return gauss_kronrod<double, 31>::integrate(f, a, b, max_depth, tol);
}

/// Fixed-order composite Gauss-Legendre rule on [a,b] with n panels.
/// Deterministic node placement; used where adaptive subdivision would make
/// results depend on the integrand in hard-to-reproduce ways.
template <class F>
std::complex<double> integrate_panels(F&& f, double a, double b, int panels) {
    using boost::math::quadrature::gauss;
    if (panels < 1) throw std::invalid_argument("integrate_panels: panels < 1");
    std::complex<double> acc = 0;
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double pa = a + p * h, pb = pa + h;
        auto re = [&](double t) { return std::real(f(t)); };
        auto im = [&](double t) { return std::imag(f(t)); };
        acc += std::complex<double>(gauss<double, 15>::integrate(re, pa, pb),
                                    gauss<double, 15>::integrate(im, pa, pb));
    }
    return acc;
}

}  // namespace cubicstring

#endif
