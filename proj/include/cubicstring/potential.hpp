#ifndef CUBICSTRING_POTENTIAL_HPP
#define CUBICSTRING_POTENTIAL_HPP

#include <algorithm>
#include <cmath>

// This Boost version calls isnan unqualified inside the interpolator
// templates; make std::isnan visible at their definition point.
namespace boost::math::interpolators {
using std::isnan;
}
#include <boost/math/interpolators/pchip.hpp>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "cubicstring/quadrature.hpp"

namespace cubicstring {

/// Step-like coefficient m(x): positive limits m_plus at +infinity and
/// m_minus at -infinity, exponential decay rate a for the deviation, and a
/// perturbation defined relative to the limit of its own half-axis:
///   m(x) = m_plus  * (1 + pert(x))   for x >= 0,
///   m(x) = m_minus * (1 + pert(x))   for x <  0.

struct GaussianBump {
    double center = 0, width = 1, amplitude = 0;
};

struct Perturbation {
    enum class Kind { None, GaussianBumps, ExponentialTail, Table };
    Kind kind = Kind::None;

    std::vector<GaussianBump> bumps;  // GaussianBumps

    double tail_amplitude = 0;  // ExponentialTail: pert(x) = amp * exp(-rate*|x|)
    double tail_rate = 1;

    std::vector<double> table_x;  // Table: monotone shape-preserving cubic through
    std::vector<double> table_pert;  // (x, pert) samples, zero outside the range
};

class Potential {
  public:
    Potential(double m_plus, double m_minus, double a, Perturbation pert = {})
        : m_plus_(m_plus), m_minus_(m_minus), a_(a), pert_(std::move(pert)) {
        if (m_plus <= 0 || m_minus <= 0) throw std::invalid_argument("Potential: limits must be positive");
        if (a <= 0) throw std::invalid_argument("Potential: decay rate must be positive");
        n_plus_ = std::cbrt(m_plus_);
        n_minus_ = std::cbrt(m_minus_);
        if (pert_.kind == Perturbation::Kind::Table) {
            if (pert_.table_x.size() < 4 || pert_.table_x.size() != pert_.table_pert.size())
                throw std::invalid_argument("Potential: table needs >= 4 matching samples");
            auto xs = pert_.table_x;
            auto ys = pert_.table_pert;
            table_spline_ = std::make_shared<boost::math::interpolators::pchip<std::vector<double>>>(
                std::move(xs), std::move(ys));
        }
    }

    double m_plus() const { return m_plus_; }
    double m_minus() const { return m_minus_; }
    double a() const { return a_; }
    double n_plus() const { return n_plus_; }
    double n_minus() const { return n_minus_; }
    double kappa() const { return n_minus_ / n_plus_; }
    const Perturbation& perturbation() const { return pert_; }

    /// Relative deviation from the half-axis limit: m(x)/m_side(x) - 1.
    double pert_at(double x) const {
        switch (pert_.kind) {
            case Perturbation::Kind::None:
                return 0.0;
            case Perturbation::Kind::GaussianBumps: {
                double s = 0;
                for (const auto& b : pert_.bumps) {
                    const double u = (x - b.center) / b.width;
                    s += b.amplitude * std::exp(-0.5 * u * u);
                }
                return s;
            }
            case Perturbation::Kind::ExponentialTail:
                return pert_.tail_amplitude * std::exp(-pert_.tail_rate * std::abs(x));
            case Perturbation::Kind::Table:
                if (x < pert_.table_x.front() || x > pert_.table_x.back()) return 0.0;
                return (*table_spline_)(x);
        }
        return 0.0;
    }

    double operator()(double x) const {
        return (x >= 0 ? m_plus_ : m_minus_) * (1.0 + pert_at(x));
    }

    /// Abscissa beyond which |pert| stays below eps on the positive side.
    double support_edge_plus(double eps = 1e-14) const {
        return support_edge(false, eps);
    }
    /// Abscissa below which |pert| stays below eps on the negative side
    /// (returned as a negative number).
    double support_edge_minus(double eps = 1e-14) const {
        return -support_edge(true, eps);
    }

  private:
    double support_edge(bool negative_side, double eps) const {
        double edge = 0.0;
        switch (pert_.kind) {
            case Perturbation::Kind::None:
                break;
            case Perturbation::Kind::GaussianBumps:
                for (const auto& b : pert_.bumps) {
                    const double amp = std::abs(b.amplitude);
                    if (amp <= eps) continue;
                    const double reach = b.width * std::sqrt(2.0 * std::log(amp / eps));
                    const double c = negative_side ? -b.center : b.center;
                    edge = std::max(edge, c + reach);
                }
                break;
            case Perturbation::Kind::ExponentialTail: {
                const double amp = std::abs(pert_.tail_amplitude);
                if (amp > eps) edge = std::log(amp / eps) / pert_.tail_rate;
                break;
            }
            case Perturbation::Kind::Table:
                edge = negative_side ? std::max(0.0, -pert_.table_x.front())
                                     : std::max(0.0, pert_.table_x.back());
                break;
        }
        return edge;
    }

    double m_plus_, m_minus_, a_;
    double n_plus_, n_minus_;
    Perturbation pert_;
    std::shared_ptr<boost::math::interpolators::pchip<std::vector<double>>> table_spline_;
};

inline double m_at(const Potential& p, double x) { return p(x); }

enum class Side { Plus, Minus };

/// sigma_+(x) = int_x^inf |m(t)/m_plus - 1| dt;
/// sigma_-(x) = int_-inf^x |m(t)/m_minus - 1| dt.
/// Integrals truncate where the integrand envelope falls below 1e-14.
inline double sigma(const Potential& p, double x, Side side) {
    if (side == Side::Plus) {
        const double hi = std::max(x, p.support_edge_plus());
        if (hi <= x) return 0.0;
        auto f = [&](double t) { return std::abs(p(t) / p.m_plus() - 1.0); };
        double total = 0;
        if (x < 0) {
            total += integrate_real(f, x, 0.0, 1e-12);
            total += integrate_real(f, 0.0, hi, 1e-12);
        } else {
            total += integrate_real(f, x, hi, 1e-12);
        }
        return total;
    }
    const double lo = std::min(x, p.support_edge_minus());
    if (lo >= x) return 0.0;
    auto f = [&](double t) { return std::abs(p(t) / p.m_minus() - 1.0); };
    double total = 0;
    if (x > 0) {
        total += integrate_real(f, lo, 0.0, 1e-12);
        total += integrate_real(f, 0.0, x, 1e-12);
    } else {
        total += integrate_real(f, lo, x, 1e-12);
    }
    return total;
}

/// M_+(x) = int_x^inf (x-t)^2/2 (m(t)/m_plus - 1) dt, and the mirrored
/// M_-(x) = int_-inf^x (x-t)^2/2 (m(t)/m_minus - 1) dt. The quadratic weight
/// is used on both sides: it is the unique weight whose third x-derivative
/// returns -(m/m_limit - 1) (+ on the minus side), which is what the
/// small-lambda recovery route requires.
inline double M_profile(const Potential& p, double x, Side side) {
    if (side == Side::Plus) {
        const double hi = std::max(x, p.support_edge_plus());
        if (hi <= x) return 0.0;
        auto f = [&](double t) {
            const double d = x - t;
            return 0.5 * d * d * (p(t) / p.m_plus() - 1.0);
        };
        if (x < 0) return integrate(f, x, 0.0, 1e-12).real() + integrate(f, 0.0, hi, 1e-12).real();
        return integrate(f, x, hi, 1e-12).real();
    }
    const double lo = std::min(x, p.support_edge_minus());
    if (lo >= x) return 0.0;
    auto f = [&](double t) {
        const double d = x - t;
        return 0.5 * d * d * (p(t) / p.m_minus() - 1.0);
    };
    if (x > 0) return integrate(f, lo, 0.0, 1e-12).real() + integrate(f, 0.0, x, 1e-12).real();
    return integrate(f, lo, x, 1e-12).real();
}

struct ValidityDisk {
    double radius_plus = 0, radius_minus = 0;
};

inline ValidityDisk validity_disk(const Potential& p) {
    return {p.a() / (2.0 * p.n_plus()), p.a() / (2.0 * p.n_minus())};
}

struct PotentialReport {
    bool positive = true;
    double min_m = 0;
    double weighted_norm_plus = 0;   // int_0^inf |m - m_plus|^2 e^{2a x} dx
    double weighted_norm_minus = 0;  // int_-inf^0 |m - m_minus|^2 e^{2a|x|} dx
    bool weighted_norm_finite = true;
    ValidityDisk disk;
    double truncation_bound = 1e-14;  // envelope level where improper integrals stop
    std::vector<std::string> messages;

    bool ok() const { return positive && weighted_norm_finite; }
};

/// Admissibility report: global positivity (dense sampling with refinement
/// near extrema), finiteness of the exponentially weighted deviation norm,
/// and the small-lambda validity disks.
inline PotentialReport validate(const Potential& p) {
    PotentialReport rep;
    rep.disk = validity_disk(p);

    const double lo = std::min(-2.0, p.support_edge_minus() - 1.0);
    const double hi = std::max(2.0, p.support_edge_plus() + 1.0);
    const int per_unit = 1000;
    const int n = std::max(16, static_cast<int>((hi - lo) * per_unit));
    double min_m = std::min(p.m_plus(), p.m_minus());
    double argmin = 0;
    for (int i = 0; i <= n; ++i) {
        const double x = lo + (hi - lo) * i / n;
        const double v = p(x);
        if (v < min_m) {
            min_m = v;
            argmin = x;
        }
    }
    // golden-section refinement around the sampled minimum
    {
        double a = argmin - (hi - lo) / n, b = argmin + (hi - lo) / n;
        for (int it = 0; it < 60; ++it) {
            const double c = a + 0.381966 * (b - a), d = b - 0.381966 * (b - a);
            if (p(c) < p(d)) b = d; else a = c;
        }
        min_m = std::min(min_m, p((a + b) / 2));
    }
    rep.min_m = min_m;
    rep.positive = min_m > 0;
    if (!rep.positive) rep.messages.push_back("m(x) is not bounded away from zero");

    // Weighted deviation norms. The decay requirement fails when the weighted
    // integrand does not decrease toward the truncation edge.
    const double aa = p.a();
    auto wplus = [&](double t) {
        const double d = p(t) - p.m_plus();
        return d * d * std::exp(2.0 * aa * t);
    };
    auto wminus = [&](double t) {
        const double d = p(t) - p.m_minus();
        return d * d * std::exp(-2.0 * aa * t);
    };
    const double edge_p = std::max(1.0, p.support_edge_plus());
    const double edge_m = std::min(-1.0, p.support_edge_minus());
    rep.weighted_norm_plus = integrate_real(wplus, 0.0, edge_p, 1e-10);
    rep.weighted_norm_minus = integrate_real(wminus, edge_m, 0.0, 1e-10);
    // growth-rate probe at the edges
    const double probe_p0 = wplus(0.8 * edge_p), probe_p1 = wplus(edge_p);
    const double probe_m0 = wminus(0.8 * edge_m), probe_m1 = wminus(edge_m);
    if (probe_p1 > 1e-12 && probe_p1 >= probe_p0) {
        rep.weighted_norm_finite = false;
        rep.messages.push_back("weighted deviation norm diverges on the right half-axis");
    }
    if (probe_m1 > 1e-12 && probe_m1 >= probe_m0) {
        rep.weighted_norm_finite = false;
        rep.messages.push_back("weighted deviation norm diverges on the left half-axis");
    }
    if (p.perturbation().kind == Perturbation::Kind::ExponentialTail &&
        p.perturbation().tail_rate <= p.a()) {
        rep.weighted_norm_finite = false;
        rep.messages.push_back("exponential tail decays no faster than the declared rate a");
    }
    return rep;
}

}  // namespace cubicstring

#endif
