#ifndef CUBICSTRING_GEOMETRY_HPP
#define CUBICSTRING_GEOMETRY_HPP

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cubicstring {

using cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;

/// Absolute angular tolerance (radians) for deciding whether a point lies on
/// one of the twelve boundary rays.
inline constexpr double ray_angle_tol = 1e-12;

/// Cube roots of unity: zeta(0)=1, zeta(1)=(-1+i*sqrt(3))/2, zeta(2)=conj(zeta(1)).
inline cplx zeta(int k) {
    static const double r = std::sqrt(3.0) / 2.0;
    switch (k) {
        case 0: return {1.0, 0.0};
        case 1: return {-0.5, r};
        case 2: return {-0.5, -r};
        default: throw std::out_of_range("zeta: index must be 0, 1 or 2");
    }
}

/// Region tags for the plane decomposition induced by the lines through the
/// cube-root directions and their quarter-turn rotations.
enum class RegionKind {
    Origin,
    RayL,      ///< l_{zeta_k}: outgoing ray in direction zeta_k
    RayLHat,   ///< outgoing ray in direction -zeta_k
    RayIL,     ///< outgoing ray in direction i*zeta_k
    RayILHat,  ///< outgoing ray in direction -i*zeta_k
    Sector     ///< open 30-degree wedge between adjacent rays
};

/// Finest classification of a point: either the origin, one of the twelve
/// rays (index = k of the ray family), or an open wedge recorded as the pair
/// of 60-degree sectors containing it (s_index for S_p, si_index for S_q(i)).
struct SectorId {
    RegionKind kind = RegionKind::Origin;
    int ray_index = -1;  ///< k in {0,1,2} when kind is a ray
    int s_index = -1;    ///< p with arg in (p*pi/3, (p+1)*pi/3)
    int si_index = -1;   ///< q with arg - pi/2 in (q*pi/3, (q+1)*pi/3)

    friend bool operator==(const SectorId&, const SectorId&) = default;
};

namespace detail {

/// Wrap an angle into [0, 2*pi).
inline double wrap_angle(double a) {
    a = std::fmod(a, 2.0 * pi);
    if (a < 0) a += 2.0 * pi;
    return a;
}

/// Signed distance of angle a from angle b, wrapped into (-pi, pi].
inline double angle_diff(double a, double b) {
    double d = std::fmod(a - b, 2.0 * pi);
    if (d > pi) d -= 2.0 * pi;
    if (d <= -pi) d += 2.0 * pi;
    return d;
}

}  // namespace detail

/// Total classification of the lambda plane. Boundary rays win over sectors;
/// the twelve ray directions are the multiples of pi/6.
inline SectorId classify(cplx lambda) {
    if (lambda == cplx(0.0, 0.0)) return SectorId{};
    const double phi = detail::wrap_angle(std::arg(lambda));

    // Ray directions: arg = m*pi/6. Even m belongs to the l / l-hat family,
    // odd m to the i-rotated family.
    const double m_real = phi / (pi / 6.0);
    const long m = std::lround(m_real);
    if (std::abs(detail::angle_diff(phi, static_cast<double>(m) * pi / 6.0)) <= ray_angle_tol) {
        const int mm = static_cast<int>(((m % 12) + 12) % 12);
        SectorId id;
        switch (mm) {
            case 0:  id.kind = RegionKind::RayL;     id.ray_index = 0; break;
            case 4:  id.kind = RegionKind::RayL;     id.ray_index = 1; break;
            case 8:  id.kind = RegionKind::RayL;     id.ray_index = 2; break;
            case 6:  id.kind = RegionKind::RayLHat;  id.ray_index = 0; break;
            case 10: id.kind = RegionKind::RayLHat;  id.ray_index = 1; break;
            case 2:  id.kind = RegionKind::RayLHat;  id.ray_index = 2; break;
            case 3:  id.kind = RegionKind::RayIL;    id.ray_index = 0; break;
            case 7:  id.kind = RegionKind::RayIL;    id.ray_index = 1; break;
            case 11: id.kind = RegionKind::RayIL;    id.ray_index = 2; break;
            case 9:  id.kind = RegionKind::RayILHat; id.ray_index = 0; break;
            case 1:  id.kind = RegionKind::RayILHat; id.ray_index = 1; break;
            case 5:  id.kind = RegionKind::RayILHat; id.ray_index = 2; break;
            default: break;
        }
        return id;
    }

    SectorId id;
    id.kind = RegionKind::Sector;
    id.s_index = static_cast<int>(std::floor(phi / (pi / 3.0))) % 6;
    id.si_index = static_cast<int>(std::floor(detail::wrap_angle(phi - pi / 2.0) / (pi / 3.0))) % 6;
    return id;
}

/// Decay sector membership: true iff |Re(w)| < sqrt(3)*Im(w) for
/// w = lambda*zeta(k) (minus=false) or w = -lambda*zeta(k) (minus=true).
/// The bisecting ray arg(w)=pi/2 is inside; the bounding rays arg(w)=pi/6
/// and 5*pi/6 are outside (points within the angular tolerance of a bounding
/// ray count as boundary, hence outside).
inline bool in_omega(cplx lambda, int k, bool minus = false) {
    cplx w = lambda * zeta(k);
    if (minus) w = -w;
    if (w == cplx(0.0, 0.0)) return false;
    const double phi = std::arg(w);
    if (phi <= 0) return false;
    if (std::abs(detail::angle_diff(phi, pi / 6.0)) <= ray_angle_tol) return false;
    if (std::abs(detail::angle_diff(phi, 5.0 * pi / 6.0)) <= ray_angle_tol) return false;
    return phi > pi / 6.0 && phi < 5.0 * pi / 6.0;
}

}  // namespace cubicstring

#endif
