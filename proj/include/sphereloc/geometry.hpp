#pragma once

#include <cmath>
#include <stdexcept>

namespace sphereloc {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

// Normalizes a longitude to [-pi, pi).
inline double normalize_lon(double lon) {
    if (!std::isfinite(lon)) throw std::invalid_argument("longitude must be finite");
    double r = std::remainder(lon, 2.0 * kPi);  // (-pi, pi]
    if (r == kPi) r = -kPi;
    // remainder() can return -0.0; keep the canonical zero.
    return r == 0.0 ? 0.0 : r;
}

// A point on the unit sphere given as (longitude lambda, latitude phi),
// both in radians. Longitude lives in [-pi, pi), latitude in [-pi/2, pi/2].
// Degrees never enter the library; converting degree-valued files is the
// CLI reader's job.
struct SphericalPoint {
    double lon = 0.0;
    double lat = 0.0;

    SphericalPoint() = default;
    SphericalPoint(double lon_rad, double lat_rad) : lon(normalize_lon(lon_rad)), lat(lat_rad) {
        if (!(lat_rad >= -kPi / 2 && lat_rad <= kPi / 2))
            throw std::invalid_argument("latitude outside [-pi/2, pi/2]");
    }
};

// Unit-sphere embedding of a SphericalPoint. Field order is (z, x, y) with
//   z = sin(phi), x = cos(phi) cos(lambda), y = cos(phi) sin(lambda),
// i.e. z is the pole axis. All downstream dot products are order-agnostic,
// but the fixed field order matters to encoders that serialize features.
struct CartesianPoint {
    double z = 0.0;
    double x = 0.0;
    double y = 0.0;
};

inline CartesianPoint to_cartesian(const SphericalPoint& p) {
    double cphi = std::cos(p.lat);
    return {std::sin(p.lat), cphi * std::cos(p.lon), cphi * std::sin(p.lon)};
}

inline double dot(const CartesianPoint& a, const CartesianPoint& b) {
    return a.z * b.z + a.x * b.x + a.y * b.y;
}

// Central angle between two points, in [0, pi]. The dot product is clamped
// to [-1, 1] before acos so nearly-identical and nearly-antipodal pairs do
// not produce NaN.
inline double central_angle(const SphericalPoint& a, const SphericalPoint& b) {
    double d = dot(to_cartesian(a), to_cartesian(b));
    if (d > 1.0) d = 1.0;
    if (d < -1.0) d = -1.0;
    return std::acos(d);
}

// Sphere radius; strictly positive.
struct SphereRadius {
    double value = 1.0;
    SphereRadius() = default;
    explicit SphereRadius(double r) : value(r) {
        if (!(r > 0.0)) throw std::invalid_argument("sphere radius must be > 0");
    }
};

inline double great_circle_distance(const SphericalPoint& a, const SphericalPoint& b,
                                    SphereRadius radius = SphereRadius{}) {
    return radius.value * central_angle(a, b);
}

// Straight-line (chord) distance between the unit-sphere embeddings.
inline double chord_distance(const SphericalPoint& a, const SphericalPoint& b) {
    CartesianPoint ca = to_cartesian(a), cb = to_cartesian(b);
    double dz = ca.z - cb.z, dx = ca.x - cb.x, dy = ca.y - cb.y;
    return std::sqrt(dz * dz + dx * dx + dy * dy);
}

// Location equality. Both poles are single points: at |lat| = pi/2 the
// longitude is ignored.
inline bool same_location(const SphericalPoint& a, const SphericalPoint& b) {
    if (a.lat != b.lat) return false;
    if (a.lat == kPi / 2 || a.lat == -kPi / 2) return true;
    return a.lon == b.lon;
}

}  // namespace sphereloc
