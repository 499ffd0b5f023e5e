#pragma once

#include <cmath>
#include <cstddef>
#include <limits>

namespace beamtrack {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3() = default;
  Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  Vec3& operator*=(double s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm2() const { return dot(*this); }
  double norm() const { return std::sqrt(norm2()); }
  Vec3 normalized() const {
    double n = norm();
    return n > 0.0 ? *this / n : Vec3{0.0, 0.0, 0.0};
  }
  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Angle between two unit vectors, robust near 0 and pi.
inline double angle_between(const Vec3& a, const Vec3& b) {
  return 2.0 * std::asin(0.5 * (a - b).norm());
}

inline double angle_between_deg(const Vec3& a, const Vec3& b) {
  return rad2deg(angle_between(a, b));
}

/// Azimuth in (-180, 180] degrees, measured in the xy plane from +x toward +y.
inline double azimuth_deg(const Vec3& v) {
  double az = rad2deg(std::atan2(v.y, v.x));
  if (az <= -180.0) az += 360.0;
  return az;
}

/// Elevation in [-90, 90] degrees above the xy plane.
inline double elevation_deg(const Vec3& v) {
  double z = v.z / (v.norm() > 0.0 ? v.norm() : 1.0);
  z = std::fmin(1.0, std::fmax(-1.0, z));
  return rad2deg(std::asin(z));
}

inline Vec3 direction_from_angles_deg(double azimuth, double elevation) {
  double az = deg2rad(azimuth);
  double el = deg2rad(elevation);
  return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
          std::sin(el)};
}

/// Wraps an azimuth difference into (-180, 180].
inline double wrap_degrees(double deg) {
  deg = std::fmod(deg, 360.0);
  if (deg > 180.0) deg -= 360.0;
  if (deg <= -180.0) deg += 360.0;
  return deg;
}

/// Normalized linear interpolation between unit vectors.
inline Vec3 nlerp(const Vec3& a, const Vec3& b, double u) {
  Vec3 m = a * (1.0 - u) + b * u;
  double n = m.norm();
  if (n < 1e-12) {
    // Antipodal endpoints: fall back to the first endpoint.
    return a;
  }
  return m / n;
}

}  // namespace beamtrack
