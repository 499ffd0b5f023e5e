#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "beamtrack/math.hpp"

namespace beamtrack {

/// Triangular mesh over the unit sphere obtained by recursively splitting an
/// icosahedron. Level L has 10*4^L + 2 vertices and 20*4^L triangles.
/// Immutable after construction.
struct SphericalGrid {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  int level = 0;

  int vertex_count() const { return static_cast<int>(vertices.size()); }
  int triangle_count() const { return static_cast<int>(triangles.size()); }
};

namespace detail {

/// Icosahedron with one vertex at each pole and two rings of five.
inline SphericalGrid base_icosahedron() {
  SphericalGrid g;
  g.level = 0;
  g.vertices.push_back({0.0, 0.0, 1.0});
  const double lat = std::atan(0.5);  // ring latitude
  for (int k = 0; k < 5; ++k) {
    double az = 2.0 * kPi * k / 5.0;
    g.vertices.push_back(
        {std::cos(lat) * std::cos(az), std::cos(lat) * std::sin(az),
         std::sin(lat)});
  }
  for (int k = 0; k < 5; ++k) {
    double az = 2.0 * kPi * (k + 0.5) / 5.0;
    g.vertices.push_back(
        {std::cos(lat) * std::cos(az), std::cos(lat) * std::sin(az),
         -std::sin(lat)});
  }
  g.vertices.push_back({0.0, 0.0, -1.0});

  for (int k = 0; k < 5; ++k) {
    int a = 1 + k, b = 1 + (k + 1) % 5;
    g.triangles.push_back({0, a, b});  // top cap
  }
  for (int k = 0; k < 5; ++k) {
    int a = 1 + k, b = 1 + (k + 1) % 5;
    int c = 6 + k, d = 6 + (k + 1) % 5;
    g.triangles.push_back({a, b, c});
    g.triangles.push_back({b, d, c});
  }
  for (int k = 0; k < 5; ++k) {
    int c = 6 + k, d = 6 + (k + 1) % 5;
    g.triangles.push_back({11, d, c});  // bottom cap
  }
  return g;
}

}  // namespace detail

/// Builds the search grid by `level` rounds of 4-way triangle subdivision.
/// Midpoint vertices are shared across neighboring triangles and re-projected
/// onto the unit sphere.
inline SphericalGrid build_icosahedral_grid(int level) {
  if (level < 0) throw std::invalid_argument("grid: level must be >= 0");
  if (level > 8) {
    throw std::invalid_argument("grid: level > 8 exceeds the size limit");
  }
  SphericalGrid g = detail::base_icosahedron();
  for (int l = 0; l < level; ++l) {
    std::unordered_map<std::uint64_t, int> midpoint;
    midpoint.reserve(g.triangles.size() * 2);
    auto mid = [&](int a, int b) {
      std::uint64_t key =
          (static_cast<std::uint64_t>(std::min(a, b)) << 32) |
          static_cast<std::uint64_t>(std::max(a, b));
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      Vec3 v = (g.vertices[a] + g.vertices[b]).normalized();
      g.vertices.push_back(v);
      int idx = static_cast<int>(g.vertices.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(g.triangles.size() * 4);
    for (const auto& t : g.triangles) {
      int ab = mid(t[0], t[1]);
      int bc = mid(t[1], t[2]);
      int ca = mid(t[2], t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({t[1], bc, ab});
      next.push_back({t[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    g.triangles = std::move(next);
  }
  g.level = level;
  return g;
}

/// Local search lattice around a coarse direction: 5 azimuthal offsets x
/// 5 elevational offsets x 5 distances. Offsets are uniform in angle over
/// +/- radius_deg; distances are log-spaced over [0.5, 5] m since delay
/// sensitivity to range falls off roughly as 1/d.
struct RefinedGrid {
  struct Point {
    Vec3 direction;
    double distance_m;
  };
  std::array<Point, 125> points;
  Vec3 center;
};

inline RefinedGrid build_refined_grid(const Vec3& center,
                                      double coarse_radius_deg = 2.5) {
  RefinedGrid grid;
  grid.center = center.normalized();

  // Tangent-plane frame at the center (east/north); degenerate at the poles
  // where any horizontal axis works.
  Vec3 up{0.0, 0.0, 1.0};
  Vec3 east = up.cross(grid.center);
  if (east.norm() < 1e-9) east = {1.0, 0.0, 0.0};
  east = east.normalized();
  Vec3 north = grid.center.cross(east);

  const double r = deg2rad(coarse_radius_deg);
  std::array<double, 5> angle{-r, -r / 2.0, 0.0, r / 2.0, r};
  std::array<double, 5> dist{};
  const double d0 = 0.5, d1 = 5.0;
  for (int i = 0; i < 5; ++i) {
    dist[i] = d0 * std::exp(std::log(d1 / d0) * i / 4.0);
  }

  int idx = 0;
  for (int di = 0; di < 5; ++di) {
    for (int ei = 0; ei < 5; ++ei) {
      for (int ai = 0; ai < 5; ++ai) {
        double da = angle[ai], de = angle[ei];
        Vec3 dir = grid.center * (std::cos(de) * std::cos(da)) +
                   east * (std::cos(de) * std::sin(da)) +
                   north * std::sin(de);
        grid.points[idx++] = {dir.normalized(), dist[di]};
      }
    }
  }
  return grid;
}

}  // namespace beamtrack
