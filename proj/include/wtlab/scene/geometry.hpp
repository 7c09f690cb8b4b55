#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "wtlab/common.hpp"

namespace wtlab {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot3(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm3(const Vec3& a) { return std::sqrt(dot3(a, a)); }

// Rotation by Euler angles applied about x, then y, then z (R = Rz Ry Rx).
inline Vec3 rotate_xyz(const Vec3& v, const Vec3& angles) {
  const double cx = std::cos(angles[0]), sx = std::sin(angles[0]);
  const double cy = std::cos(angles[1]), sy = std::sin(angles[1]);
  const double cz = std::cos(angles[2]), sz = std::sin(angles[2]);
  Vec3 r{v[0], cx * v[1] - sx * v[2], sx * v[1] + cx * v[2]};
  r = {cy * r[0] + sy * r[2], r[1], -sy * r[0] + cy * r[2]};
  return {cz * r[0] - sz * r[1], sz * r[0] + cz * r[1], r[2]};
}

// Uniform linear array. Element m sits at center + (m - (M-1)/2) * spacing * axis.
struct ArrayGeometry {
  std::size_t num_mics = 8;
  double spacing = 0.04;
  Vec3 center{0.0, 0.0, 0.0};
  Vec3 rotation{0.0, 0.0, 0.0};

  // Unit vector pointing from mic 0 towards mic M-1.
  Vec3 axis() const { return rotate_xyz({1.0, 0.0, 0.0}, rotation); }

  std::vector<Vec3> positions() const {
    std::vector<Vec3> out(num_mics);
    const Vec3 ax = axis();
    const double mid = 0.5 * static_cast<double>(num_mics - 1);
    for (std::size_t m = 0; m < num_mics; ++m) {
      out[m] = center + (static_cast<double>(m) - mid) * spacing * ax;
    }
    return out;
  }

  // Far-field angle in degrees under the steering convention
  // a_m = exp(-j 2 pi f m d cos(theta) / c): 0 deg is endfire on the mic-0 side.
  double doa_deg(const Vec3& point) const {
    const Vec3 u = point - center;
    const double c = -dot3(axis(), u) / norm3(u);
    return std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / kPi;
  }
};

}  // namespace wtlab
