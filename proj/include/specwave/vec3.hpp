#pragma once

#include <array>
#include <cmath>

namespace specwave {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  constexpr double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  constexpr Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  constexpr Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  constexpr Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

  friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
  friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
  friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
  friend constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

/// Row-major 3x3 matrix. For a Jacobian, m[r][c] = d x_r / d xi_c.
struct Mat3 {
  std::array<std::array<double, 3>, 3> m{};

  constexpr double& operator()(int r, int c) { return m[r][c]; }
  constexpr double operator()(int r, int c) const { return m[r][c]; }

  constexpr Vec3 col(int c) const { return {m[0][c], m[1][c], m[2][c]}; }

  constexpr double det() const {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  }

  /// Inverse assuming det != 0; caller checks.
  constexpr Mat3 inverse() const {
    const double d = det();
    Mat3 r;
    r(0, 0) = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / d;
    r(0, 1) = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / d;
    r(0, 2) = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / d;
    r(1, 0) = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / d;
    r(1, 1) = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / d;
    r(1, 2) = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / d;
    r(2, 0) = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / d;
    r(2, 1) = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / d;
    r(2, 2) = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / d;
    return r;
  }

  constexpr Vec3 operator*(const Vec3& v) const {
    return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
  }
};

}  // namespace specwave
