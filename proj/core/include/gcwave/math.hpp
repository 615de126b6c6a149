#pragma once

#include <array>
#include <cmath>

namespace gcwave {

struct Vec3 {
  std::array<double, 3> c{0.0, 0.0, 0.0};

  Vec3() = default;
  Vec3(double a, double b, double d) : c{a, b, d} {}

  double& operator[](int i) { return c[static_cast<size_t>(i)]; }
  double operator[](int i) const { return c[static_cast<size_t>(i)]; }

  Vec3& operator+=(const Vec3& o) {
    c[0] += o.c[0]; c[1] += o.c[1]; c[2] += o.c[2];
    return *this;
  }
  Vec3& operator-=(const Vec3& o) {
    c[0] -= o.c[0]; c[1] -= o.c[1]; c[2] -= o.c[2];
    return *this;
  }
  Vec3& operator*=(double s) {
    c[0] *= s; c[1] *= s; c[2] *= s;
    return *this;
  }
};

inline Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
inline Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
inline Vec3 operator*(double s, Vec3 a) { return a *= s; }
inline Vec3 operator*(Vec3 a, double s) { return a *= s; }
inline Vec3 operator/(Vec3 a, double s) { return a *= (1.0 / s); }
inline Vec3 operator-(const Vec3& a) { return {-a[0], -a[1], -a[2]}; }

inline double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline double norm2(const Vec3& a) { return dot(a, a); }
inline double norm(const Vec3& a) { return std::sqrt(norm2(a)); }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1],
          a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}

/// Japanese bracket <x> = sqrt(1 + |x|^2).
inline double jbracket(const Vec3& x) { return std::sqrt(1.0 + norm2(x)); }

/// Symmetric 3x3 matrix, stored as the upper triangle.
struct Sym3 {
  // order: (0,0) (0,1) (0,2) (1,1) (1,2) (2,2)
  std::array<double, 6> a{0, 0, 0, 0, 0, 0};

  static Sym3 identity() {
    Sym3 s;
    s.a = {1, 0, 0, 1, 0, 1};
    return s;
  }
  static Sym3 scaled_identity(double w) {
    Sym3 s;
    s.a = {w, 0, 0, w, 0, w};
    return s;
  }

  double operator()(int i, int j) const {
    if (i > j) std::swap(i, j);
    static constexpr int off[3] = {0, 3, 5};
    return a[static_cast<size_t>(off[i] + (j - i))];
  }
  void set(int i, int j, double v) {
    if (i > j) std::swap(i, j);
    static constexpr int off[3] = {0, 3, 5};
    a[static_cast<size_t>(off[i] + (j - i))] = v;
  }

  Vec3 apply(const Vec3& v) const {
    return {a[0] * v[0] + a[1] * v[1] + a[2] * v[2],
            a[1] * v[0] + a[3] * v[1] + a[4] * v[2],
            a[2] * v[0] + a[4] * v[1] + a[5] * v[2]};
  }
  /// v^T S w
  double quad(const Vec3& v, const Vec3& w) const { return dot(apply(w), v); }

  Sym3& operator+=(const Sym3& o) {
    for (size_t i = 0; i < 6; ++i) a[i] += o.a[i];
    return *this;
  }
  Sym3& operator*=(double s) {
    for (size_t i = 0; i < 6; ++i) a[i] *= s;
    return *this;
  }
};

inline Sym3 operator-(Sym3 l, const Sym3& r) {
  for (size_t i = 0; i < 6; ++i) l.a[i] -= r.a[i];
  return l;
}

/// General 3x3 matrix; m(k, j) with k the row index.
struct Mat3 {
  std::array<double, 9> a{};
  double operator()(int k, int j) const { return a[static_cast<size_t>(3 * k + j)]; }
  double& operator()(int k, int j) { return a[static_cast<size_t>(3 * k + j)]; }
  Vec3 row(int k) const { return {(*this)(k, 0), (*this)(k, 1), (*this)(k, 2)}; }
};

constexpr double kPi = 3.14159265358979323846;

/// C^3 smoothstep ramp: 0 for t <= 0, 1 for t >= 1.
inline double smoothstep3(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double t2 = t * t;
  return t2 * t2 * (35.0 - 84.0 * t + t2 * (70.0 - 20.0 * t));
}

/// Derivative of smoothstep3.
inline double smoothstep3_deriv(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  const double t2 = t * t;
  return t2 * t * (140.0 - 420.0 * t + t2 * (420.0 - 140.0 * t));
}

/// Plateau bump of radius pair (r_in, r_out): 1 on [0, r_in], 0 beyond r_out.
inline double plateau(double r, double r_in, double r_out) {
  if (r <= r_in) return 1.0;
  if (r >= r_out) return 0.0;
  return smoothstep3((r_out - r) / (r_out - r_in));
}

}  // namespace gcwave
