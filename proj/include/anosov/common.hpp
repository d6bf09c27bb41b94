#pragma once
// Core value types shared across the library: plane vectors, 2x2 real
// matrices, points on the flat 2-torus, and the error taxonomy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace anosov {

inline constexpr double kTwoPi = 6.28318530717958647692;
inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------- errors --

// All library failures derive from Error and carry a short machine-readable
// kind used by the CLI to emit structured error records.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define ANOSOV_ERROR_TYPE(NAME)                                        \
  class NAME : public Error {                                          \
   public:                                                             \
    explicit NAME(const std::string& what) : Error(#NAME, what) {}     \
  }

ANOSOV_ERROR_TYPE(ValidationError);    // malformed input / config
ANOSOV_ERROR_TYPE(NonConvergence);     // iteration failed to converge
ANOSOV_ERROR_TYPE(Collision);          // two refined points merged
ANOSOV_ERROR_TYPE(OverflowLimit);      // enumeration exceeded configured cap
ANOSOV_ERROR_TYPE(NotFound);           // search exhausted without a hit
ANOSOV_ERROR_TYPE(OutOfChart);         // local product chart left
ANOSOV_ERROR_TYPE(LeafEscape);         // traced leaf drifted off the manifold
ANOSOV_ERROR_TYPE(NoIntersection);     // holonomy target never crossed
ANOSOV_ERROR_TYPE(EmptyBall);          // too few atoms in a query ball
ANOSOV_ERROR_TYPE(DegenerateExponent); // exponent too close to zero
ANOSOV_ERROR_TYPE(DegenerateSamples);  // regression sample collapsed
ANOSOV_ERROR_TYPE(NonCommuting);       // matrix pair fails to commute
ANOSOV_ERROR_TYPE(CertificationError); // hyperbolicity certificate failed

#undef ANOSOV_ERROR_TYPE

// --------------------------------------------------------------- vectors --

struct Vec2 {
  double x = 0.0, y = 0.0;

  Vec2() = default;
  Vec2(double xx, double yy) : x(xx), y(yy) {}

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator-() const { return {-x, -y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }

  double norm() const { return std::hypot(x, y); }
  double norm_sq() const { return x * x + y * y; }
  Vec2 normalized() const {
    double n = norm();
    return n > 0.0 ? Vec2{x / n, y / n} : Vec2{0.0, 0.0};
  }
  // counter-clockwise quarter turn
  Vec2 perp() const { return {-y, x}; }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }

// unsigned angle between the lines spanned by a and b, in [0, pi/2]
inline double line_angle(Vec2 a, Vec2 b) {
  return std::atan2(std::abs(cross(a, b)), std::abs(dot(a, b)));
}

// ------------------------------------------------------------- matrices --

// Row-major real 2x2 matrix [[a, b], [c, d]].
struct Mat2 {
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;

  static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
  static Mat2 from_columns(Vec2 u, Vec2 v) { return {u.x, v.x, u.y, v.y}; }
  static Mat2 rotation(double theta) {
    double ct = std::cos(theta), st = std::sin(theta);
    return {ct, -st, st, ct};
  }
  // rank-one outer product u * w^T
  static Mat2 outer(Vec2 u, Vec2 w) {
    return {u.x * w.x, u.x * w.y, u.y * w.x, u.y * w.y};
  }

  Vec2 apply(Vec2 v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
  Mat2 operator*(const Mat2& o) const {
    return {a * o.a + b * o.c, a * o.b + b * o.d,
            c * o.a + d * o.c, c * o.b + d * o.d};
  }
  Mat2 operator+(const Mat2& o) const { return {a + o.a, b + o.b, c + o.c, d + o.d}; }
  Mat2 operator*(double s) const { return {a * s, b * s, c * s, d * s}; }

  double det() const { return a * d - b * c; }
  double trace() const { return a + d; }
  double max_abs() const {
    return std::max(std::max(std::abs(a), std::abs(b)),
                    std::max(std::abs(c), std::abs(d)));
  }
  Mat2 transpose() const { return {a, c, b, d}; }

  Mat2 inverse() const {
    double dt = det();
    if (std::abs(dt) < 1e-300)
      throw NonConvergence("singular 2x2 matrix inversion");
    return {d / dt, -b / dt, -c / dt, a / dt};
  }

  // solve M z = rhs
  Vec2 solve(Vec2 rhs) const {
    double dt = det();
    if (std::abs(dt) < 1e-300)
      throw NonConvergence("singular 2x2 linear solve");
    return {(d * rhs.x - b * rhs.y) / dt, (a * rhs.y - c * rhs.x) / dt};
  }
};

// ---------------------------------------------------------- torus points --

// A point of T^2 = R^2 / Z^2 stored by its representative in [0,1)^2.
struct TorusPoint {
  double x1 = 0.0, x2 = 0.0;

  TorusPoint() = default;
  TorusPoint(double a, double b) : x1(reduce(a)), x2(reduce(b)) {}
  static TorusPoint from_vec(Vec2 v) { return TorusPoint(v.x, v.y); }

  Vec2 as_vec() const { return {x1, x2}; }

  // fractional part in [0,1), robust against rounding to 1.0
  static double reduce(double x) {
    double r = x - std::floor(x);
    if (r >= 1.0) r -= 1.0;
    if (r < 0.0) r += 1.0;
    return r;
  }

  TorusPoint shifted(Vec2 v) const { return TorusPoint(x1 + v.x, x2 + v.y); }
};

// displacement from `from` to `to`, each component reduced to [-1/2, 1/2);
// this is the minimal-norm representative of (to - from) mod Z^2
inline Vec2 nearest_displacement(TorusPoint from, TorusPoint to) {
  auto reduce_half = [](double t) {
    double r = t - std::floor(t + 0.5);
    if (r >= 0.5) r -= 1.0;
    if (r < -0.5) r += 1.0;
    return r;
  };
  return {reduce_half(to.x1 - from.x1), reduce_half(to.x2 - from.x2)};
}

// flat-metric distance on the torus
inline double torus_distance(TorusPoint a, TorusPoint b) {
  return nearest_displacement(a, b).norm();
}

// nearest lattice-free representative of a real vector (components in [-1/2,1/2))
inline Vec2 reduce_to_half(Vec2 v) {
  return nearest_displacement(TorusPoint(0.0, 0.0), TorusPoint(v.x, v.y));
}

}  // namespace anosov
