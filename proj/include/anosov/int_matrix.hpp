#pragma once
// Exact integer 2x2 matrix arithmetic: hyperbolicity tests, overflow-checked
// powers, real eigendata, and the Smith normal form used to enumerate
// rational coset lattices.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "anosov/common.hpp"

namespace anosov {

namespace detail {
inline std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  __int128 p = static_cast<__int128>(a) * b;
  if (p > INT64_MAX || p < INT64_MIN)
    throw OverflowLimit("integer matrix product exceeds 64-bit range");
  return static_cast<std::int64_t>(p);
}
inline std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  __int128 s = static_cast<__int128>(a) + b;
  if (s > INT64_MAX || s < INT64_MIN)
    throw OverflowLimit("integer matrix sum exceeds 64-bit range");
  return static_cast<std::int64_t>(s);
}
}  // namespace detail

// Row-major integer 2x2 matrix [[a, b], [c, d]].
struct IntMatrix2 {
  std::int64_t a = 0, b = 0, c = 0, d = 0;

  static IntMatrix2 identity() { return {1, 0, 0, 1}; }

  // products are taken in 128-bit so a representable determinant never trips
  // on intermediate overflow (entries of A^n grow like lambda^n)
  std::int64_t det() const {
    __int128 v = static_cast<__int128>(a) * d - static_cast<__int128>(b) * c;
    if (v > INT64_MAX || v < INT64_MIN)
      throw OverflowLimit("integer matrix determinant exceeds 64 bits");
    return static_cast<std::int64_t>(v);
  }
  std::int64_t trace() const { return a + d; }

  bool operator==(const IntMatrix2& o) const {
    return a == o.a && b == o.b && c == o.c && d == o.d;
  }
  bool operator!=(const IntMatrix2& o) const { return !(*this == o); }

  IntMatrix2 operator*(const IntMatrix2& o) const {
    using detail::checked_add;
    using detail::checked_mul;
    return {checked_add(checked_mul(a, o.a), checked_mul(b, o.c)),
            checked_add(checked_mul(a, o.b), checked_mul(b, o.d)),
            checked_add(checked_mul(c, o.a), checked_mul(d, o.c)),
            checked_add(checked_mul(c, o.b), checked_mul(d, o.d))};
  }
  IntMatrix2 operator-(const IntMatrix2& o) const {
    return {a - o.a, b - o.b, c - o.c, d - o.d};
  }
  IntMatrix2 negated() const { return {-a, -b, -c, -d}; }

  IntMatrix2 pow(int n) const {
    if (n < 0) throw ValidationError("integer matrix power must be >= 0");
    IntMatrix2 r = identity();
    for (int i = 0; i < n; ++i) r = r * (*this);
    return r;
  }

  bool is_unimodular() const { return det() == 1 || det() == -1; }

  // hyperbolic in GL(2,Z): unimodular with no eigenvalue on the unit circle
  bool is_hyperbolic() const {
    std::int64_t dt = det();
    if (dt == 1) return std::llabs(trace()) > 2;
    if (dt == -1) return trace() != 0;  // det -1: eigenvalues are +-1 iff tr=0
    return false;
  }

  bool commutes_with(const IntMatrix2& o) const { return (*this) * o == o * (*this); }

  Mat2 as_real() const {
    return {static_cast<double>(a), static_cast<double>(b),
            static_cast<double>(c), static_cast<double>(d)};
  }

  // adjugate / det = exact inverse, valid when unimodular
  IntMatrix2 unimodular_inverse() const {
    std::int64_t dt = det();
    if (dt == 1) return {d, -b, -c, a};
    if (dt == -1) return {-d, b, c, -a};
    throw ValidationError("inverse requested for non-unimodular matrix");
  }

  std::string to_string() const {
    return "[[" + std::to_string(a) + "," + std::to_string(b) + "],[" +
           std::to_string(c) + "," + std::to_string(d) + "]]";
  }
};

// Real eigendata of a hyperbolic integer matrix.  e_u / e_s are unit vectors
// spanning the expanding / contracting eigenlines, f_u / f_s the dual basis
// (f_u . e_u = 1, f_u . e_s = 0), so components of w split as
// w = (f_u.w) e_u + (f_s.w) e_s.
struct Eigenbasis {
  double lambda_u = 0.0, lambda_s = 0.0;
  Vec2 e_u, e_s;
  Vec2 f_u, f_s;

  double split_u(Vec2 w) const { return dot(f_u, w); }
  double split_s(Vec2 w) const { return dot(f_s, w); }
  Vec2 combine(double cu, double cs) const { return cu * e_u + cs * e_s; }
};

inline Eigenbasis eigenbasis(const IntMatrix2& m) {
  if (!m.is_hyperbolic())
    throw ValidationError("eigenbasis requires a hyperbolic matrix: " + m.to_string());
  double tr = static_cast<double>(m.trace());
  double dt = static_cast<double>(m.det());
  double disc = std::sqrt(tr * tr - 4.0 * dt);
  double l1 = (tr + disc) / 2.0;
  double l2 = (tr - disc) / 2.0;
  double lu = std::abs(l1) >= std::abs(l2) ? l1 : l2;
  double ls = std::abs(l1) >= std::abs(l2) ? l2 : l1;

  auto eigvec = [&](double lam) {
    // rows of (M - lam I) are orthogonal to the eigenvector; pick the better row
    Vec2 r1{static_cast<double>(m.a) - lam, static_cast<double>(m.b)};
    Vec2 r2{static_cast<double>(m.c), static_cast<double>(m.d) - lam};
    Vec2 v = (r1.norm_sq() >= r2.norm_sq()) ? Vec2{-r1.y, r1.x} : Vec2{-r2.y, r2.x};
    v = v.normalized();
    // sign convention: first nonzero component positive
    if (v.x < 0.0 || (v.x == 0.0 && v.y < 0.0)) v = -v;
    return v;
  };

  Eigenbasis eb;
  eb.lambda_u = lu;
  eb.lambda_s = ls;
  eb.e_u = eigvec(lu);
  eb.e_s = eigvec(ls);
  double denom = cross(eb.e_u, eb.e_s);
  if (std::abs(denom) < 1e-12)
    throw ValidationError("degenerate eigenbasis");
  // dual basis via the 2x2 inverse of [e_u | e_s]
  eb.f_u = Vec2{eb.e_s.y, -eb.e_s.x} * (1.0 / denom);
  eb.f_s = Vec2{-eb.e_u.y, eb.e_u.x} * (1.0 / denom);
  return eb;
}

// Smith normal form U * B * V = diag(d1, d2) with U, V unimodular,
// d1, d2 > 0 and d1 | d2.  Requires det(B) != 0.
struct SmithForm {
  std::int64_t d1 = 1, d2 = 1;
  IntMatrix2 U, V;
};

inline SmithForm smith_form(const IntMatrix2& B) {
  if (B.det() == 0) throw ValidationError("smith_form requires det != 0");
  std::int64_t m[2][2] = {{B.a, B.b}, {B.c, B.d}};
  std::int64_t u[2][2] = {{1, 0}, {0, 1}};
  std::int64_t v[2][2] = {{1, 0}, {0, 1}};

  auto row_swap = [&]() {
    std::swap(m[0][0], m[1][0]); std::swap(m[0][1], m[1][1]);
    std::swap(u[0][0], u[1][0]); std::swap(u[0][1], u[1][1]);
  };
  auto col_swap = [&]() {
    std::swap(m[0][0], m[0][1]); std::swap(m[1][0], m[1][1]);
    std::swap(v[0][0], v[0][1]); std::swap(v[1][0], v[1][1]);
  };
  auto row_axpy = [&](std::int64_t q) {  // row0 -= q * row1
    m[0][0] -= q * m[1][0]; m[0][1] -= q * m[1][1];
    u[0][0] -= q * u[1][0]; u[0][1] -= q * u[1][1];
  };
  auto col_axpy = [&](std::int64_t q) {  // col0 -= q * col1
    m[0][0] -= q * m[0][1]; m[1][0] -= q * m[1][1];
    v[0][0] -= q * v[0][1]; v[1][0] -= q * v[1][1];
  };

  // clear m[1][0] and m[0][1] by alternating Euclid passes, then normalize
  // signs; each full pass strictly shrinks the pivot so termination is quick
  auto reduce_to_diagonal = [&]() {
    for (int guard = 0; guard < 256; ++guard) {
      if (m[0][0] == 0) {
        // det != 0, so a nonzero pivot candidate exists in row/column 0
        if (m[1][0] != 0) row_swap();
        else col_swap();
      }
      while (m[1][0] != 0) {
        std::int64_t q = m[0][0] / m[1][0];
        row_axpy(q);
        row_swap();
      }
      while (m[0][1] != 0) {
        std::int64_t q = m[0][0] / m[0][1];
        col_axpy(q);
        col_swap();
      }
      if (m[1][0] == 0 && m[0][1] == 0) break;
    }
    if (m[0][0] < 0) { m[0][0] = -m[0][0]; u[0][0] = -u[0][0]; u[0][1] = -u[0][1]; }
    if (m[1][1] < 0) { m[1][1] = -m[1][1]; u[1][0] = -u[1][0]; u[1][1] = -u[1][1]; }
  };
  reduce_to_diagonal();

  // enforce divisibility d1 | d2: mixing column 2 into column 1 makes the
  // pivot reduce to gcd(d1, d2), which divides every entry
  if (m[1][1] % m[0][0] != 0) {
    m[0][0] += m[0][1]; m[1][0] += m[1][1];
    v[0][0] += v[0][1]; v[1][0] += v[1][1];
    reduce_to_diagonal();
  }

  SmithForm s;
  s.d1 = m[0][0];
  s.d2 = m[1][1];
  s.U = {u[0][0], u[0][1], u[1][0], u[1][1]};
  s.V = {v[0][0], v[0][1], v[1][0], v[1][1]};
  return s;
}

}  // namespace anosov
