#pragma once
// Periodic points.
//
// For the linear part A the fixed points of A^n form the finite rational
// group ker(A^n - I  mod Z^2); the Smith normal form of B = A^n - I
// enumerates them exactly as B-cosets x = V (i/d1, j/d2), all over the common
// denominator D = d1 d2.  Orbits are split with exact integer arithmetic.
// For perturbed maps, seeds are polished by Newton iteration - either one
// point at a time against a^n, or a whole cycle at once by multiple shooting,
// which stays well-conditioned when the single-shot monodromy would overflow
// the attraction basin.

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "anosov/common.hpp"
#include "anosov/int_matrix.hpp"
#include "anosov/map.hpp"

namespace anosov {

// exact point (n1/den, n2/den) with 0 <= n1, n2 < den
struct RationalPoint {
  std::int64_t n1 = 0, n2 = 0, den = 1;
  TorusPoint to_point() const {
    return TorusPoint(static_cast<double>(n1) / static_cast<double>(den),
                      static_cast<double>(n2) / static_cast<double>(den));
  }
};

struct LinearPeriodicSet {
  int period = 1;
  std::int64_t count = 0;        // |det(A^period - I)|
  std::int64_t denominator = 1;  // common denominator of every point
  std::vector<RationalPoint> points;
};

inline LinearPeriodicSet periodic_points_linear(const IntMatrix2& A, int period,
                                                std::int64_t cap = 2'000'000) {
  if (period < 1) throw ValidationError("period must be >= 1");
  IntMatrix2 B = A.pow(period) - IntMatrix2::identity();
  std::int64_t det = B.det();
  if (det == 0)
    throw ValidationError("A^n has eigenvalue 1; the linear part is not hyperbolic");
  std::int64_t count = det < 0 ? -det : det;
  if (count > cap)
    throw OverflowLimit("periodic set of size " + std::to_string(count) +
                        " exceeds cap " + std::to_string(cap));
  SmithForm s = smith_form(B);
  std::int64_t D = s.d1 * s.d2;

  LinearPeriodicSet out;
  out.period = period;
  out.count = count;
  out.denominator = D;
  out.points.reserve(static_cast<std::size_t>(count));
  const std::int64_t m1 = D / s.d1, m2 = D / s.d2;
  auto wrap = [D](std::int64_t v) { return ((v % D) + D) % D; };
  for (std::int64_t i = 0; i < s.d1; ++i)
    for (std::int64_t j = 0; j < s.d2; ++j) {
      std::int64_t k1 = wrap(s.V.a * i * m1 + s.V.b * j * m2);
      std::int64_t k2 = wrap(s.V.c * i * m1 + s.V.d * j * m2);
      out.points.push_back(RationalPoint{k1, k2, D});
    }
  return out;
}

// exact action x -> A x on numerators mod the common denominator
inline RationalPoint apply_linear_exact(const IntMatrix2& A, const RationalPoint& p) {
  auto wrap = [&](std::int64_t v) { return ((v % p.den) + p.den) % p.den; };
  return RationalPoint{wrap(A.a * p.n1 + A.b * p.n2),
                       wrap(A.c * p.n1 + A.d * p.n2), p.den};
}

// Orbits listed by first-encountered point; each orbit walks consecutive
// A-images starting from its lowest-index member.
struct OrbitDecomposition {
  std::vector<std::vector<std::size_t>> orbits;  // indices into the point list
};

inline OrbitDecomposition decompose_orbits(const IntMatrix2& A,
                                           const LinearPeriodicSet& set) {
  const std::int64_t D = set.denominator;
  std::unordered_map<std::int64_t, std::size_t> index;
  index.reserve(set.points.size() * 2);
  for (std::size_t i = 0; i < set.points.size(); ++i) {
    const auto& p = set.points[i];
    index.emplace(p.n1 * D + p.n2, i);
  }
  std::vector<char> seen(set.points.size(), 0);
  OrbitDecomposition out;
  for (std::size_t i = 0; i < set.points.size(); ++i) {
    if (seen[i]) continue;
    std::vector<std::size_t> orbit;
    std::size_t cur = i;
    for (int guard = 0; guard <= set.period; ++guard) {
      if (seen[cur]) break;
      seen[cur] = 1;
      orbit.push_back(cur);
      RationalPoint next = apply_linear_exact(A, set.points[cur]);
      auto it = index.find(next.n1 * D + next.n2);
      if (it == index.end())
        throw NotFound("orbit image left the periodic set (internal error)");
      cur = it->second;
    }
    if (cur != i)
      throw ValidationError("orbit closed on a different point (internal error)");
    out.orbits.push_back(std::move(orbit));
  }
  return out;
}

struct RefineOptions {
  double tol = 1e-13;
  int max_iter = 50;
};

struct RefinedPoint {
  TorusPoint point;
  double residual = 0.0;
  int iterations = 0;
};

// Newton against F(x) = a^period(x) - x, solving (M - I) s = -g with the
// monodromy M chained along the orbit.
inline RefinedPoint refine_periodic_point(const TorusMap& map, TorusPoint seed,
                                          int period, RefineOptions opts = {}) {
  if (period < 1) throw ValidationError("period must be >= 1");
  TorusPoint x = seed;
  for (int it = 0; it <= opts.max_iter; ++it) {
    TorusPoint y = x;
    Mat2 M = Mat2::identity();
    for (int k = 0; k < period; ++k) {
      M = map.derivative(y) * M;
      y = map.apply(y);
    }
    Vec2 g = nearest_displacement(x, y);  // a^n(x) - x, shortest representative
    if (g.norm() <= opts.tol)
      return RefinedPoint{x, g.norm(), it};
    Mat2 J{M.a - 1.0, M.b, M.c, M.d - 1.0};
    Vec2 s = J.solve(-1.0 * g);
    x = TorusPoint(x.x1 + s.x, x.x2 + s.y);
  }
  throw NonConvergence("periodic point refinement stalled (period " +
                       std::to_string(period) + ")");
}

struct RefinedOrbit {
  std::vector<TorusPoint> points;
  double residual = 0.0;  // max per-step displacement error
  int iterations = 0;
};

// Multiple shooting on the cyclic system a(x_i) = x_{i+1 mod d}: linearized,
// s_{i+1} = D_i s_i + delta_i closes up through (M - I) s_0 = -c with
// M = D_{d-1} ... D_0 and c the delta terms pushed to the seam.  Per-step
// residuals stay at the working precision even when the monodromy is huge.
inline RefinedOrbit refine_orbit(const TorusMap& map,
                                 const std::vector<TorusPoint>& seeds,
                                 RefineOptions opts = {}) {
  const std::size_t d = seeds.size();
  if (d == 0) throw ValidationError("refine_orbit needs at least one point");
  if (d == 1) {
    RefinedPoint r = refine_periodic_point(map, seeds[0], 1, opts);
    return RefinedOrbit{{r.point}, r.residual, r.iterations};
  }
  std::vector<TorusPoint> x = seeds;
  std::vector<Mat2> D(d);
  std::vector<Vec2> delta(d);
  for (int it = 0; it <= opts.max_iter; ++it) {
    double worst = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      D[i] = map.derivative(x[i]);
      delta[i] = nearest_displacement(x[(i + 1) % d], map.apply(x[i]));
      worst = std::max(worst, delta[i].norm());
    }
    if (worst <= opts.tol) return RefinedOrbit{x, worst, it};
    // c = sum_i D_{d-1}..D_{i+1} delta_i, accumulated backwards
    Mat2 M = Mat2::identity();
    Vec2 c{0.0, 0.0};
    for (std::size_t i = d; i-- > 0;) {
      c += M.apply(delta[i]);
      M = M * D[i];
    }
    Mat2 J{M.a - 1.0, M.b, M.c, M.d - 1.0};
    Vec2 s = J.solve(-1.0 * c);
    for (std::size_t i = 0; i < d; ++i) {
      x[i] = TorusPoint(x[i].x1 + s.x, x[i].x2 + s.y);
      s = D[i].apply(s) + delta[i];
    }
  }
  throw NonConvergence("orbit refinement stalled (length " + std::to_string(d) + ")");
}

}  // namespace anosov
