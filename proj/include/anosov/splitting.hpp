#pragma once
// Unstable/stable line fields and log-Jacobians.
//
// At a generic point the line fields come from cocycle power iteration: the
// unstable direction is the forward image of a generic seed transported from
// deep in the backward orbit, the stable direction the backward image of a
// seed from deep in the forward orbit.  Transverse components die at the
// uniform rate (lambda_s / lambda_u)^depth, so modest depths give full double
// accuracy.  Along a refined periodic cycle both fields are read off the
// monodromy eigenvectors and propagated in their stable directions, which is
// exact up to rounding.

#include <cmath>
#include <string>
#include <vector>

#include "anosov/common.hpp"
#include "anosov/map.hpp"

namespace anosov {

struct SplittingSample {
  TorusPoint point;
  Vec2 e_u, e_s;
  double angle = 0.0;  // angle between the two lines, radians
};

// unstable direction at p: transport a seed from a^-depth(p) forward
inline Vec2 unstable_direction(const TorusMap& map, TorusPoint p, int depth = 30) {
  if (depth < 1) throw ValidationError("direction depth must be >= 1");
  if (map.is_linear()) return map.eigen().e_u;
  std::vector<TorusPoint> orbit(static_cast<std::size_t>(depth) + 1);
  orbit[0] = p;
  for (int k = 1; k <= depth; ++k) orbit[k] = map.apply_inverse(orbit[k - 1]);
  Vec2 seed = map.eigen().e_u;
  Vec2 w = seed;
  for (int k = depth; k >= 1; --k)
    w = map.derivative(orbit[k].as_vec()).apply(w).normalized();
  // a shallower transport as settledness check; deepen once if it disagrees
  if (depth > 4 && depth <= 480) {
    Vec2 v = seed;
    for (int k = depth - 2; k >= 1; --k)
      v = map.derivative(orbit[k].as_vec()).apply(v).normalized();
    if (line_angle(w, v) > 1e-10) return unstable_direction(map, p, 2 * depth);
  }
  if (w.x < 0.0 || (w.x == 0.0 && w.y < 0.0)) w = -w;
  return w;
}

// stable direction at p: pull a seed back from a^{+depth}(p)
inline Vec2 stable_direction(const TorusMap& map, TorusPoint p, int depth = 30) {
  if (depth < 1) throw ValidationError("direction depth must be >= 1");
  if (map.is_linear()) return map.eigen().e_s;
  std::vector<TorusPoint> orbit(static_cast<std::size_t>(depth) + 1);
  orbit[0] = p;
  for (int k = 1; k <= depth; ++k) orbit[k] = map.apply(orbit[k - 1]);
  Vec2 seed = map.eigen().e_s;
  Vec2 w = seed;
  for (int k = depth - 1; k >= 0; --k)
    w = map.derivative(orbit[k].as_vec()).inverse().apply(w).normalized();
  if (depth > 4 && depth <= 480) {
    Vec2 v = seed;
    for (int k = depth - 3; k >= 0; --k)
      v = map.derivative(orbit[k].as_vec()).inverse().apply(v).normalized();
    if (line_angle(w, v) > 1e-10) return stable_direction(map, p, 2 * depth);
  }
  if (w.x < 0.0 || (w.x == 0.0 && w.y < 0.0)) w = -w;
  return w;
}

inline SplittingSample splitting_sample(const TorusMap& map, TorusPoint p,
                                        int depth = 30) {
  SplittingSample s;
  s.point = p;
  s.e_u = unstable_direction(map, p, depth);
  s.e_s = stable_direction(map, p, depth);
  s.angle = line_angle(s.e_u, s.e_s);
  return s;
}

// log of the expansion factor along the unstable line at p
inline double log_unstable_jacobian(const TorusMap& map, TorusPoint p, Vec2 e_u) {
  return std::log(map.derivative(p).apply(e_u).norm());
}
inline double log_unstable_jacobian(const TorusMap& map, TorusPoint p,
                                    int depth = 30) {
  return log_unstable_jacobian(map, p, unstable_direction(map, p, depth));
}

// log of the contraction factor along the stable line at p (negative)
inline double log_stable_jacobian(const TorusMap& map, TorusPoint p, Vec2 e_s) {
  // |Da^-1_p e_s(p)| = 1 / |Da_{a^-1 p} e_s(a^-1 p)|, so this equals
  // log J^s evaluated one step back; sums along orbits are unaffected
  return -std::log(map.derivative(p).inverse().apply(e_s).norm());
}
inline double log_stable_jacobian(const TorusMap& map, TorusPoint p,
                                  int depth = 30) {
  return log_stable_jacobian(map, p, stable_direction(map, p, depth));
}

// Splitting data along a refined periodic cycle x_{i+1} = a(x_i): the
// monodromy eigenvectors seed both fields, each propagated in the direction
// where rounding errors decay.
struct CycleSplitting {
  std::vector<Vec2> e_u, e_s;
  std::vector<double> log_ju;  // log |Da e_u| at x_i
  std::vector<double> log_js;  // log |Da e_s| at x_i  (negative)
};

inline CycleSplitting cycle_splitting(const TorusMap& map,
                                      const std::vector<TorusPoint>& cycle) {
  const std::size_t d = cycle.size();
  if (d == 0) throw ValidationError("cycle_splitting needs a nonempty cycle");
  std::vector<Mat2> D(d);
  for (std::size_t i = 0; i < d; ++i) D[i] = map.derivative(cycle[i]);
  Mat2 M = Mat2::identity();
  for (std::size_t i = 0; i < d; ++i) M = D[i] * M;  // D_{d-1} ... D_0

  double tr = M.trace(), dt = M.det();
  double disc = tr * tr - 4.0 * dt;
  if (disc <= 0.0)
    throw DegenerateExponent("cycle monodromy has no real splitting");
  double root = std::sqrt(disc);
  double l1 = 0.5 * (tr + root), l2 = 0.5 * (tr - root);
  double lu = std::abs(l1) >= std::abs(l2) ? l1 : l2;
  double ls = std::abs(l1) >= std::abs(l2) ? l2 : l1;
  auto eigvec = [&](double lam) {
    Vec2 r1{M.a - lam, M.b}, r2{M.c, M.d - lam};
    Vec2 v = (r1.norm_sq() >= r2.norm_sq()) ? Vec2{-r1.y, r1.x} : Vec2{-r2.y, r2.x};
    return v.normalized();
  };

  CycleSplitting cs;
  cs.e_u.resize(d);
  cs.e_s.resize(d);
  cs.log_ju.resize(d);
  cs.log_js.resize(d);
  cs.e_u[0] = eigvec(lu);
  for (std::size_t i = 0; i + 1 < d; ++i)
    cs.e_u[i + 1] = D[i].apply(cs.e_u[i]).normalized();
  cs.e_s[0] = eigvec(ls);
  for (std::size_t i = d; i-- > 1;) {
    std::size_t next = (i + 1) % d;
    cs.e_s[i] = D[i].inverse().apply(cs.e_s[next]).normalized();
  }
  for (std::size_t i = 0; i < d; ++i) {
    cs.log_ju[i] = std::log(D[i].apply(cs.e_u[i]).norm());
    cs.log_js[i] = std::log(D[i].apply(cs.e_s[i]).norm());
  }
  return cs;
}

}  // namespace anosov
