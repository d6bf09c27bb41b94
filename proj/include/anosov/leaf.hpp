// Local invariant manifolds, the bracket [x,y] = W^u_loc(x) ∩ W^s_loc(y),
// and holonomy correspondences between transverse leaf segments.
//
// The bracket is found by a two-dimensional Newton iteration on a pair of
// scalar deviation functions: at scale m, the condition "z lies on W^u(x)"
// is expressed as "the stable component of the displacement between a^{-m}z
// and a^{-m}x vanishes", and "z lies on W^s(y)" as "the unstable component
// of the displacement between a^{m}z and a^{m}y vanishes".  Both level sets
// converge to the true leaves at rate lambda^{-3m}, so a short escalation of
// scales pins the intersection far below the requested tolerance.
#pragma once

#include <anosov/common.hpp>
#include <anosov/map.hpp>
#include <anosov/splitting.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace anosov {

enum class LeafSide { stable, unstable };

inline const char* to_string(LeafSide s) {
  return s == LeafSide::stable ? "stable" : "unstable";
}

struct BracketOptions {
  double chart_radius = 0.1;   // max torus distance between the two anchors
  double tolerance = 1e-9;     // transverse residual |D| / |grad D|
  double orbit_guard = 0.16;   // max coordinate of any tracked displacement
  int max_scale = 12;          // deepest deviation scale
  int newton_cap = 24;         // Newton steps per scale
};

namespace detail {

// Covectors extracting the unstable / stable coefficient of a tangent
// vector written in the frame (e_u(p), e_s(p)): the rows of the frame
// inverse.
struct FrameDual {
  Vec2 row_u;  // <row_u, v> = coefficient of e_u in v
  Vec2 row_s;  // <row_s, v> = coefficient of e_s in v
};

inline FrameDual frame_dual(const TorusMap& map, TorusPoint p, int depth = 40) {
  Vec2 eu = unstable_direction(map, p, depth);
  Vec2 es = stable_direction(map, p, depth);
  double det = cross(eu, es);
  if (std::fabs(det) < 1e-12)
    throw NonConvergence("splitting frame is numerically degenerate");
  // inverse of [eu es] (columns): rows are (es x ., eu x .) / det
  return FrameDual{Vec2{es.y / det, -es.x / det},
                   Vec2{-eu.y / det, eu.x / det}};
}

// One scalar deviation condition at scale m together with its gradient.
struct Deviation {
  double value = 0.0;   // raw covector-projected displacement
  Vec2 gradient{};      // d(value)/dz, a row vector
};

}  // namespace detail

// The local product bracket [x, y] := W^u_loc(x) ∩ W^s_loc(y).
inline TorusPoint bracket(const TorusMap& map, TorusPoint x, TorusPoint y,
                          const BracketOptions& opts = {}) {
  Vec2 sep = nearest_displacement(x, y);
  if (sep.norm() > opts.chart_radius)
    throw OutOfChart("bracket anchors are " + std::to_string(sep.norm()) +
                     " apart; chart radius is " +
                     std::to_string(opts.chart_radius));

  // Fast path: coincident anchors.
  if (sep.norm() == 0.0) return x;

  // Initial guess: intersection of the straight lines through x along
  // e_u(x) and through y along e_s(y).  Solve x + t*eu = y + s*es.
  Vec2 eu = unstable_direction(map, x);
  Vec2 es = stable_direction(map, y);
  Mat2 lines{eu.x, -es.x, eu.y, -es.y};
  Vec2 ts = lines.solve(sep);
  TorusPoint z = x.shifted(eu * ts.x);

  // Orbits of the anchors are independent of z; precompute to max scale.
  int deepest = std::max(1, opts.max_scale);
  std::vector<TorusPoint> x_back(deepest + 1), y_fwd(deepest + 1);
  x_back[0] = x;
  y_fwd[0] = y;
  for (int i = 1; i <= deepest; ++i) {
    x_back[i] = map.apply_inverse(x_back[i - 1]);
    y_fwd[i] = map.apply(y_fwd[i - 1]);
  }

  std::vector<int> scales;
  for (int m : {1, 2, 3, 6, 9})
    if (m < deepest) scales.push_back(m);
  scales.push_back(deepest);
  double final_residual = 0.0;
  for (int m : scales) {
    detail::FrameDual du = detail::frame_dual(map, x_back[m]);
    detail::FrameDual ds = detail::frame_dual(map, y_fwd[m]);
    for (int it = 0;; ++it) {
      if (it >= opts.newton_cap)
        throw OutOfChart("bracket Newton stalled at scale " +
                         std::to_string(m));
      // Backward sweep: displacement of a^{-i}z from a^{-i}x and the
      // derivative of a^{-m} at z.
      TorusPoint zb = z;
      Mat2 jac_b = Mat2::identity();
      for (int i = 1; i <= m; ++i) {
        zb = map.apply_inverse(zb);
        jac_b = map.derivative(zb).inverse() * jac_b;
        Vec2 w = nearest_displacement(x_back[i], zb);
        if (std::fabs(w.x) > opts.orbit_guard ||
            std::fabs(w.y) > opts.orbit_guard)
          throw OutOfChart("backward orbit left the bracket tube");
      }
      Vec2 w_b = nearest_displacement(x_back[m], zb);
      detail::Deviation dev_u{dot(du.row_s, w_b),
                              Vec2{du.row_s.x * jac_b.a + du.row_s.y * jac_b.c,
                                   du.row_s.x * jac_b.b + du.row_s.y * jac_b.d}};

      // Forward sweep.
      TorusPoint zf = z;
      Mat2 jac_f = Mat2::identity();
      for (int i = 1; i <= m; ++i) {
        jac_f = map.derivative(zf) * jac_f;
        zf = map.apply(zf);
        Vec2 w = nearest_displacement(y_fwd[i], zf);
        if (std::fabs(w.x) > opts.orbit_guard ||
            std::fabs(w.y) > opts.orbit_guard)
          throw OutOfChart("forward orbit left the bracket tube");
      }
      Vec2 w_f = nearest_displacement(y_fwd[m], zf);
      detail::Deviation dev_s{dot(ds.row_u, w_f),
                              Vec2{ds.row_u.x * jac_f.a + ds.row_u.y * jac_f.c,
                                   ds.row_u.x * jac_f.b + ds.row_u.y * jac_f.d}};

      double gu = dev_u.gradient.norm(), gs = dev_s.gradient.norm();
      if (gu == 0.0 || gs == 0.0)
        throw NonConvergence("bracket deviation gradient vanished");
      double ru = dev_u.value / gu, rs = dev_s.value / gs;
      final_residual = std::max(std::fabs(ru), std::fabs(rs));

      Mat2 jac{dev_u.gradient.x / gu, dev_u.gradient.y / gu,
               dev_s.gradient.x / gs, dev_s.gradient.y / gs};
      Vec2 step = jac.solve(Vec2{-ru, -rs});
      double sn = step.norm();
      if (sn > 0.05) step = step * (0.05 / sn);
      z = z.shifted(step);
      if (step.norm() < 1e-13) break;
    }
  }
  if (final_residual > opts.tolerance)
    throw OutOfChart("bracket residual " + std::to_string(final_residual) +
                     " exceeds tolerance");
  return z;
}

// A traced piece of W^sigma_loc(base): increasing arclength params with the
// base at param 0, and the corresponding torus points.
struct LeafSegment {
  TorusPoint base{};
  LeafSide side = LeafSide::unstable;
  std::vector<double> params;
  std::vector<TorusPoint> points;

  double half_length() const {
    return params.empty() ? 0.0 : std::max(-params.front(), params.back());
  }
};

namespace detail {

// Transverse Newton correction pinning z onto the leaf of `base` at scale m:
// unstable side zeroes the stable component of the backward deviation,
// stable side the unstable component of the forward deviation.  Returns the
// applied correction length.
inline double leaf_correct(const TorusMap& map, LeafSide side,
                           const std::vector<TorusPoint>& base_orbit, int m,
                           const FrameDual& deep_dual, TorusPoint& z) {
  double moved = 0.0;
  for (int pass = 0; pass < 3; ++pass) {
    TorusPoint w = z;
    Mat2 jac = Mat2::identity();
    if (side == LeafSide::unstable) {
      for (int i = 1; i <= m; ++i) {
        w = map.apply_inverse(w);
        jac = map.derivative(w).inverse() * jac;
      }
    } else {
      for (int i = 1; i <= m; ++i) {
        jac = map.derivative(w) * jac;
        w = map.apply(w);
      }
    }
    Vec2 disp = nearest_displacement(base_orbit[static_cast<size_t>(m)], w);
    if (std::fabs(disp.x) > 0.45 || std::fabs(disp.y) > 0.45)
      throw LeafEscape("leaf node deviation left the tracking tube");
    Vec2 row = side == LeafSide::unstable ? deep_dual.row_s : deep_dual.row_u;
    double value = dot(row, disp);
    Vec2 grad{row.x * jac.a + row.y * jac.c, row.x * jac.b + row.y * jac.d};
    double g2 = grad.norm_sq();
    if (g2 == 0.0) throw NonConvergence("leaf corrector gradient vanished");
    Vec2 step = grad * (-value / g2);
    z = z.shifted(step);
    moved += step.norm();
    if (step.norm() < 1e-14) break;
  }
  return moved;
}

}  // namespace detail

// Trace W^sigma_loc(p) out to +-half_length by integrating the unit line
// field with classical 4th-order steps, re-projecting every node onto the
// leaf through the dynamical characterization.
inline LeafSegment local_manifold(const TorusMap& map, TorusPoint p,
                                  LeafSide side, double half_length,
                                  double step = 1.0 / 256.0,
                                  int correction_scale = 8) {
  if (half_length <= 0.0 || half_length > 0.2)
    throw OutOfChart("leaf half_length must lie in (0, 0.2]");
  if (step <= 0.0 || step > half_length) step = half_length / 8.0;

  // Orbit of the base point in the contracting direction of the corrector.
  std::vector<TorusPoint> base_orbit(static_cast<size_t>(correction_scale) + 1);
  base_orbit[0] = p;
  for (int i = 1; i <= correction_scale; ++i)
    base_orbit[static_cast<size_t>(i)] =
        side == LeafSide::unstable
            ? map.apply_inverse(base_orbit[static_cast<size_t>(i - 1)])
            : map.apply(base_orbit[static_cast<size_t>(i - 1)]);
  detail::FrameDual deep_dual = detail::frame_dual(
      map, base_orbit[static_cast<size_t>(correction_scale)]);

  Vec2 dir0 = side == LeafSide::unstable ? unstable_direction(map, p)
                                         : stable_direction(map, p);

  // March one branch; orientation kept continuous by sign-matching each
  // field evaluation against the previous direction.
  auto field = [&](TorusPoint q, Vec2 align) {
    Vec2 e = side == LeafSide::unstable ? unstable_direction(map, q)
                                        : stable_direction(map, q);
    return dot(e, align) < 0.0 ? -e : e;
  };
  auto march = [&](double sign) {
    std::vector<TorusPoint> pts;
    std::vector<double> ss;
    TorusPoint z = p;
    Vec2 heading = dir0 * sign;
    double s = 0.0;
    int n_steps = static_cast<int>(std::ceil(half_length / step));
    for (int k = 0; k < n_steps; ++k) {
      double h = std::min(step, half_length - s);
      Vec2 k1 = field(z, heading);
      Vec2 k2 = field(z.shifted(k1 * (h / 2)), k1);
      Vec2 k3 = field(z.shifted(k2 * (h / 2)), k2);
      Vec2 k4 = field(z.shifted(k3 * h), k3);
      Vec2 move = (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
      z = z.shifted(move);
      heading = k4;
      double drift = detail::leaf_correct(map, side, base_orbit,
                                          correction_scale, deep_dual, z);
      if (drift > 1e-6)
        throw LeafEscape("leaf corrector moved a node by " +
                         std::to_string(drift));
      s += h;
      ss.push_back(sign * s);
      pts.push_back(z);
    }
    return std::pair{ss, pts};
  };

  auto [neg_s, neg_p] = march(-1.0);
  auto [pos_s, pos_p] = march(+1.0);

  LeafSegment seg;
  seg.base = p;
  seg.side = side;
  seg.params.reserve(neg_s.size() + pos_s.size() + 1);
  seg.points.reserve(seg.params.capacity());
  for (size_t i = neg_s.size(); i-- > 0;) {
    seg.params.push_back(neg_s[i]);
    seg.points.push_back(neg_p[i]);
  }
  seg.params.push_back(0.0);
  seg.points.push_back(p);
  for (size_t i = 0; i < pos_s.size(); ++i) {
    seg.params.push_back(pos_s[i]);
    seg.points.push_back(pos_p[i]);
  }
  return seg;
}

// Point on the segment at a given arclength param: polyline interpolation
// between the bracketing nodes, then transverse re-projection onto the leaf.
inline TorusPoint segment_point(const TorusMap& map, const LeafSegment& seg,
                                double param, int correction_scale = 8) {
  if (seg.params.size() < 2) throw OutOfChart("leaf segment has no extent");
  if (param < seg.params.front() - 1e-12 ||
      param > seg.params.back() + 1e-12)
    throw OutOfChart("param outside the traced leaf segment");
  auto it = std::upper_bound(seg.params.begin(), seg.params.end(), param);
  size_t hi = std::min(seg.params.size() - 1,
                       static_cast<size_t>(
                           std::max<std::ptrdiff_t>(1, it - seg.params.begin())));
  size_t lo = hi - 1;
  double t = (param - seg.params[lo]) / (seg.params[hi] - seg.params[lo]);
  Vec2 chord = nearest_displacement(seg.points[lo], seg.points[hi]);
  TorusPoint z = seg.points[lo].shifted(chord * t);

  std::vector<TorusPoint> base_orbit(static_cast<size_t>(correction_scale) + 1);
  base_orbit[0] = seg.base;
  for (int i = 1; i <= correction_scale; ++i)
    base_orbit[static_cast<size_t>(i)] =
        seg.side == LeafSide::unstable
            ? map.apply_inverse(base_orbit[static_cast<size_t>(i - 1)])
            : map.apply(base_orbit[static_cast<size_t>(i - 1)]);
  detail::FrameDual deep_dual = detail::frame_dual(
      map, base_orbit[static_cast<size_t>(correction_scale)]);
  detail::leaf_correct(map, seg.side, base_orbit, correction_scale, deep_dual,
                       z);
  return z;
}

// Arclength param of the polyline point nearest to q (orthogonal projection
// onto the closest edge).  Throws NoIntersection if q sits further than
// `max_distance` from the polyline.
inline double project_param(const LeafSegment& seg, TorusPoint q,
                            double max_distance = 5e-3) {
  if (seg.points.size() < 2) throw OutOfChart("leaf segment has no extent");
  double best_d2 = std::numeric_limits<double>::infinity();
  double best_param = 0.0;
  const size_t last = seg.points.size() - 2;
  for (size_t i = 0; i + 1 < seg.points.size(); ++i) {
    Vec2 edge = nearest_displacement(seg.points[i], seg.points[i + 1]);
    Vec2 rel = nearest_displacement(seg.points[i], q);
    double len2 = edge.norm_sq();
    // Terminal edges extrapolate slightly instead of clamping: a point a
    // hair past the traced range must not silently collapse onto the end
    // node, which would merge distinct params.
    double lo = i == 0 ? -0.25 : 0.0;
    double hi = i == last ? 1.25 : 1.0;
    double t = len2 > 0.0 ? std::clamp(dot(rel, edge) / len2, lo, hi) : 0.0;
    Vec2 off = rel - edge * t;
    if (off.norm_sq() < best_d2) {
      best_d2 = off.norm_sq();
      best_param = seg.params[i] + t * (seg.params[i + 1] - seg.params[i]);
    }
  }
  if (std::sqrt(best_d2) > max_distance)
    throw NoIntersection("point lies " + std::to_string(std::sqrt(best_d2)) +
                         " off the leaf polyline");
  return best_param;
}

// Holonomy correspondence between two transverse-side segments: each node of
// `from` slides along the leaf of the complementary foliation onto `to`.
// For stable holonomy (`from`, `to` unstable segments) the slide image of z
// is [z's stable leaf] ∩ W^u(to.base)... concretely the bracket
// [to.base, z]; for unstable holonomy it is [z, to.base].
struct HolonomyCorrespondence {
  std::vector<size_t> from_index;
  std::vector<double> from_param;
  std::vector<double> to_param;
  std::vector<TorusPoint> image;
};

inline HolonomyCorrespondence holonomy(const TorusMap& map,
                                       const LeafSegment& from,
                                       const LeafSegment& to,
                                       const BracketOptions& opts = {}) {
  if (from.side != to.side)
    throw OutOfChart("holonomy requires two segments of the same side");
  HolonomyCorrespondence h;
  for (size_t i = 0; i < from.points.size(); ++i) {
    TorusPoint z = from.points[i];
    TorusPoint w = from.side == LeafSide::unstable
                       ? bracket(map, to.base, z, opts)
                       : bracket(map, z, to.base, opts);
    double tp;
    try {
      tp = project_param(to, w);
    } catch (const NoIntersection&) {
      continue;  // slid leaf crosses outside the traced target window
    }
    if (tp <= to.params.front() + 1e-9 || tp >= to.params.back() - 1e-9)
      continue;  // clamped to an endpoint: not a true interior crossing
    h.from_index.push_back(i);
    h.from_param.push_back(from.params[i]);
    h.to_param.push_back(tp);
    h.image.push_back(w);
  }
  if (h.to_param.size() < 2)
    throw NoIntersection("holonomy produced fewer than two crossings");
  return h;
}

}  // namespace anosov
