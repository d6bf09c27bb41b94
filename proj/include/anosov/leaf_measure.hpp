// Leafwise conditional measures of an equilibrium state, the omega
// transfer cocycles along transverse leaves, and the consistency checks
// that realize the dynamical-Jacobian, holonomy-Jacobian, and local
// product-structure identities.
//
// A generation-n unstable leaf measure is built by pulling the segment back
// n steps (where it contracts to a near-straight arc), partitioning that
// arc into 2^n equal-arclength cells, and pushing the cells forward while
// accumulating the Birkhoff sum of the potential from the depth-n midpoint;
// cell masses are proportional to exp of those sums.  The stable side is
// the mirror construction under the inverse map.
#pragma once

#include <anosov/common.hpp>
#include <anosov/ensemble.hpp>
#include <anosov/leaf.hpp>
#include <anosov/potential.hpp>
#include <anosov/summation.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace anosov {

struct LeafMeasure {
  LeafSegment segment;
  int generation = 0;
  // Atom j occupies the param interval [boundaries[j], boundaries[j+1]] of
  // the segment; params[j] is the surface image of the deep cell midpoint.
  std::vector<double> boundaries;          // 2^n + 1 increasing params
  std::vector<std::pair<double, double>> atoms;  // (param, mass), mass sums to 1

  double total_mass() const {
    NeumaierAccumulator acc;
    for (const auto& a : atoms) acc.add(a.second);
    return acc.value();
  }
};

namespace detail {

// Walk a point `steps` applications of the map in the direction that
// contracts the given side (backward for unstable leaves, forward for
// stable), returning the endpoint.
inline TorusPoint contracting_endpoint(const TorusMap& map, LeafSide side,
                                       TorusPoint p, int steps) {
  for (int i = 0; i < steps; ++i)
    p = side == LeafSide::unstable ? map.apply_inverse(p) : map.apply(p);
  return p;
}

}  // namespace detail

// Generation-n conditional measure on a traced leaf segment.
inline LeafMeasure leaf_measure(const CertifiedMap& certified,
                                const Potential& phi, const LeafSegment& seg,
                                int generation) {
  if (generation < 1 || generation > 16)
    throw OutOfChart("leaf measure generation must lie in [1, 16]");
  if (seg.params.size() < 2) throw OutOfChart("leaf segment has no extent");
  const TorusMap& map = certified.map();
  const LeafSide side = seg.side;

  // Backward orbit of the base (in the side's contracting direction),
  // extended past the anchor depth so the per-step corrector below has a
  // deep reference window.
  constexpr int kCorrScale = 6;
  std::vector<TorusPoint> base_orbit(
      static_cast<size_t>(generation + kCorrScale) + 1);
  base_orbit[0] = seg.base;
  for (int k = 1; k <= generation + kCorrScale; ++k)
    base_orbit[static_cast<size_t>(k)] = detail::contracting_endpoint(
        map, side, base_orbit[static_cast<size_t>(k) - 1], 1);
  TorusPoint deep_base = base_orbit[static_cast<size_t>(generation)];

  // Pull a segment point to the anchor depth, re-pinning it onto the leaf
  // through the base orbit after every step: raw iteration lets ulp-scale
  // inversion residuals compound along the transverse direction, and their
  // lift back to the surface grows by the full n-step expansion.
  auto corrected_pullback = [&](TorusPoint p) {
    TorusPoint w = p;
    for (int k = 1; k <= generation; ++k) {
      w = detail::contracting_endpoint(map, side, w, 1);
      std::vector<TorusPoint> window(
          base_orbit.begin() + k, base_orbit.begin() + k + kCorrScale + 1);
      detail::FrameDual dual = detail::frame_dual(map, window.back(), 18);
      detail::leaf_correct(map, side, window, kCorrScale, dual, w);
    }
    return w;
  };

  Vec2 deep_dir = side == LeafSide::unstable
                      ? unstable_direction(map, deep_base)
                      : stable_direction(map, deep_base);
  TorusPoint lo_end = seg.points.front(), hi_end = seg.points.back();
  double t_lo = dot(nearest_displacement(deep_base, corrected_pullback(lo_end)),
                    deep_dir);
  double t_hi = dot(nearest_displacement(deep_base, corrected_pullback(hi_end)),
                    deep_dir);
  if (t_lo > t_hi) {
    std::swap(t_lo, t_hi);
    deep_dir = -deep_dir;  // keep deep offsets aligned with surface params
  }
  if (!(t_hi > t_lo))
    throw LeafEscape("leaf segment collapsed under the pullback");

  const size_t cells = size_t{1} << generation;
  const double width = (t_hi - t_lo) / static_cast<double>(cells);

  // Push deep points to the surface, accumulating the Birkhoff sum of phi
  // along the way (sum starts at the deep point itself).  The expanding
  // direction of the side is the forward map for unstable leaves and the
  // inverse map for stable ones.
  auto lift_to_surface = [&](TorusPoint deep, double* birkhoff) {
    double sum = 0.0;
    TorusPoint w = deep;
    for (int i = 0; i < generation; ++i) {
      if (birkhoff) sum += phi.eval(map, w);
      w = side == LeafSide::unstable ? map.apply(w) : map.apply_inverse(w);
    }
    if (birkhoff) *birkhoff = sum;
    return w;
  };

  LeafMeasure lm;
  lm.segment = seg;
  lm.generation = generation;
  lm.boundaries.resize(cells + 1);
  lm.atoms.resize(cells);

  std::vector<double> log_weights(cells);
  for (size_t j = 0; j <= cells; ++j) {
    TorusPoint deep =
        deep_base.shifted(deep_dir * (t_lo + width * static_cast<double>(j)));
    TorusPoint surf = lift_to_surface(deep, nullptr);
    lm.boundaries[j] = project_param(seg, surf);
  }
  for (size_t j = 0; j < cells; ++j) {
    TorusPoint deep = deep_base.shifted(
        deep_dir * (t_lo + width * (static_cast<double>(j) + 0.5)));
    double birkhoff = 0.0;
    TorusPoint surf = lift_to_surface(deep, &birkhoff);
    lm.atoms[j].first = project_param(seg, surf);
    log_weights[j] = birkhoff;
  }
  // The pullback/lift roundtrip carries a common-mode tangential drift of
  // order lambda^n times the per-step inversion residual — up to a cell
  // width at deep generations.  The endpoint lifts have exactly known
  // params (the segment endpoints), so pin the whole family affinely.
  // A negative scale also normalizes an orientation-reversing lift.
  const double raw_lo = lm.boundaries.front();
  const double raw_hi = lm.boundaries.back();
  if (raw_lo == raw_hi)
    throw LeafEscape("lifted cell boundaries collapsed");
  const double pin_scale =
      (seg.params.back() - seg.params.front()) / (raw_hi - raw_lo);
  auto pin = [&](double p) {
    return seg.params.front() + (p - raw_lo) * pin_scale;
  };
  for (double& b : lm.boundaries) b = pin(b);
  for (auto& a : lm.atoms) a.first = pin(a.first);
  if (lm.boundaries.back() < lm.boundaries.front()) {
    std::reverse(lm.boundaries.begin(), lm.boundaries.end());
    std::reverse(lm.atoms.begin(), lm.atoms.end());
    std::reverse(log_weights.begin(), log_weights.end());
  }
  if (!std::is_sorted(lm.boundaries.begin(), lm.boundaries.end()))
    throw LeafEscape("pushed cell boundaries lost monotonicity");

  double shift = *std::max_element(log_weights.begin(), log_weights.end());
  double total = deterministic_sum(cells, [&](size_t j) {
    return std::exp(log_weights[j] - shift);
  });
  for (size_t j = 0; j < cells; ++j)
    lm.atoms[j].second = std::exp(log_weights[j] - shift) / total;
  return lm;
}

// ---------------------------------------------------------------------------
// Interval re-binning: distribute a cell measure (masses on consecutive
// param intervals) onto a target partition by overlap fraction.  Both
// boundary lists must be increasing.
inline std::vector<double> rebin_cells(const std::vector<double>& src_bounds,
                                       const std::vector<double>& src_mass,
                                       const std::vector<double>& dst_bounds) {
  std::vector<double> out(dst_bounds.size() - 1, 0.0);
  size_t d = 0;
  for (size_t s = 0; s + 1 < src_bounds.size(); ++s) {
    double a = src_bounds[s], b = src_bounds[s + 1];
    if (!(b > a)) continue;
    while (d + 1 < dst_bounds.size() && dst_bounds[d + 1] <= a) ++d;
    for (size_t k = d; k + 1 < dst_bounds.size() && dst_bounds[k] < b; ++k) {
      double lo = std::max(a, dst_bounds[k]);
      double hi = std::min(b, dst_bounds[k + 1]);
      if (hi > lo) out[k] += src_mass[s] * (hi - lo) / (b - a);
    }
  }
  return out;
}

// Total-variation distance between two nonnegative vectors after
// normalizing each to unit mass.
inline double normalized_tv(const std::vector<double>& p,
                            const std::vector<double>& q) {
  if (p.size() != q.size())
    throw NonConvergence("TV comparison on mismatched partitions");
  double sp = 0.0, sq = 0.0;
  for (double v : p) sp += v;
  for (double v : q) sq += v;
  if (sp <= 0.0 || sq <= 0.0)
    throw NonConvergence("TV comparison on an empty measure");
  double tv = 0.0;
  for (size_t i = 0; i < p.size(); ++i)
    tv += std::fabs(p[i] / sp - q[i] / sq);
  return 0.5 * tv;
}

// Matched-interval TV between two leaf measures on the same segment,
// compared on the coarser measure's cell partition.
inline double refinement_tv(const LeafMeasure& coarse,
                            const LeafMeasure& fine) {
  std::vector<double> fine_mass(fine.atoms.size());
  for (size_t i = 0; i < fine.atoms.size(); ++i)
    fine_mass[i] = fine.atoms[i].second;
  std::vector<double> coarse_mass(coarse.atoms.size());
  for (size_t i = 0; i < coarse.atoms.size(); ++i)
    coarse_mass[i] = coarse.atoms[i].second;
  std::vector<double> binned =
      rebin_cells(fine.boundaries, fine_mass, coarse.boundaries);
  return normalized_tv(coarse_mass, binned);
}

// ---------------------------------------------------------------------------
// Omega cocycles: forward sum along the stable pair for omega_u, backward
// along the unstable pair for omega_s.

struct OmegaValue {
  double value = 0.0;
  double tail_bound = 0.0;
  int terms = 0;
};

namespace detail {

inline OmegaValue omega_sum(const TorusMap& map, const Potential& phi,
                            TorusPoint z, TorusPoint y, bool forward,
                            double tail_tol, int cap) {
  // z rides the contracting leaf of y's orbit.  Iterating both points
  // freely lets rounding error grow along the expanding direction and
  // overtake the geometric convergence within ~20 steps, so after every
  // step z is re-pinned onto the leaf by a transverse Newton correction
  // against a rolling window of y's orbit.
  constexpr int kScale = 6;
  const LeafSide side = forward ? LeafSide::stable : LeafSide::unstable;
  auto advance = [&](const TorusPoint& p) {
    return forward ? map.apply(p) : map.apply_inverse(p);
  };
  std::vector<TorusPoint> window(static_cast<size_t>(kScale) + 1);
  window[0] = y;
  for (int j = 1; j <= kScale; ++j) window[j] = advance(window[j - 1]);

  NeumaierAccumulator acc;
  double prev_gap = nearest_displacement(z, y).norm();
  double theta = 0.62;  // fallback contraction estimate before measurement
  double last_term = 0.0;
  double prev_term = std::numeric_limits<double>::infinity();
  int stall = 0;
  int i = 0;
  for (; i < cap; ++i) {
    double term = phi.eval(map, z) - phi.eval(map, window[0]);
    acc.add(term);
    last_term = std::fabs(term);
    if (last_term < tail_tol && i > 0) {
      ++i;
      break;
    }
    // Terms that stop decreasing below 1e-9 have hit the placement-noise
    // floor of the corrector; further iterates only accumulate that noise.
    if (i > 0 && last_term >= prev_term && last_term < 1e-9) {
      if (++stall >= 3) {
        ++i;
        break;
      }
    } else {
      stall = 0;
    }
    prev_term = last_term;
    z = advance(z);
    window.erase(window.begin());
    window.push_back(advance(window.back()));
    FrameDual deep = frame_dual(map, window.back(), 18);
    leaf_correct(map, side, window, kScale, deep, z);
    double gap = nearest_displacement(z, window[0]).norm();
    if (prev_gap > 1e-300) {
      double ratio = gap / prev_gap;
      if (ratio > 0.0 && ratio < 0.95) theta = std::max(theta, ratio);
    }
    prev_gap = gap;
  }
  OmegaValue out;
  out.value = acc.value();
  out.terms = i;
  out.tail_bound = last_term * theta / (1.0 - theta);
  return out;
}

}  // namespace detail

// omega_u: the log-density of stable holonomy transport of the unstable
// conditionals, summed over the forward orbit of the stable pair
// ([x,y], y).
inline OmegaValue omega_u(const CertifiedMap& certified, const Potential& phi,
                          TorusPoint x, TorusPoint y, double tail_tol = 1e-12,
                          int cap = 200, const BracketOptions& opts = {}) {
  const TorusMap& map = certified.map();
  // The transversal's placement shifts the sum linearly, so resolve the
  // intersection a couple of Newton digits past the requested tail.
  BracketOptions tight = opts;
  tight.tolerance = std::min(opts.tolerance, 1e-11);
  TorusPoint z = bracket(map, x, y, tight);
  return detail::omega_sum(map, phi, z, y, /*forward=*/true, tail_tol, cap);
}

// omega_s: mirror cocycle along the backward orbit of the unstable pair
// ([y,x], y).
inline OmegaValue omega_s(const CertifiedMap& certified, const Potential& phi,
                          TorusPoint x, TorusPoint y, double tail_tol = 1e-12,
                          int cap = 200, const BracketOptions& opts = {}) {
  const TorusMap& map = certified.map();
  BracketOptions tight = opts;
  tight.tolerance = std::min(opts.tolerance, 1e-11);
  TorusPoint z = bracket(map, y, x, tight);
  return detail::omega_sum(map, phi, z, y, /*forward=*/false, tail_tol, cap);
}

// ---------------------------------------------------------------------------
// Dynamical-Jacobian consistency: push a generation-n unstable measure
// forward one step, reweight by exp(phi(y) - P), and compare against the
// directly constructed measure on a covering segment at the image base.
struct JacobianCheck {
  double tv = 0.0;
  int generation = 0;
  double pressure = 0.0;
};

inline JacobianCheck check_dynamical_jacobian(const CertifiedMap& certified,
                                              const Potential& phi,
                                              const LeafMeasure& lm,
                                              double pressure_value) {
  const TorusMap& map = certified.map();
  const LeafSegment& seg = lm.segment;
  if (seg.side != LeafSide::unstable)
    throw OutOfChart("dynamical-Jacobian check expects an unstable measure");

  // Image segment: trace at a(base) long enough to cover a(segment).
  double span = std::max(-seg.params.front(), seg.params.back());
  double image_half = std::min(0.2, span * certified.map().eigen().lambda_u *
                                         1.35);
  TorusPoint image_base = map.apply(seg.base);
  LeafSegment image_seg = local_manifold(map, image_base, LeafSide::unstable,
                                         image_half);

  // Push boundaries and atoms through a; reweight atom masses by
  // exp(phi(preimage) - P).
  std::vector<double> pushed_bounds(lm.boundaries.size());
  for (size_t j = 0; j < lm.boundaries.size(); ++j) {
    TorusPoint b = segment_point(map, seg, lm.boundaries[j]);
    pushed_bounds[j] = project_param(image_seg, map.apply(b));
  }
  bool reversed = pushed_bounds.back() < pushed_bounds.front();
  if (reversed) std::reverse(pushed_bounds.begin(), pushed_bounds.end());
  if (!std::is_sorted(pushed_bounds.begin(), pushed_bounds.end()))
    throw LeafEscape("pushed boundaries lost monotonicity");
  std::vector<double> pushed_mass(lm.atoms.size());
  for (size_t j = 0; j < lm.atoms.size(); ++j) {
    TorusPoint y = segment_point(map, seg, lm.atoms[j].first);
    double w = lm.atoms[j].second * std::exp(phi.eval(map, y) - pressure_value);
    pushed_mass[reversed ? lm.atoms.size() - 1 - j : j] = w;
  }

  // Direct construction at the image base, restricted to the pushed window
  // by the re-binning (cells outside contribute nothing).
  LeafMeasure direct =
      leaf_measure(certified, phi, image_seg, lm.generation);
  std::vector<double> direct_mass(direct.atoms.size());
  for (size_t i = 0; i < direct.atoms.size(); ++i)
    direct_mass[i] = direct.atoms[i].second;
  std::vector<double> binned =
      rebin_cells(direct.boundaries, direct_mass, pushed_bounds);

  JacobianCheck out;
  out.generation = lm.generation;
  out.pressure = pressure_value;
  out.tv = normalized_tv(pushed_mass, binned);
  return out;
}

// ---------------------------------------------------------------------------
// Holonomy-Jacobian consistency: transport an unstable measure at x to the
// leaf of x_s (a point of W^s_loc(x)) by stable holonomy, reweight by
// exp(omega_u), and compare with the directly constructed measure there.
struct HolonomyCheck {
  double tv = 0.0;
  int generation = 0;
  double max_tail_bound = 0.0;
};

inline HolonomyCheck check_holonomy_jacobian(const CertifiedMap& certified,
                                             const Potential& phi,
                                             TorusPoint x, TorusPoint x_s,
                                             double half_length,
                                             int generation,
                                             double tail_tol = 1e-12) {
  const TorusMap& map = certified.map();
  LeafSegment seg_x = local_manifold(map, x, LeafSide::unstable, half_length);
  LeafMeasure lm_x = leaf_measure(certified, phi, seg_x, generation);

  // Target segment: long enough to contain the holonomy image window.
  double target_half = std::min(0.2, half_length * 1.6);
  LeafSegment seg_s =
      local_manifold(map, x_s, LeafSide::unstable, target_half);
  BracketOptions bo;
  bo.chart_radius = std::max(
      bo.chart_radius, 2.0 * (half_length + torus_distance(x, x_s)));

  HolonomyCheck out;
  out.generation = generation;

  // Transport cell boundaries and atom masses.
  std::vector<double> moved_bounds(lm_x.boundaries.size());
  for (size_t j = 0; j < lm_x.boundaries.size(); ++j) {
    TorusPoint b = segment_point(map, seg_x, lm_x.boundaries[j]);
    TorusPoint w = bracket(map, x_s, b, bo);
    moved_bounds[j] = project_param(seg_s, w);
  }
  bool reversed = moved_bounds.front() > moved_bounds.back();
  if (reversed) std::reverse(moved_bounds.begin(), moved_bounds.end());
  if (!std::is_sorted(moved_bounds.begin(), moved_bounds.end()))
    throw LeafEscape("holonomy transport lost monotonicity");
  std::vector<double> moved_mass(lm_x.atoms.size());
  for (size_t j = 0; j < lm_x.atoms.size(); ++j) {
    TorusPoint y = segment_point(map, seg_x, lm_x.atoms[j].first);
    TorusPoint w = bracket(map, x_s, y, bo);
    OmegaValue om = omega_u(certified, phi, x, w, tail_tol, 200, bo);
    out.max_tail_bound = std::max(out.max_tail_bound, om.tail_bound);
    moved_mass[reversed ? lm_x.atoms.size() - 1 - j : j] =
        lm_x.atoms[j].second * std::exp(om.value);
  }

  LeafMeasure lm_s = leaf_measure(certified, phi, seg_s, generation);
  std::vector<double> direct_mass(lm_s.atoms.size());
  for (size_t i = 0; i < lm_s.atoms.size(); ++i)
    direct_mass[i] = lm_s.atoms[i].second;
  std::vector<double> binned =
      rebin_cells(lm_s.boundaries, direct_mass, moved_bounds);
  out.tv = normalized_tv(moved_mass, binned);
  return out;
}

// ---------------------------------------------------------------------------
// Local product structure: assemble the measure
//   exp(omega_u + omega_s + phi) d(mu_u x mu_s)
// on a fixed torus-space chart grid and compare against a reference measure
// binned on the same cells.

struct ProductChart {
  TorusPoint center{};
  double half_extent = 0.0;   // param half-width of the chart
  int resolution = 0;
  // Fixed torus-space cell anchors: corners[b][a] is the bracket of the
  // (a-th unstable, b-th stable) boundary params of the defining center.
  std::vector<TorusPoint> corners;    // (R+1)^2, row-major over (s, u)
  std::vector<TorusPoint> centers;    // R^2 cell representatives
};

// Build the chart once from a defining center; the torus-space cells stay
// fixed when the product measure is re-assembled at another base point.
inline ProductChart build_product_chart(const CertifiedMap& certified,
                                        TorusPoint center, double half_extent,
                                        int resolution) {
  const TorusMap& map = certified.map();
  ProductChart chart;
  chart.center = center;
  chart.half_extent = half_extent;
  chart.resolution = resolution;
  // Corner anchors sit up to ~2.3 half-extents apart across the chart
  // diagonal, so widen the bracket admission radius accordingly.
  BracketOptions bo;
  bo.chart_radius = std::max(bo.chart_radius, 3.0 * half_extent);
  LeafSegment useg =
      local_manifold(map, center, LeafSide::unstable, half_extent * 1.15);
  LeafSegment sseg =
      local_manifold(map, center, LeafSide::stable, half_extent * 1.15);
  const int R = resolution;
  auto grid_param = [&](int i, int n) {
    return -half_extent + 2.0 * half_extent * static_cast<double>(i) /
                              static_cast<double>(n);
  };
  chart.corners.resize(static_cast<size_t>(R + 1) * (R + 1));
  for (int b = 0; b <= R; ++b) {
    TorusPoint q = segment_point(map, sseg, grid_param(b, R));
    for (int a = 0; a <= R; ++a) {
      TorusPoint p = segment_point(map, useg, grid_param(a, R));
      chart.corners[static_cast<size_t>(b) * (R + 1) + a] =
          bracket(map, q, p, bo);
    }
  }
  chart.centers.resize(static_cast<size_t>(R) * R);
  for (int b = 0; b < R; ++b) {
    TorusPoint q = segment_point(
        map, sseg, grid_param(b, R) + half_extent / R);
    for (int a = 0; a < R; ++a) {
      TorusPoint p = segment_point(
          map, useg, grid_param(a, R) + half_extent / R);
      chart.centers[static_cast<size_t>(b) * R + a] = bracket(map, q, p, bo);
    }
  }
  return chart;
}

// Product-formula masses of the chart cells, assembled from the leaf
// measures and cocycles based at `base`.
inline std::vector<double> product_masses(const CertifiedMap& certified,
                                          const Potential& phi,
                                          const ProductChart& chart,
                                          TorusPoint base, int generation,
                                          double tail_tol = 1e-12) {
  const TorusMap& map = certified.map();
  const int R = chart.resolution;
  BracketOptions bo;
  bo.chart_radius = std::max(bo.chart_radius, 3.0 * chart.half_extent);
  double seg_half = std::min(0.2, chart.half_extent * 1.6);
  LeafSegment useg = local_manifold(map, base, LeafSide::unstable, seg_half);
  LeafSegment sseg = local_manifold(map, base, LeafSide::stable, seg_half);
  LeafMeasure mu_u = leaf_measure(certified, phi, useg, generation);
  LeafMeasure mu_s = leaf_measure(certified, phi, sseg, generation);
  std::vector<double> mass_u(mu_u.atoms.size()), mass_s(mu_s.atoms.size());
  for (size_t i = 0; i < mu_u.atoms.size(); ++i)
    mass_u[i] = mu_u.atoms[i].second;
  for (size_t i = 0; i < mu_s.atoms.size(); ++i)
    mass_s[i] = mu_s.atoms[i].second;

  // Cell coordinates under the base's bracket chart: the unstable param of
  // [base, corner] and stable param of [corner, base], averaged over the
  // two corners of each grid edge.
  auto u_of = [&](TorusPoint w) {
    return project_param(useg, bracket(map, base, w, bo));
  };
  auto s_of = [&](TorusPoint w) {
    return project_param(sseg, bracket(map, w, base, bo));
  };
  std::vector<double> ub(static_cast<size_t>(R) + 1),
      sb(static_cast<size_t>(R) + 1);
  for (int a = 0; a <= R; ++a) {
    // average the unstable coordinate over the stable edge column
    double top = u_of(chart.corners[static_cast<size_t>(0) * (R + 1) + a]);
    double bot = u_of(chart.corners[static_cast<size_t>(R) * (R + 1) + a]);
    ub[static_cast<size_t>(a)] = 0.5 * (top + bot);
  }
  for (int b = 0; b <= R; ++b) {
    double left = s_of(chart.corners[static_cast<size_t>(b) * (R + 1) + 0]);
    double right = s_of(chart.corners[static_cast<size_t>(b) * (R + 1) + R]);
    sb[static_cast<size_t>(b)] = 0.5 * (left + right);
  }
  bool u_rev = ub.back() < ub.front();
  bool s_rev = sb.back() < sb.front();
  if (u_rev) std::reverse(ub.begin(), ub.end());
  if (s_rev) std::reverse(sb.begin(), sb.end());
  if (!std::is_sorted(ub.begin(), ub.end()) ||
      !std::is_sorted(sb.begin(), sb.end()))
    throw OutOfChart("chart coordinates lost monotonicity at this base");
  std::vector<double> U = rebin_cells(mu_u.boundaries, mass_u, ub);
  std::vector<double> S = rebin_cells(mu_s.boundaries, mass_s, sb);
  auto u_col = [&](int a) { return U[static_cast<size_t>(u_rev ? R - 1 - a : a)]; };
  auto s_row = [&](int b) { return S[static_cast<size_t>(s_rev ? R - 1 - b : b)]; };

  // Density factor at the fixed cell representatives.
  std::vector<double> out(static_cast<size_t>(R) * R, 0.0);
  double log_shift = -std::numeric_limits<double>::infinity();
  std::vector<double> log_density(out.size());
  for (size_t c = 0; c < out.size(); ++c) {
    TorusPoint w = chart.centers[c];
    OmegaValue wu = omega_u(certified, phi, base, w, tail_tol, 200, bo);
    OmegaValue ws = omega_s(certified, phi, base, w, tail_tol, 200, bo);
    log_density[c] = wu.value + ws.value + phi.eval(map, w);
    log_shift = std::max(log_shift, log_density[c]);
  }
  NeumaierAccumulator total;
  for (int b = 0; b < R; ++b)
    for (int a = 0; a < R; ++a) {
      size_t c = static_cast<size_t>(b) * R + a;
      double m = u_col(a) * s_row(b) * std::exp(log_density[c] - log_shift);
      out[c] = m;
      total.add(m);
    }
  if (total.value() <= 0.0)
    throw NonConvergence("product assembly produced zero mass");
  for (double& m : out) m /= total.value();
  return out;
}

// Reference side: ensemble measure restricted to the chart, assigned to the
// fixed cells by locating each ensemble point inside the corner quads via
// the defining center's coordinates.
inline std::vector<double> ensemble_chart_masses(
    const CertifiedMap& certified, const OrbitEnsemble& ensemble,
    const ProductChart& chart) {
  const TorusMap& map = certified.map();
  const int R = chart.resolution;
  BracketOptions bo;
  bo.chart_radius = std::max(bo.chart_radius, 3.0 * chart.half_extent);
  double seg_half = std::min(0.2, chart.half_extent * 1.3);
  LeafSegment useg =
      local_manifold(map, chart.center, LeafSide::unstable, seg_half);
  LeafSegment sseg =
      local_manifold(map, chart.center, LeafSide::stable, seg_half);
  // Anchor coordinate signs to the chart's corner layout: the last corner
  // of the middle row must carry positive u, the last row positive s.
  size_t mid = static_cast<size_t>(R / 2);
  double u_sign =
      project_param(useg, bracket(map, chart.center,
                                  chart.corners[mid * (R + 1) + R], bo)) > 0.0
          ? 1.0
          : -1.0;
  double s_sign =
      project_param(sseg, bracket(map, chart.corners[static_cast<size_t>(R) *
                                                         (R + 1) + mid],
                                  chart.center, bo)) > 0.0
          ? 1.0
          : -1.0;
  std::vector<double> out(static_cast<size_t>(R) * R, 0.0);
  double cell = 2.0 * chart.half_extent / R;
  double search_radius =
      chart.half_extent * 1.6;  // quick torus-distance pre-filter
  for (size_t i = 0; i < ensemble.points.size(); ++i) {
    TorusPoint p = ensemble.points[i];
    if (torus_distance(p, chart.center) > search_radius) continue;
    double u, s;
    try {
      u = u_sign * project_param(useg, bracket(map, chart.center, p, bo));
      s = s_sign * project_param(sseg, bracket(map, p, chart.center, bo));
    } catch (const OutOfChart&) {
      continue;
    } catch (const NoIntersection&) {
      continue;
    }
    if (std::fabs(u) >= chart.half_extent || std::fabs(s) >= chart.half_extent)
      continue;
    int a = std::min(R - 1, static_cast<int>((u + chart.half_extent) / cell));
    int b = std::min(R - 1, static_cast<int>((s + chart.half_extent) / cell));
    out[static_cast<size_t>(b) * R + a] += ensemble.weights[i];
  }
  double total = 0.0;
  for (double m : out) total += m;
  if (total <= 0.0) throw NonConvergence("no ensemble mass inside the chart");
  for (double& m : out) m /= total;
  return out;
}

struct ProductCheck {
  double tv = 0.0;              // product assembly vs reference on the chart
  double base_shift_tv = 0.0;   // |TV(base) - TV(shifted base)| witness
  int generation = 0;
  int resolution = 0;
};

// Full product-structure reconstruction check.  The chart cells are fixed
// in torus space by `center`; the assembly is run at the center and at a
// bracket-shifted second base, and both are compared against the same
// reference, so the shift isolates the base-point dependence of the
// product formula.
inline ProductCheck product_reconstruction(const CertifiedMap& certified,
                                           const Potential& phi,
                                           const OrbitEnsemble& ensemble,
                                           TorusPoint center, int resolution,
                                           int generation,
                                           double half_extent = 0.075) {
  ProductChart chart =
      build_product_chart(certified, center, half_extent, resolution);
  std::vector<double> reference =
      ensemble_chart_masses(certified, ensemble, chart);
  std::vector<double> at_center =
      product_masses(certified, phi, chart, center, generation);

  // Shifted base: the bracket of two off-center grid representatives.
  const int R = resolution;
  TorusPoint shifted =
      chart.centers[static_cast<size_t>(R / 2 + 1) * R + (R / 2 + 1)];
  std::vector<double> at_shifted =
      product_masses(certified, phi, chart, shifted, generation);

  ProductCheck out;
  out.generation = generation;
  out.resolution = resolution;
  out.tv = normalized_tv(at_center, reference);
  double tv_shifted = normalized_tv(at_shifted, reference);
  out.base_shift_tv = std::fabs(out.tv - tv_shifted);
  return out;
}

}  // namespace anosov
