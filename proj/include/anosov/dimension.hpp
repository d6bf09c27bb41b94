#pragma once
// Pointwise-dimension estimation for atomic orbit ensembles: ball-mass
// regression over a dyadic radius window against an immutable spatial
// index, a closed-form bi-Lipschitz pushforward battery, and a
// box-counting consistency proxy for chart squares.

#include <anosov/common.hpp>
#include <anosov/ensemble.hpp>
#include <anosov/int_matrix.hpp>
#include <anosov/parallel.hpp>
#include <anosov/rng.hpp>
#include <anosov/summation.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace anosov {

// ---------------------------------------------------------------------------
// Immutable uniform-grid index over weighted torus atoms.  Built once per
// ensemble; every query walks buckets in a fixed row-major order so that
// accumulation order (and therefore every summed bit) is identical no
// matter how queries are scheduled.
class SpatialIndex {
 public:
  SpatialIndex(std::vector<TorusPoint> points, std::vector<double> weights,
               int grid = 128)
      : grid_(grid), points_(std::move(points)), weights_(std::move(weights)) {
    if (grid_ < 4) throw DegenerateSamples("spatial index grid too coarse");
    if (points_.size() != weights_.size() || points_.empty())
      throw DegenerateSamples("spatial index needs matching nonempty data");
    buckets_.resize(static_cast<size_t>(grid_) * static_cast<size_t>(grid_));
    for (size_t i = 0; i < points_.size(); ++i)
      buckets_[bucket_of(points_[i])].push_back(static_cast<uint32_t>(i));
  }

  explicit SpatialIndex(const OrbitEnsemble& e, int grid = 128)
      : SpatialIndex(e.points, e.weights, grid) {}

  struct BallStats {
    double mass = 0.0;
    size_t atoms = 0;
  };

  // Closed flat-metric ball.  Monotone in r: a larger radius visits a
  // superset of atoms.
  BallStats ball_stats(TorusPoint x, double r) const {
    if (!(r > 0.0) || r > 0.5)
      throw OutOfChart("ball radius must lie in (0, 0.5]");
    const double cell = 1.0 / static_cast<double>(grid_);
    const int reach = static_cast<int>(std::ceil(r / cell)) + 1;
    const int cx = coord_of(x.x1), cy = coord_of(x.x2);
    NeumaierAccumulator acc;
    size_t atoms = 0;
    for (int dy = -reach; dy <= reach; ++dy) {
      for (int dx = -reach; dx <= reach; ++dx) {
        const auto& bucket =
            buckets_[bucket_index(wrap(cx + dx), wrap(cy + dy))];
        for (uint32_t idx : bucket) {
          if (torus_distance(points_[idx], x) <= r) {
            acc.add(weights_[idx]);
            ++atoms;
          }
        }
      }
    }
    return BallStats{acc.value(), atoms};
  }

  double ball_mass(TorusPoint x, double r) const {
    return ball_stats(x, r).mass;
  }

  // Distance from x to the nearest atom other than an exact duplicate of x.
  double nearest_neighbor_gap(TorusPoint x) const {
    const double cell = 1.0 / static_cast<double>(grid_);
    const int cx = coord_of(x.x1), cy = coord_of(x.x2);
    for (int reach = 1; reach <= grid_ / 2 + 1; ++reach) {
      double best = std::numeric_limits<double>::infinity();
      for (int dy = -reach; dy <= reach; ++dy) {
        for (int dx = -reach; dx <= reach; ++dx) {
          const auto& bucket =
              buckets_[bucket_index(wrap(cx + dx), wrap(cy + dy))];
          for (uint32_t idx : bucket) {
            double d = torus_distance(points_[idx], x);
            if (d > 0.0 && d < best) best = d;
          }
        }
      }
      // Accept only if the nearest hit cannot be beaten by an unvisited
      // bucket one ring further out.
      if (best <= (reach - 1) * cell) return best;
      if (reach == grid_ / 2 + 1 && std::isfinite(best)) return best;
    }
    throw DegenerateSamples("index holds no atom distinct from the query");
  }

  const std::vector<TorusPoint>& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }

 private:
  int coord_of(double t) const {
    double f = t - std::floor(t);
    int c = static_cast<int>(f * grid_);
    return c >= grid_ ? grid_ - 1 : c;
  }
  int wrap(int c) const {
    int m = c % grid_;
    return m < 0 ? m + grid_ : m;
  }
  size_t bucket_index(int cx, int cy) const {
    return static_cast<size_t>(cy) * static_cast<size_t>(grid_) +
           static_cast<size_t>(cx);
  }
  size_t bucket_of(TorusPoint p) const {
    return bucket_index(coord_of(p.x1), coord_of(p.x2));
  }

  int grid_;
  std::vector<TorusPoint> points_;
  std::vector<double> weights_;
  std::vector<std::vector<uint32_t>> buckets_;
};

// ---------------------------------------------------------------------------
// Ball-mass regression at one center.
struct DimensionEstimate {
  TorusPoint center;
  std::vector<double> radii;   // strictly decreasing
  std::vector<double> counts;  // ball mass at each radius
  double slope = 0.0;
  double slope_stderr = 0.0;
  double window_min = 0.0;  // resolution floor used for this estimate
  double window_max = 0.0;

  bool reliable() const { return slope_stderr <= 0.1; }
};

// Dyadic radii from r_max down to r_min inclusive-by-threshold.
inline std::vector<double> dyadic_radii(double r_max, double r_min) {
  if (!(r_max > r_min) || !(r_min > 0.0))
    throw OutOfChart("radius window must satisfy 0 < r_min < r_max");
  std::vector<double> out;
  for (double r = r_max; r >= r_min * (1.0 - 1e-12); r *= 0.5)
    out.push_back(r);
  return out;
}

namespace detail {

struct SlopeFit {
  double slope = 0.0;
  double stderr_ = 0.0;
};

// Least squares of y against x with the standard error of the slope.
inline SlopeFit fit_slope(const std::vector<double>& xs,
                          const std::vector<double>& ys) {
  const size_t n = xs.size();
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx == 0.0) throw DegenerateSamples("regression abscissae coincide");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  if (n > 2) {
    double ssr = 0;
    for (size_t i = 0; i < n; ++i) {
      double resid = ys[i] - my - fit.slope * (xs[i] - mx);
      ssr += resid * resid;
    }
    fit.stderr_ = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
  } else {
    fit.stderr_ = std::numeric_limits<double>::infinity();
  }
  return fit;
}

}  // namespace detail

// Pointwise dimension proxy: regression of log ball mass against log radius
// over the dyadic window.  Radii below the resolution floor (ten
// nearest-neighbor gaps) are dropped; radii whose ball captures fewer than
// ten atoms shrink the window from below, and if fewer than two usable
// radii remain the estimate is impossible.
inline DimensionEstimate pointwise_dimension(const SpatialIndex& index,
                                             TorusPoint x,
                                             std::vector<double> radii) {
  std::sort(radii.begin(), radii.end(), std::greater<double>());
  radii.erase(std::unique(radii.begin(), radii.end()), radii.end());
  if (radii.empty()) throw EmptyBall("no radii supplied");
  if (radii.front() > 0.25)
    throw OutOfChart("ball radii above 0.25 are not chart-local");

  const double floor_r = 10.0 * index.nearest_neighbor_gap(x);
  while (!radii.empty() && radii.back() < floor_r) radii.pop_back();

  std::vector<double> masses;
  masses.reserve(radii.size());
  size_t usable = 0;
  for (size_t i = 0; i < radii.size(); ++i) {
    SpatialIndex::BallStats st = index.ball_stats(x, radii[i]);
    if (st.atoms < 10) break;  // smaller radii only get emptier
    masses.push_back(st.mass);
    usable = i + 1;
  }
  radii.resize(usable);
  if (radii.size() < 2)
    throw EmptyBall("radius window collapsed below two usable scales");

  std::vector<double> lx(radii.size()), ly(radii.size());
  for (size_t i = 0; i < radii.size(); ++i) {
    lx[i] = std::log(radii[i]);
    ly[i] = std::log(masses[i]);
  }
  detail::SlopeFit fit = detail::fit_slope(lx, ly);

  DimensionEstimate est;
  est.center = x;
  est.radii = std::move(radii);
  est.counts = std::move(masses);
  est.slope = fit.slope;
  est.slope_stderr = fit.stderr_;
  est.window_min = est.radii.back();
  est.window_max = est.radii.front();
  return est;
}

inline DimensionEstimate pointwise_dimension(const OrbitEnsemble& e,
                                             TorusPoint x,
                                             const std::vector<double>& radii) {
  return pointwise_dimension(SpatialIndex(e), x, radii);
}

// ---------------------------------------------------------------------------
// Closed-form bi-Lipschitz test maps for the invariance battery.
struct BiLipschitzMap {
  std::string label;
  std::function<TorusPoint(TorusPoint)> apply;
};

inline BiLipschitzMap identity_bilipschitz() {
  return {"identity", [](TorusPoint p) { return p; }};
}

inline BiLipschitzMap automorphism_bilipschitz(const IntMatrix2& m) {
  return {"automorphism", [m](TorusPoint p) {
            Vec2 v = p.as_vec();
            return TorusPoint::from_vec(
                Vec2{static_cast<double>(m.a) * v.x +
                         static_cast<double>(m.b) * v.y,
                     static_cast<double>(m.c) * v.x +
                         static_cast<double>(m.d) * v.y});
          }};
}

// Shear adding amplitude*sin(2*pi*(k . x) + phase) to one coordinate,
// sourced only from the other coordinate so the map inverts exactly.
inline BiLipschitzMap shear_bilipschitz(double amplitude, int frequency,
                                        int target_coordinate,
                                        double phase = 0.0) {
  if (target_coordinate != 0 && target_coordinate != 1)
    throw OutOfChart("shear target coordinate must be 0 or 1");
  return {"shear", [=](TorusPoint p) {
            Vec2 v = p.as_vec();
            double source = target_coordinate == 0 ? v.y : v.x;
            double bump =
                amplitude * std::sin(kTwoPi * frequency * source + phase);
            if (target_coordinate == 0)
              v.x += bump;
            else
              v.y += bump;
            return TorusPoint::from_vec(v);
          }};
}

// Estimates the dimension at x under the ensemble and at g(x) under the
// pushforward ensemble, with the same radius ladder.
inline std::pair<DimensionEstimate, DimensionEstimate> bilipschitz_invariance(
    const OrbitEnsemble& e, const BiLipschitzMap& g, TorusPoint x,
    const std::vector<double>& radii) {
  SpatialIndex source(e);
  std::vector<TorusPoint> pushed(e.points.size());
  for (size_t i = 0; i < e.points.size(); ++i) pushed[i] = g.apply(e.points[i]);
  SpatialIndex image(std::move(pushed), e.weights);
  return {pointwise_dimension(source, x, radii),
          pointwise_dimension(image, g.apply(x), radii)};
}

// ---------------------------------------------------------------------------
// Median-of-centers aggregation: the headline estimate plus its spread.
struct MedianSlopeReport {
  std::vector<DimensionEstimate> estimates;
  double median_slope = 0.0;
  double min_slope = 0.0;
  double max_slope = 0.0;
};

// Draw distinct atom indices deterministically from the given seed.
inline std::vector<size_t> sample_atom_indices(size_t atom_count,
                                               size_t samples, uint64_t seed) {
  if (atom_count == 0) throw DegenerateSamples("ensemble has no atoms");
  samples = std::min(samples, atom_count);
  Rng rng(seed);
  std::vector<size_t> out;
  out.reserve(samples);
  while (out.size() < samples) {
    size_t idx = std::min(
        atom_count - 1,
        static_cast<size_t>(rng.uniform() * static_cast<double>(atom_count)));
    if (std::find(out.begin(), out.end(), idx) == out.end()) out.push_back(idx);
  }
  return out;
}

inline MedianSlopeReport median_pointwise_dimension(
    const SpatialIndex& index, const std::vector<size_t>& centers,
    const std::vector<double>& radii, int workers = 1) {
  if (centers.empty()) throw DegenerateSamples("no centers supplied");
  MedianSlopeReport rep;
  rep.estimates.resize(centers.size());
  parallel_chunks(centers.size(), 1, workers,
                  [&](size_t, size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i)
      rep.estimates[i] =
          pointwise_dimension(index, index.points()[centers[i]], radii);
  });
  std::vector<double> slopes;
  slopes.reserve(centers.size());
  for (const auto& est : rep.estimates) slopes.push_back(est.slope);
  std::sort(slopes.begin(), slopes.end());
  const size_t n = slopes.size();
  rep.median_slope =
      n % 2 == 1 ? slopes[n / 2] : 0.5 * (slopes[n / 2 - 1] + slopes[n / 2]);
  rep.min_slope = slopes.front();
  rep.max_slope = slopes.back();
  return rep;
}

// ---------------------------------------------------------------------------
// Box-counting consistency proxy on a chart square: the dyadic-box slope of
// the high-mass support skeleton (smallest box set covering 95% of the
// region's mass).
struct BoxRegion {
  TorusPoint lower;  // lower-left corner
  double size = 0.25;
};

struct BoxCountProfile {
  std::vector<double> box_sides;
  std::vector<double> box_counts;
  double slope = 0.0;
};

inline BoxCountProfile box_counting_profile(const SpatialIndex& index,
                                            const BoxRegion& region,
                                            int max_level = 7) {
  if (!(region.size > 0.0) || region.size > 1.0)
    throw OutOfChart("box region size must lie in (0, 1]");
  // Collect atoms inside the region with torus-aware offsets.
  std::vector<std::pair<Vec2, double>> local;
  const auto& pts = index.points();
  const auto& wts = index.weights();
  for (size_t i = 0; i < pts.size(); ++i) {
    Vec2 off{pts[i].x1 - region.lower.x1 - std::floor(pts[i].x1 -
                                                      region.lower.x1),
             pts[i].x2 - region.lower.x2 - std::floor(pts[i].x2 -
                                                      region.lower.x2)};
    if (off.x < region.size && off.y < region.size)
      local.emplace_back(off, wts[i]);
  }
  if (local.empty())
    throw EmptyBall("box region captures none of the ensemble");
  double region_mass = 0.0;
  for (const auto& a : local) region_mass += a.second;

  // Levels finer than the atom resolution only saturate and flatten the
  // slope: keep 4^level at or below a quarter of the captured atoms, but
  // never drop below two levels.
  int resolution_cap = 2;
  while (resolution_cap < max_level &&
         std::pow(4.0, resolution_cap + 1) * 4.0 <=
             static_cast<double>(local.size()))
    ++resolution_cap;
  max_level = std::min(max_level, resolution_cap);

  BoxCountProfile prof;
  for (int level = 1; level <= max_level; ++level) {
    const int boxes = 1 << level;
    const double side = region.size / static_cast<double>(boxes);
    std::vector<double> mass(static_cast<size_t>(boxes) *
                                 static_cast<size_t>(boxes),
                             0.0);
    for (const auto& a : local) {
      int bx = std::min(boxes - 1,
                        static_cast<int>(a.first.x / region.size * boxes));
      int by = std::min(boxes - 1,
                        static_cast<int>(a.first.y / region.size * boxes));
      mass[static_cast<size_t>(by) * boxes + static_cast<size_t>(bx)] +=
          a.second;
    }
    std::sort(mass.begin(), mass.end(), std::greater<double>());
    double want = 0.95 * region_mass;
    double acc = 0.0;
    size_t used = 0;
    while (used < mass.size() && acc < want && mass[used] > 0.0)
      acc += mass[used++];
    prof.box_sides.push_back(side);
    prof.box_counts.push_back(static_cast<double>(std::max<size_t>(used, 1)));
  }
  std::vector<double> lx, ly;
  for (size_t i = 0; i < prof.box_sides.size(); ++i) {
    lx.push_back(std::log(1.0 / prof.box_sides[i]));
    ly.push_back(std::log(prof.box_counts[i]));
  }
  prof.slope = detail::fit_slope(lx, ly).slope;
  return prof;
}

inline double hausdorff_consistency(const OrbitEnsemble& e,
                                    const BoxRegion& region,
                                    int max_level = 7) {
  return box_counting_profile(SpatialIndex(e), region, max_level).slope;
}

}  // namespace anosov
