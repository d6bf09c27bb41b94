#pragma once
// Topological conjugacy to the linear part.
//
// h = id + u solves  h(a(x)) = A h(x)  with u periodic.  Splitting u and the
// forcing p(x) = a(x) - A x into eigencomponents of A decouples the equation
// into two contracting fixed-point problems,
//    u+(x) = [ u+(a(x)) + p+(x) ] / lambda_u            (forward view)
//    u-(y) = lambda_s u-(a^-1 y) - p-(a^-1 y)           (backward view)
// solved three ways, all consistent:
//   * a grid Jacobi solver (fast interpolated evaluation, exports, bulk work),
//   * truncated orbit series (full double accuracy at single points),
//   * closed geometric sums along periodic cycles (exact truncation-free
//     values on refined periodic orbits).
// The displacement is Hoelder but generally not C^1, so the grid values carry
// an interpolation error far above the scheme's own fixed-point residual;
// both numbers are reported and kept distinct.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "anosov/common.hpp"
#include "anosov/cones.hpp"
#include "anosov/map.hpp"
#include "anosov/parallel.hpp"
#include "anosov/rng.hpp"

namespace anosov {

struct ConjugacyOptions {
  int grid_n = 1024;       // grid resolution per axis
  double tol = 1e-8;       // target sup fixed-point residual of the scheme
  int max_iter = 200;      // Jacobi sweeps
  int workers = 1;
  int series_max_terms = 64;
  double series_tail_tol = 1e-17;  // stop once the geometric tail is this small
  std::uint64_t probe_seed = 0x5eedc0de;  // off-grid error / regularity probes
};

class Conjugacy {
 public:
  Conjugacy(const CertifiedMap& certified, ConjugacyOptions opts = {})
      : map_(certified.map()), opts_(opts) {
    if (opts_.grid_n < 8) throw ValidationError("conjugacy grid must be >= 8");
    solve_grid();
  }

  const TorusMap& map() const { return map_; }
  int grid_n() const { return opts_.grid_n; }
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

  // ---- grid-backed evaluation (bilinear periodic interpolation) ----------

  Vec2 displacement_grid(TorusPoint x) const {
    return {interp(up_, x), interp(um_, x)};
  }

  TorusPoint apply_grid(TorusPoint x) const {
    Vec2 u = displacement_grid(x);
    Vec2 w = map_.eigen().combine(u.x, u.y);
    return TorusPoint(x.x1 + w.x, x.x2 + w.y);
  }

  // damped defect iteration for h(x) = z; the naive update x <- z - u(x) can
  // limit-cycle because the displacement is not a contraction, so steps are
  // accepted only when the defect |h(x) - z| decreases
  TorusPoint apply_inverse_grid(TorusPoint z, double tol = 1e-12,
                                int max_iter = 120) const {
    return invert_displacement(
        z, [this](TorusPoint x) { return displacement_grid(x); }, tol, max_iter,
        /*throw_on_stall=*/false);
  }

  // ---- orbit-series evaluation (no grid error) ----------------------------

  // eigencomponents (u+, u-) of the displacement at x
  Vec2 displacement_series(TorusPoint x) const {
    const Eigenbasis& eb = map_.eigen();
    const double inv_lu = 1.0 / eb.lambda_u;
    double up = 0.0;
    {
      double w = inv_lu;
      TorusPoint p = x;
      for (int k = 0; k < opts_.series_max_terms; ++k) {
        up += w * eb.split_u(map_.perturbation(p.as_vec()));
        w *= inv_lu;
        if (std::abs(w) < opts_.series_tail_tol) break;
        p = map_.apply(p);
      }
    }
    double um = 0.0;
    {
      double w = 1.0;
      TorusPoint p = x;
      for (int k = 0; k < opts_.series_max_terms; ++k) {
        p = map_.apply_inverse(p);
        um -= w * eb.split_s(map_.perturbation(p.as_vec()));
        w *= eb.lambda_s;
        if (std::abs(w) < opts_.series_tail_tol) break;
      }
    }
    return {up, um};
  }

  TorusPoint apply_series(TorusPoint x) const {
    Vec2 u = displacement_series(x);
    Vec2 w = map_.eigen().combine(u.x, u.y);
    return TorusPoint(x.x1 + w.x, x.x2 + w.y);
  }

  TorusPoint apply_inverse_series(TorusPoint z, double tol = 1e-12,
                                  int max_iter = 200) const {
    return invert_displacement(
        z, [this](TorusPoint x) { return displacement_series(x); }, tol,
        max_iter, /*throw_on_stall=*/true, apply_inverse_grid(z),
        /*have_seed=*/true);
  }

  // ---- diagnostics ---------------------------------------------------------

  // sup and rms gap between grid interpolation and series values at sample
  // points; this is the true evaluation error of the grid representation
  struct OffGridError {
    double sup = 0.0;
    double rms = 0.0;
    int samples = 0;
  };
  OffGridError offgrid_error(int samples = 400) const {
    Rng rng(opts_.probe_seed);
    OffGridError e;
    e.samples = samples;
    double acc = 0.0;
    for (int i = 0; i < samples; ++i) {
      TorusPoint x(rng.uniform(), rng.uniform());
      Vec2 a = displacement_grid(x);
      Vec2 b = displacement_series(x);
      double d = std::max(std::abs(a.x - b.x), std::abs(a.y - b.y));
      e.sup = std::max(e.sup, d);
      acc += d * d;
    }
    e.rms = std::sqrt(acc / samples);
    return e;
  }

  // slope of log sup-increment against log scale; 1.0 for smooth (or zero)
  // displacement, < 1 signals genuinely Hoelder behaviour
  struct RegularityEstimate {
    double exponent = 1.0;
    bool degenerate = false;  // displacement below noise, exponent meaningless
  };
  RegularityEstimate regularity(int per_scale = 96) const {
    double sup_u = 0.0;
    for (double v : up_) sup_u = std::max(sup_u, std::abs(v));
    for (double v : um_) sup_u = std::max(sup_u, std::abs(v));
    if (sup_u < 1e-13) return {1.0, true};
    Rng rng(splitmix64(opts_.probe_seed ^ 0x9e3779b97f4a7c15ull));
    std::vector<double> xs, ys;
    for (int j = 3; j <= 10; ++j) {
      double delta = std::pow(2.0, -j);
      double sup = 0.0;
      for (int i = 0; i < per_scale; ++i) {
        TorusPoint x(rng.uniform(), rng.uniform());
        double ang = rng.uniform(0.0, kTwoPi);
        TorusPoint y(x.x1 + delta * std::cos(ang), x.x2 + delta * std::sin(ang));
        Vec2 a = displacement_series(x);
        Vec2 b = displacement_series(y);
        sup = std::max(sup, std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)));
      }
      if (sup > 0.0) {
        xs.push_back(std::log(delta));
        ys.push_back(std::log(sup));
      }
    }
    if (xs.size() < 3) return {1.0, true};
    double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sx += xs[i]; sy += ys[i]; sxx += xs[i] * xs[i]; sxy += xs[i] * ys[i];
    }
    double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return {std::min(slope, 1.0), false};
  }

  // ---- export --------------------------------------------------------------

  // layout: magic "ANCJ", u64 grid_n, f64 residual, then the two displacement
  // component grids row-major (x2 fastest), little-endian f64
  void save_grid(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open " + path + " for writing");
    f.write("ANCJ", 4);
    std::uint64_t n = static_cast<std::uint64_t>(opts_.grid_n);
    f.write(reinterpret_cast<const char*>(&n), 8);
    f.write(reinterpret_cast<const char*>(&residual_), 8);
    f.write(reinterpret_cast<const char*>(up_.data()),
            static_cast<std::streamsize>(up_.size() * 8));
    f.write(reinterpret_cast<const char*>(um_.data()),
            static_cast<std::streamsize>(um_.size() * 8));
    if (!f) throw ValidationError("short write to " + path);
  }

  const std::vector<double>& component_plus() const { return up_; }
  const std::vector<double>& component_minus() const { return um_; }

 private:
  // Monotone damped solve of x + combine(u(x)) = z.  Steps along the defect
  // with backtracking; only defect-decreasing moves are kept, which breaks the
  // limit cycles the plain fixed-point update falls into near the rougher
  // parts of the displacement.
  template <typename EvalU>
  TorusPoint invert_displacement(TorusPoint z, EvalU&& eval, double tol,
                                 int max_iter, bool throw_on_stall,
                                 TorusPoint seed = TorusPoint(),
                                 bool have_seed = false) const {
    const Eigenbasis& eb = map_.eigen();
    TorusPoint x = have_seed ? seed : z;
    auto defect = [&](TorusPoint p) {
      Vec2 u = eval(p);
      Vec2 w = eb.combine(u.x, u.y);
      // h(p) - z as the nearest torus displacement
      return reduce_to_half(Vec2{p.x1 + w.x - z.x1, p.x2 + w.y - z.x2});
    };
    Vec2 F = defect(x);
    double fn = F.norm();
    double beta = 1.0;
    for (int it = 0; it < max_iter && fn >= tol; ++it) {
      TorusPoint cand(x.x1 - beta * F.x, x.x2 - beta * F.y);
      Vec2 Fc = defect(cand);
      double fc = Fc.norm();
      if (fc < fn) {
        x = cand;
        F = Fc;
        fn = fc;
        beta = std::min(1.0, beta * 1.4);
      } else {
        beta *= 0.5;
        if (beta < 1e-6) break;  // stuck: accept the best point found
      }
    }
    if (fn >= tol && throw_on_stall && fn > 1e-8)
      throw NonConvergence("conjugacy inversion stalled at defect " +
                           std::to_string(fn));
    return x;
  }

  void solve_grid() {
    const int n = opts_.grid_n;
    const std::size_t nn = static_cast<std::size_t>(n) * n;
    const Eigenbasis& eb = map_.eigen();
    up_.assign(nn, 0.0);
    um_.assign(nn, 0.0);

    if (map_.is_linear()) {  // displacement vanishes identically
      residual_ = 0.0;
      iterations_ = 0;
      return;
    }

    // caches: forward image, p+ at x, and (backward image, p- at backward image)
    std::vector<TorusPoint> fwd(nn), bwd(nn);
    std::vector<double> pp(nn), pm_at_bwd(nn);
    parallel_chunks(nn, 4096, opts_.workers, [&](std::size_t, std::size_t b, std::size_t e) {
      for (std::size_t idx = b; idx < e; ++idx) {
        int i = static_cast<int>(idx / n), j = static_cast<int>(idx % n);
        TorusPoint x(static_cast<double>(i) / n, static_cast<double>(j) / n);
        fwd[idx] = map_.apply(x);
        pp[idx] = eb.split_u(map_.perturbation(x.as_vec()));
        TorusPoint y = map_.apply_inverse(x);
        bwd[idx] = y;
        pm_at_bwd[idx] = eb.split_s(map_.perturbation(y.as_vec()));
      }
    });

    std::vector<double> nup(nn), num(nn);
    const double inv_lu = 1.0 / eb.lambda_u;
    const double ls = eb.lambda_s;
    double change = 1e300;
    int it = 0;
    for (; it < opts_.max_iter; ++it) {
      std::vector<double> chunk_change;
      std::size_t chunks = (nn + 65535) / 65536;
      chunk_change.assign(chunks, 0.0);
      parallel_chunks(nn, 65536, opts_.workers, [&](std::size_t ci, std::size_t b, std::size_t e) {
        double worst = 0.0;
        for (std::size_t idx = b; idx < e; ++idx) {
          double vu = (interp(up_, fwd[idx]) + pp[idx]) * inv_lu;
          double vm = ls * interp(um_, bwd[idx]) - pm_at_bwd[idx];
          worst = std::max(worst, std::abs(vu - up_[idx]));
          worst = std::max(worst, std::abs(vm - um_[idx]));
          nup[idx] = vu;
          num[idx] = vm;
        }
        chunk_change[ci] = std::max(chunk_change[ci], worst);
      });
      change = 0.0;
      for (double c : chunk_change) change = std::max(change, c);
      up_.swap(nup);
      um_.swap(num);
      if (change < 0.1 * opts_.tol) break;
    }
    iterations_ = it + 1;

    // measured fixed-point residual of the discrete scheme
    std::size_t chunks = (nn + 65535) / 65536;
    std::vector<double> chunk_res(chunks, 0.0);
    parallel_chunks(nn, 65536, opts_.workers, [&](std::size_t ci, std::size_t b, std::size_t e) {
      double worst = 0.0;
      for (std::size_t idx = b; idx < e; ++idx) {
        double vu = (interp(up_, fwd[idx]) + pp[idx]) * inv_lu;
        double vm = ls * interp(um_, bwd[idx]) - pm_at_bwd[idx];
        worst = std::max(worst, std::abs(vu - up_[idx]));
        worst = std::max(worst, std::abs(vm - um_[idx]));
      }
      chunk_res[ci] = worst;
    });
    residual_ = 0.0;
    for (double c : chunk_res) residual_ = std::max(residual_, c);
    if (residual_ > opts_.tol)
      throw NonConvergence("conjugacy solver residual " + std::to_string(residual_) +
                           " above tolerance after " + std::to_string(iterations_) +
                           " sweeps");
  }

  double interp(const std::vector<double>& g, TorusPoint t) const {
    const int n = opts_.grid_n;
    double gx = t.x1 * n, gy = t.x2 * n;
    int i0 = static_cast<int>(gx), j0 = static_cast<int>(gy);
    if (i0 >= n) i0 = n - 1;  // guards t.x1 == 1.0 - eps rounding up
    if (j0 >= n) j0 = n - 1;
    double fx = gx - i0, fy = gy - j0;
    int i1 = (i0 + 1) % n, j1 = (j0 + 1) % n;
    const double* row0 = g.data() + static_cast<std::size_t>(i0) * n;
    const double* row1 = g.data() + static_cast<std::size_t>(i1) * n;
    return (1 - fx) * ((1 - fy) * row0[j0] + fy * row0[j1]) +
           fx * ((1 - fy) * row1[j0] + fy * row1[j1]);
  }

  TorusMap map_;  // by value: the solver must not dangle if the source dies
  ConjugacyOptions opts_;
  std::vector<double> up_, um_;  // eigencomponents of u on the grid, row-major
  double residual_ = 0.0;
  int iterations_ = 0;
};

// Exact displacement values along a refined periodic cycle: with p periodic
// along the orbit both series collapse to closed geometric sums, so the
// values carry no truncation error at all.
inline std::vector<Vec2> displacement_on_cycle(const TorusMap& map,
                                               const std::vector<TorusPoint>& cycle) {
  const std::size_t d = cycle.size();
  if (d == 0) return {};
  const Eigenbasis& eb = map.eigen();
  std::vector<double> pu(d), pm(d);
  for (std::size_t i = 0; i < d; ++i) {
    Vec2 p = map.perturbation(cycle[i].as_vec());
    pu[i] = eb.split_u(p);
    pm[i] = eb.split_s(p);
  }
  const double inv_lu = 1.0 / eb.lambda_u;
  const double ls = eb.lambda_s;
  const double geo_u = 1.0 / (1.0 - std::pow(inv_lu, static_cast<double>(d)));
  const double geo_s = 1.0 / (1.0 - std::pow(ls, static_cast<double>(d)));
  std::vector<Vec2> out(d);
  for (std::size_t i = 0; i < d; ++i) {
    double su = 0.0, w = inv_lu;
    for (std::size_t r = 0; r < d; ++r) {
      su += w * pu[(i + r) % d];
      w *= inv_lu;
    }
    double sm = 0.0, v = 1.0;
    for (std::size_t r = 0; r < d; ++r) {
      sm -= v * pm[(i + d - 1 - r) % d];
      v *= ls;
    }
    out[i] = Vec2{su * geo_u, sm * geo_s};
  }
  return out;
}

// image of a cycle point under h, from the exact cycle displacement
inline TorusPoint conjugacy_image_on_cycle(const TorusMap& map, TorusPoint x,
                                           Vec2 u_components) {
  Vec2 w = map.eigen().combine(u_components.x, u_components.y);
  return TorusPoint(x.x1 + w.x, x.x2 + w.y);
}

// ---------------------------------------------------------------------------
// regularity probe

struct HolderEstimate {
  double exponent = 1.0;
  bool degenerate = false;          // displacement below noise at every scale
  std::vector<double> separations;  // dyadic pair distances probed
  std::vector<double> mean_log;     // mean log |u(p) - u(q)| per separation
};

// Empirical regularity of the displacement u = h - id: geometric-mean growth
// of |u(p) - u(q)| against the pair separation over dyadic scales, fitted by
// least squares.  A displacement that never rises above floating-point noise
// (the linear map) reports exponent 1.0 with the degenerate flag set.
inline HolderEstimate holder_estimate(const Conjugacy& c, int scale_lo = 3,
                                      int scale_hi = 10, int pairs = 64,
                                      std::uint64_t seed = 0x5eedc0de) {
  if (scale_lo >= scale_hi)
    throw ValidationError("regularity probe needs scale_lo < scale_hi");
  if (pairs < 4) throw ValidationError("regularity probe needs >= 4 pairs");
  HolderEstimate est;
  Rng rng(seed);
  for (int s = scale_lo; s <= scale_hi; ++s) {
    const double d = std::ldexp(1.0, -s);
    double acc = 0.0;
    int used = 0;
    for (int i = 0; i < pairs; ++i) {
      TorusPoint p(rng.uniform(), rng.uniform());
      double ang = rng.uniform(0.0, kTwoPi);
      TorusPoint q(p.x1 + d * std::cos(ang), p.x2 + d * std::sin(ang));
      Vec2 up = nearest_displacement(p, c.apply_series(p));
      Vec2 uq = nearest_displacement(q, c.apply_series(q));
      double m = (up - uq).norm();
      if (m > 1e-14) {
        acc += std::log(m);
        ++used;
      }
    }
    if (used >= pairs / 2) {
      est.separations.push_back(d);
      est.mean_log.push_back(acc / used);
    }
  }
  if (est.separations.size() < 2) {
    est.degenerate = true;
    est.exponent = 1.0;
    return est;
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(est.separations.size());
  for (std::size_t i = 0; i < est.separations.size(); ++i) {
    double x = std::log(est.separations[i]);
    sx += x;
    sy += est.mean_log[i];
    sxx += x * x;
    sxy += x * est.mean_log[i];
  }
  est.exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return est;
}

}  // namespace anosov
