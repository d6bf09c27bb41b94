#pragma once
// Equilibrium states as weighted periodic-orbit ensembles.
//
// Fix(a^n) is enumerated exactly through the linear model (Smith form of
// A^n - I), transported to the nonlinear map by Newton multiple shooting, and
// weighted by w_p ~ exp(S_n phi(p)).  Orbit sums S_n phi are evaluated once
// per orbit — each point of an orbit carries the identical weight, which makes
// the ensemble measure invariant under the map by construction, not just up
// to roundoff.  The same per-orbit pass yields the splitting log-Jacobians
// from the cycle monodromy, so Lyapunov integrals cost no extra dynamics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "anosov/common.hpp"
#include "anosov/cones.hpp"
#include "anosov/conjugacy.hpp"
#include "anosov/map.hpp"
#include "anosov/periodic.hpp"
#include "anosov/potential.hpp"
#include "anosov/splitting.hpp"
#include "anosov/summation.hpp"

namespace anosov {

struct EnsembleOptions {
  RefineOptions refine;              // Newton shooting controls
  double collision_tol = 1e-9;       // distinct points must stay this far apart
  std::int64_t point_cap = 2'000'000;
  // optional conjugacy used to re-seed orbits whose Newton run from the
  // linear seed fails; built on demand (grid 512) when absent and needed
  std::shared_ptr<const Conjugacy> conjugacy;
};

struct OrbitEnsemble {
  int period = 0;
  std::vector<TorusPoint> points;    // grouped by orbit, dynamical order
  std::vector<double> weights;       // w_p, sum = 1
  std::vector<double> log_ju;        // log |Da e_u| at each point
  std::vector<double> log_js;        // log |Da e_s| at each point (negative)
  std::vector<std::size_t> orbit_start;  // orbit k = [start[k], start[k+1])
  std::vector<double> orbit_phi_sum;     // S_d phi over one orbit cycle
  double pressure_n = 0.0;           // (1/n) log sum_p exp(S_n phi(p))
  Potential potential = Potential::zero();

  std::size_t orbit_count() const { return orbit_phi_sum.size(); }
  std::size_t orbit_length(std::size_t k) const {
    return orbit_start[k + 1] - orbit_start[k];
  }
};

namespace detail {

// any two ensemble points closer than tol mean the shooting collapsed two
// distinct solutions onto one; detected with a wrap-aware spatial hash
inline void check_pairwise_distinct(const std::vector<TorusPoint>& pts,
                                    double tol) {
  const int K = 512;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> cells;
  cells.reserve(pts.size());
  auto cell_of = [&](TorusPoint p) {
    int ci = static_cast<int>(p.x1 * K) % K;
    int cj = static_cast<int>(p.x2 * K) % K;
    return static_cast<std::uint32_t>(ci * K + cj);
  };
  for (std::uint32_t i = 0; i < pts.size(); ++i)
    cells.emplace_back(cell_of(pts[i]), i);
  std::sort(cells.begin(), cells.end());
  auto scan = [&](std::uint32_t key, std::uint32_t self_idx, TorusPoint p) {
    auto it = std::lower_bound(
        cells.begin(), cells.end(), std::make_pair(key, std::uint32_t{0}));
    for (; it != cells.end() && it->first == key; ++it) {
      if (it->second <= self_idx) continue;  // each pair once
      if (torus_distance(p, pts[it->second]) < tol)
        throw Collision("periodic points " + std::to_string(self_idx) + " and " +
                        std::to_string(it->second) + " coincide within " +
                        std::to_string(tol));
    }
  };
  for (std::uint32_t i = 0; i < pts.size(); ++i) {
    int ci = static_cast<int>(pts[i].x1 * K) % K;
    int cj = static_cast<int>(pts[i].x2 * K) % K;
    for (int di = -1; di <= 1; ++di)
      for (int dj = -1; dj <= 1; ++dj) {
        int ni = (ci + di + K) % K, nj = (cj + dj + K) % K;
        scan(static_cast<std::uint32_t>(ni * K + nj), i, pts[i]);
      }
  }
}

}  // namespace detail

// Build the weighted Fix(a^n) ensemble for a potential.
inline OrbitEnsemble build_ensemble(const CertifiedMap& certified,
                                    const Potential& phi, int n,
                                    EnsembleOptions opts = {}) {
  const TorusMap& map = certified.map();
  if (n < 1) throw ValidationError("ensemble period must be >= 1");

  LinearPeriodicSet lp =
      periodic_points_linear(map.linear_part(), n, opts.point_cap);
  OrbitDecomposition dec = decompose_orbits(map.linear_part(), lp);

  OrbitEnsemble e;
  e.period = n;
  e.potential = phi;
  e.points.reserve(lp.points.size());
  e.orbit_start.reserve(dec.orbits.size() + 1);

  // ---- locate the points of Fix(a^n) -------------------------------------
  std::shared_ptr<const Conjugacy> conj = opts.conjugacy;
  auto reseed_conjugacy = [&]() {
    if (!conj) {
      ConjugacyOptions co;
      co.grid_n = 512;
      conj = std::make_shared<Conjugacy>(certified, co);
    }
  };

  auto locate_all = [&](bool via_conjugacy) {
    e.points.clear();
    e.orbit_start.clear();
    for (const auto& orbit : dec.orbits) {
      e.orbit_start.push_back(e.points.size());
      if (map.is_linear()) {
        for (std::size_t idx : orbit)
          e.points.push_back(lp.points[idx].to_point());
        continue;
      }
      std::vector<TorusPoint> seed;
      seed.reserve(orbit.size());
      for (std::size_t idx : orbit) seed.push_back(lp.points[idx].to_point());
      if (via_conjugacy)
        for (auto& p : seed) p = conj->apply_inverse_grid(p);
      try {
        RefinedOrbit ro = refine_orbit(map, seed, opts.refine);
        for (auto& p : ro.points) e.points.push_back(p);
      } catch (const NonConvergence&) {
        if (via_conjugacy) throw;  // already on the robust path
        // harder orbit: re-seed this one from the conjugacy image
        reseed_conjugacy();
        for (std::size_t i = 0; i < seed.size(); ++i)
          seed[i] = conj->apply_inverse_grid(lp.points[orbit[i]].to_point());
        RefinedOrbit ro = refine_orbit(map, seed, opts.refine);
        for (auto& p : ro.points) e.points.push_back(p);
      }
    }
    e.orbit_start.push_back(e.points.size());
    if (e.points.size() != lp.points.size())
      throw ValidationError("ensemble lost periodic points during refinement");
    if (!map.is_linear())
      detail::check_pairwise_distinct(e.points, opts.collision_tol);
  };
  try {
    locate_all(false);
  } catch (const Collision&) {
    // a Newton run from a linear seed crossed basins; conjugacy seeds are
    // basin-correct, so redo the whole construction from them
    reseed_conjugacy();
    locate_all(true);
  }

  // ---- splitting data along every cycle -----------------------------------
  e.log_ju.resize(e.points.size());
  e.log_js.resize(e.points.size());
  if (map.is_linear()) {
    const double lu = std::log(map.eigen().lambda_u);
    const double ls = std::log(std::abs(map.eigen().lambda_s));
    std::fill(e.log_ju.begin(), e.log_ju.end(), lu);
    std::fill(e.log_js.begin(), e.log_js.end(), ls);
  } else {
    std::vector<TorusPoint> cycle;
    for (std::size_t k = 0; k + 1 < e.orbit_start.size(); ++k) {
      cycle.assign(e.points.begin() + e.orbit_start[k],
                   e.points.begin() + e.orbit_start[k + 1]);
      CycleSplitting cs = cycle_splitting(map, cycle);
      for (std::size_t i = 0; i < cycle.size(); ++i) {
        e.log_ju[e.orbit_start[k] + i] = cs.log_ju[i];
        e.log_js[e.orbit_start[k] + i] = cs.log_js[i];
      }
    }
  }

  // ---- orbit sums of the potential ----------------------------------------
  const std::size_t n_orbits = e.orbit_start.size() - 1;
  e.orbit_phi_sum.resize(n_orbits);
  for (std::size_t k = 0; k < n_orbits; ++k) {
    const std::size_t b = e.orbit_start[k], len = e.orbit_length(k);
    double s = 0.0;
    switch (phi.kind()) {
      case PotentialKind::zero:
        s = 0.0;
        break;
      case PotentialKind::constant:
        s = phi.constant_value() * static_cast<double>(len);
        break;
      case PotentialKind::phi_u: {
        NeumaierAccumulator acc;
        for (std::size_t i = 0; i < len; ++i) acc.add(-e.log_ju[b + i]);
        s = acc.value();
        break;
      }
      case PotentialKind::phi_s: {
        // phi_s(x) = -log |Da^-1 e_s| at x = log |Da e_s| at a^-1(x); summed
        // over a full cycle the shift drops out
        NeumaierAccumulator acc;
        for (std::size_t i = 0; i < len; ++i) acc.add(e.log_js[b + i]);
        s = acc.value();
        break;
      }
      default: {
        NeumaierAccumulator acc;
        for (std::size_t i = 0; i < len; ++i)
          acc.add(phi.eval(map, e.points[b + i]));
        s = acc.value();
        break;
      }
    }
    e.orbit_phi_sum[k] = s;
  }

  // ---- weights and pressure (shifted log-sum-exp, deterministic order) ----
  const std::size_t N = e.points.size();
  std::vector<double> log_w(N);
  for (std::size_t k = 0; k < n_orbits; ++k) {
    const double d = static_cast<double>(e.orbit_length(k));
    const double full = (static_cast<double>(n) / d) * e.orbit_phi_sum[k];
    for (std::size_t i = e.orbit_start[k]; i < e.orbit_start[k + 1]; ++i)
      log_w[i] = full;
  }
  double shift = -1e300;
  for (double v : log_w) shift = std::max(shift, v);
  double z = deterministic_sum(N, [&](std::size_t i) {
    return std::exp(log_w[i] - shift);
  });
  e.pressure_n = (shift + std::log(z)) / static_cast<double>(n);
  e.weights.resize(N);
  for (std::size_t i = 0; i < N; ++i)
    e.weights[i] = std::exp(log_w[i] - shift) / z;
  return e;
}

// P_n(phi) alone, via the same construction
inline double pressure(const CertifiedMap& certified, const Potential& phi,
                       int n, EnsembleOptions opts = {}) {
  return build_ensemble(certified, phi, n, std::move(opts)).pressure_n;
}

// sum_p w_p f(p) in fixed point order
template <typename F>
double integrate(const OrbitEnsemble& e, F&& f) {
  return deterministic_sum(e.points.size(), [&](std::size_t i) {
    return e.weights[i] * f(e.points[i]);
  });
}

// integral of the ensemble's own potential, using the per-orbit sums so the
// value matches the weights' construction exactly: an orbit of length d
// contributes w * S_d phi, with w the per-point weight shared by its points
inline double potential_integral(const OrbitEnsemble& e) {
  return deterministic_sum(e.orbit_count(), [&](std::size_t k) {
    return e.weights[e.orbit_start[k]] * e.orbit_phi_sum[k];
  });
}

// h = P_n(phi) - integral phi d mu_n  (variational identity at equilibrium)
inline double ensemble_entropy(const OrbitEnsemble& e) {
  return e.pressure_n - potential_integral(e);
}

struct ExponentReport {
  double lambda_u = 0.0, lambda_s = 0.0;
  double entropy = 0.0;
  double delta_u = 0.0, delta_s = 0.0;
  double dim_total = 0.0;
  double pressure = 0.0;
  int period_used = 0;
  bool entropy_clamped = false;   // negative estimate clamped to zero
  // refinement-pair differences, one per headline field
  double err_lambda_u = 0.0, err_lambda_s = 0.0, err_entropy = 0.0;
  double err_delta_u = 0.0, err_delta_s = 0.0, err_dim_total = 0.0;
};

namespace detail {

struct ExponentCore {
  double lambda_u, lambda_s, entropy, delta_u, delta_s, dim_total, pressure;
  bool clamped;
};

inline ExponentCore exponent_core(const OrbitEnsemble& e) {
  ExponentCore c{};
  c.lambda_u = deterministic_sum(e.points.size(), [&](std::size_t i) {
    return e.weights[i] * e.log_ju[i];
  });
  c.lambda_s = deterministic_sum(e.points.size(), [&](std::size_t i) {
    return e.weights[i] * e.log_js[i];
  });
  c.pressure = e.pressure_n;
  double h = ensemble_entropy(e);
  c.clamped = h < 0.0;
  c.entropy = std::max(h, 0.0);
  if (c.lambda_u < 1e-6)
    throw DegenerateExponent("unstable exponent " + std::to_string(c.lambda_u) +
                             " is not positive");
  if (c.lambda_s > -1e-6)
    throw DegenerateExponent("stable exponent " + std::to_string(c.lambda_s) +
                             " is not negative");
  c.delta_u = c.entropy / c.lambda_u;
  c.delta_s = c.entropy / std::abs(c.lambda_s);
  c.dim_total = c.delta_u + c.delta_s;
  return c;
}

}  // namespace detail

// Lyapunov exponents, entropy, and partial dimensions with error estimates
// from a coarser-period rerun (the refinement pair).
inline ExponentReport exponent_report(const CertifiedMap& certified,
                                      const Potential& phi, int n,
                                      int n_coarse = 0,
                                      EnsembleOptions opts = {}) {
  if (n_coarse <= 0) n_coarse = std::max(2, n - 2);
  if (n_coarse >= n) throw ValidationError("refinement period must be below n");
  OrbitEnsemble fine = build_ensemble(certified, phi, n, opts);
  OrbitEnsemble coarse = build_ensemble(certified, phi, n_coarse, opts);
  detail::ExponentCore f = detail::exponent_core(fine);
  detail::ExponentCore c = detail::exponent_core(coarse);
  ExponentReport r;
  r.lambda_u = f.lambda_u;
  r.lambda_s = f.lambda_s;
  r.entropy = f.entropy;
  r.delta_u = f.delta_u;
  r.delta_s = f.delta_s;
  r.dim_total = f.dim_total;
  r.pressure = f.pressure;
  r.period_used = n;
  r.entropy_clamped = f.clamped;
  r.err_lambda_u = std::abs(f.lambda_u - c.lambda_u);
  r.err_lambda_s = std::abs(f.lambda_s - c.lambda_s);
  r.err_entropy = std::abs(f.entropy - c.entropy);
  r.err_delta_u = std::abs(f.delta_u - c.delta_u);
  r.err_delta_s = std::abs(f.delta_s - c.delta_s);
  r.err_dim_total = std::abs(f.dim_total - c.dim_total);
  return r;
}

// Entropy of the measure of maximal entropy of the m-th power map, from the
// exact fixed-point count of the linear model: all point counts are integers,
// so the quantization identities hold to the last bit.
inline double mme_entropy_of_power(const IntMatrix2& A, int m, int period) {
  if (m == 0) throw ValidationError("power must be nonzero");
  if (period < 1) throw ValidationError("period must be >= 1");
  IntMatrix2 B = m > 0 ? A : A.unimodular_inverse();
  int am = m > 0 ? m : -m;
  IntMatrix2 P = B.pow(am * period) - IntMatrix2::identity();
  std::int64_t cnt = P.det();
  if (cnt < 0) cnt = -cnt;
  if (cnt == 0) throw ValidationError("power map is not hyperbolic");
  return std::log(static_cast<double>(cnt)) / static_cast<double>(period);
}

}  // namespace anosov
