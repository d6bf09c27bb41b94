// Final verification gate: one pass/fail line per criterion, exit nonzero if
// any hard criterion fails.  Exploratory checks downgrade to a warning line
// with diagnostics instead of failing the gate.
//
// Everything here runs from first principles against the checked-in canonical
// configurations; expected values are classical closed forms (spectral radii,
// golden-ratio eigendata, lattice point counts) or independently recomputed
// quantities, never values copied from the code under test.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdarg>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "anosov/anosov.hpp"

using namespace anosov;

namespace {

double now_s() {
  using clock = std::chrono::steady_clock;
  static auto t0 = clock::now();
  return std::chrono::duration<double>(clock::now() - t0).count();
}

int failures = 0;

void line(int id, bool pass, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

void warn(int id, const std::string& detail) {
  std::printf("criterion %2d: PASS (warning)  %s\n", id, detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

std::string root_dir() {
  if (const char* env = std::getenv("ARTIFACT_ROOT"); env && *env) return env;
  return ".";
}

const IntMatrix2 kA{2, 1, 1, 1};

PerturbationTerm canonical_perturbation() {
  PerturbationTerm t;
  t.amplitude = 0.05;
  t.direction = {0.0, 1.0};
  t.frequency = {1, 1};
  t.phase = 0.15;
  return t;
}

Potential canonical_fourier() {
  return Potential::fourier(
      {{0.3, {1, 0}, 0.0}, {0.15, {1, 1}, -kPi / 2}});
}

CertifiedMap certify_linear() {
  ConeOptions co;
  co.grid = 256;
  return CertifiedMap::certify(TorusMap(kA, {}), co);
}

CertifiedMap certify_perturbed() {
  ConeOptions co;
  co.grid = 256;
  return CertifiedMap::certify(TorusMap(kA, {canonical_perturbation()}), co);
}

}  // namespace

int main() {
  const std::string root = root_dir();
  CertifiedMap lin = certify_linear();
  CertifiedMap nl = certify_perturbed();
  Potential fphi = canonical_fourier();

  // 1 — pressure of the zero potential at period 12 vs log of the spectral
  // radius (3 + sqrt 5)/2, single-threaded, timed
  {
    double t0 = now_s();
    double p = pressure(lin, Potential::zero(), 12);
    double dt = now_s() - t0;
    double target = std::log((3.0 + std::sqrt(5.0)) / 2.0);
    bool pass = std::abs(p - target) < 1e-5 && dt < 10.0;
    line(1, pass,
         fmt("P_12(0) = %.10f vs log((3+sqrt5)/2) = %.10f, |diff| = %.3e, "
             "%.2fs",
             p, target, std::abs(p - target), dt));
  }

  // 2 — geometric potential of the linear map has zero pressure
  {
    double p = pressure(lin, Potential::phi_u(), 12);
    line(2, std::abs(p) < 1e-5, fmt("|P_12(phi_u)| = %.3e", std::abs(p)));
  }

  // 3 — adding a constant shifts every finite-period pressure by exactly
  // that constant
  {
    double worst = 0.0;
    for (int n = 1; n <= 12; ++n) {
      double base = build_ensemble(lin, fphi, n).pressure_n;
      for (double c : {-1.0, 0.5, kPi / 10.0}) {
        std::vector<CosineTerm> terms = fphi.terms();
        terms.push_back({c, {0, 0}, 0.0});
        double shifted = build_ensemble(lin, Potential::fourier(terms), n)
                             .pressure_n;
        worst = std::max(worst, std::abs(shifted - base - c));
      }
    }
    line(3, worst <= 1e-12,
         fmt("max |P_n(phi+c) - P_n(phi) - c| = %.3e over n <= 12, three "
             "shifts",
             worst));
  }

  // 4 — linear maximal-entropy report against golden-mean closed forms
  {
    ExponentReport r = exponent_report(lin, Potential::zero(), 12, 10);
    double e1 = std::abs(r.lambda_u - 0.96242);
    double e2 = std::abs(r.lambda_s - (-0.96242));
    double e3 = std::abs(r.entropy - 0.96242);
    double e4 = std::abs(r.delta_u - 1.0);
    double e5 = std::abs(r.delta_s - 1.0);
    double e6 = std::abs(r.dim_total - 2.0);
    bool pass = e1 < 1e-5 && e2 < 1e-5 && e3 < 1e-5 && e4 < 1e-4 &&
                e5 < 1e-4 && e6 < 2e-4;
    line(4, pass,
         fmt("(%.6f, %.6f, %.6f, %.6f, %.6f, %.6f)", r.lambda_u, r.lambda_s,
             r.entropy, r.delta_u, r.delta_s, r.dim_total));
  }

  // 5 — centralizer generator search at entry bound 5: the golden-mean
  // matrix, squaring exactly to the input
  {
    double t0 = now_s();
    CentralizerData cz = centralizer_generator(kA, 5);
    double dt = now_s() - t0;
    IntMatrix2 expect{1, 1, 1, 0};
    bool square = cz.M * cz.M == kA;
    bool pass = cz.M == expect && cz.k == 2 && square && dt < 1.0;
    line(5, pass,
         fmt("generator [[%lld,%lld],[%lld,%lld]], power %d, M^2==A %s, "
             "%.3fs",
             static_cast<long long>(cz.M.a), static_cast<long long>(cz.M.b),
             static_cast<long long>(cz.M.c), static_cast<long long>(cz.M.d),
             cz.k, square ? "exact" : "NO", dt));
  }

  // 6 — conjugacy residual at grid 1024 below 1e-8, and the conjugacy maps
  // period-6 points of the perturbed map onto the rational period-6 points
  // of the linear model
  {
    ConjugacyOptions co;
    co.grid_n = 1024;
    co.tol = 1e-8;
    Conjugacy h(nl, co);
    OrbitEnsemble e6 = build_ensemble(nl, Potential::zero(), 6);
    IntMatrix2 d = kA.pow(6) - IntMatrix2::identity();
    double worst = 0.0;
    for (const TorusPoint& p : e6.points) {
      TorusPoint q = h.apply_series(p);
      Vec2 r = d.as_real().apply(q.as_vec());
      RationalVec2 k = RationalVec2::make(
          static_cast<std::int64_t>(std::llround(r.x)),
          static_cast<std::int64_t>(std::llround(r.y)), 1);
      Vec2 exact = rational_solve(d, k).to_vec2();
      worst = std::max(
          worst, torus_distance(q, TorusPoint(exact.x, exact.y)));
    }
    bool pass = h.residual() < 1e-8 && e6.points.size() == 320 &&
                worst < 1e-7;
    line(6, pass,
         fmt("residual = %.3e, %zu period-6 points, max pushforward "
             "deviation = %.3e",
             h.residual(), e6.points.size(), worst));
  }

  // 7 — exponent asymmetry of the perturbed maximal-entropy state: the sum
  // of the exponents should exceed ten times its refinement error
  // (exploratory: an unresolved sum downgrades to a warning), and the value
  // must match the checked-in golden report
  {
    ExponentReport r = exponent_report(nl, Potential::zero(), 14, 12);
    double sum = r.lambda_u + r.lambda_s;
    double err = r.err_lambda_u + r.err_lambda_s;
    bool resolved = std::abs(sum) > 10.0 * err;
    std::string golden_path =
        root + "/tests/golden/eps05_zero_report.json";
    bool golden_ok = false;
    double golden_sum = 0.0;
    if (std::filesystem::exists(golden_path)) {
      json g = read_json(golden_path);
      golden_sum =
          g.at("sections").at("exponents").at("exponent_sum").get<double>();
      golden_ok = std::abs(golden_sum - sum) <=
                  1e-9 * std::max(std::abs(sum), 1.0);
    }
    std::string detail =
        fmt("lambda_u + lambda_s = %.6e, refinement error = %.3e, ratio = "
            "%.1f, golden %.6e %s",
            sum, err, err > 0 ? std::abs(sum) / err : 0.0, golden_sum,
            golden_ok ? "matches" : "MISSING/MISMATCH");
    if (!golden_ok)
      line(7, false, detail);
    else if (resolved)
      line(7, true, detail);
    else
      warn(7, detail + " (asymmetry unresolved at this period: diagnostic "
                        "only, not a hard failure)");
  }

  // 8 — ball-counting dimension of the perturbed fourier equilibrium:
  // 20-center median within 0.1 of the exponent-based dimension, two-minute
  // budget
  {
    double t0 = now_s();
    OrbitEnsemble e = build_ensemble(nl, fphi, 14);
    SpatialIndex idx(e);
    std::vector<std::size_t> centers =
        sample_atom_indices(e.points.size(), 20, 20250816);
    std::vector<double> ladder = dyadic_radii(0.1, 1e-4);
    MedianSlopeReport med = median_pointwise_dimension(idx, centers, ladder);
    ExponentReport r = exponent_report(nl, fphi, 14, 12);
    double gap = std::abs(med.median_slope - r.dim_total);
    double dt = now_s() - t0;
    line(8, gap < 0.1 && dt < 120.0,
         fmt("median slope %.4f vs delta_u + delta_s = %.4f, gap %.4f, "
             "%.1fs",
             med.median_slope, r.dim_total, gap, dt));
  }

  // 9 — dynamical-Jacobian consistency of leafwise measures at generations
  // 10 and 12, for the linear/zero and perturbed/fourier runs, plus
  // base-point independence of the product reconstruction
  {
    TorusPoint base{0.30, 0.70};
    auto tv_pair = [&](const CertifiedMap& cm, const Potential& phi) {
      double p = pressure(cm, phi, 12);
      LeafSegment seg =
          local_manifold(cm.map(), base, LeafSide::unstable, 0.05);
      LeafMeasure m10 = leaf_measure(cm, phi, seg, 10);
      LeafMeasure m12 = leaf_measure(cm, phi, seg, 12);
      return std::pair<double, double>{
          check_dynamical_jacobian(cm, phi, m10, p).tv,
          check_dynamical_jacobian(cm, phi, m12, p).tv};
    };
    auto [lin10, lin12] = tv_pair(lin, Potential::zero());
    auto [nl10, nl12] = tv_pair(nl, fphi);
    // at the linear map the discrepancy sits at the arithmetic noise floor,
    // where a strict decrease is not meaningful; below 1e-6 both
    // generations count as converged
    bool lin_ok = lin10 < 0.05 && (lin12 < lin10 ||
                                   (lin10 < 1e-6 && lin12 < 1e-6));
    bool nl_ok = nl10 < 0.05 && nl12 < nl10;
    OrbitEnsemble elin = build_ensemble(lin, Potential::zero(), 14);
    OrbitEnsemble enl = build_ensemble(nl, fphi, 14);
    double shift_lin =
        product_reconstruction(lin, Potential::zero(), elin, base, 32, 10)
            .base_shift_tv;
    double shift_nl =
        product_reconstruction(nl, fphi, enl, base, 32, 10).base_shift_tv;
    bool shift_ok = shift_lin < 1e-3 && shift_nl < 1e-3;
    line(9, lin_ok && nl_ok && shift_ok,
         fmt("linear TV %.2e -> %.2e, perturbed TV %.2e -> %.2e, base "
             "shifts %.2e / %.2e",
             lin10, lin12, nl10, nl12, shift_lin, shift_nl));
  }

  // 10 — transverse cocycle: identically zero for constants, and additive
  // under splitting the target across an intermediate base, 100 sampled
  // triples
  {
    Rng rng(20250816);
    double worst_const = 0.0;
    for (int i = 0; i < 20; ++i) {
      TorusPoint x(rng.uniform(), rng.uniform());
      TorusPoint y(x.x1 + rng.uniform(-0.03, 0.03),
                   x.x2 + rng.uniform(-0.03, 0.03));
      Potential cst = Potential::constant(0.7);
      worst_const = std::max(worst_const,
                             std::abs(omega_u(nl, cst, x, y).value));
      worst_const = std::max(worst_const,
                             std::abs(omega_s(nl, cst, x, y).value));
    }
    double worst_triple = 0.0;
    int used = 0;
    while (used < 100) {
      TorusPoint x(rng.uniform(), rng.uniform());
      try {
        LeafSegment sseg = local_manifold(nl.map(), x, LeafSide::stable, 0.05);
        TorusPoint xp =
            segment_point(nl.map(), sseg, rng.uniform(0.01, 0.035));
        TorusPoint y(x.x1 + rng.uniform(-0.03, 0.03),
                     x.x2 + rng.uniform(-0.03, 0.03));
        TorusPoint xy = bracket(nl.map(), xp, y);
        double lhs = omega_u(nl, fphi, x, y).value;
        double rhs = omega_u(nl, fphi, x, xy).value +
                     omega_u(nl, fphi, xp, y).value;
        worst_triple = std::max(worst_triple, std::abs(lhs - rhs));
        ++used;
      } catch (const Error&) {
        continue;  // resample geometrically awkward draws
      }
    }
    line(10, worst_const < 1e-14 && worst_triple < 1e-8,
         fmt("constants: max |omega| = %.2e; cocycle identity residual over "
             "%d triples: %.3e",
             worst_const, used, worst_triple));
  }

  // 11 — entropy ladder: exact |m|-scaling and quantization on the power
  // range, plus an independent cross-check realizing the square of the map
  // on its own periodic ensemble
  {
    ExponentReport rl = exponent_report(lin, Potential::zero(), 12, 10);
    ExponentReport rn = exponent_report(nl, fphi, 12, 10);
    bool exact = true;
    for (const ExponentReport* r : {&rl, &rn}) {
      double unit = entropy_unit(*r);
      EntropySpectrum sp = entropy_spectrum(*r, -5, 5);
      if (sp.gap != unit || sp.entries.size() != 11) exact = false;
      for (const SpectrumEntry& e : sp.entries)
        if (e.entropy != std::abs(e.power) * unit) exact = false;
      for (int m = -5; m <= 5; ++m) {
        if (element_entropy(*r, m) != std::abs(m) * unit) exact = false;
        for (int n2 = -5; n2 <= 5; ++n2)
          if (element_entropy(*r, m + n2) !=
              std::abs(m + n2) * unit)
            exact = false;
      }
      if (element_exponent(*r, 2) + element_exponent(*r, 3) !=
          element_exponent(*r, 5))
        exact = false;
    }
    double h_lin_base = ensemble_entropy(build_ensemble(lin, Potential::zero(), 12));
    double h_lin_pow =
        power_entropy_from_ensemble(lin, Potential::zero(), 2, 6);
    double diff_lin = std::abs(h_lin_pow - 2.0 * h_lin_base);
    double h_nl_base = ensemble_entropy(build_ensemble(nl, fphi, 12));
    double h_nl_pow = power_entropy_from_ensemble(nl, fphi, 2, 6);
    double diff_nl = std::abs(h_nl_pow - 2.0 * h_nl_base);
    // combined error budget: refinement error of the base entropy doubled,
    // plus slack for the last-bit arithmetic of the power route
    double budget_lin = 2.0 * rl.err_entropy + 1e-12;
    double budget_nl = 2.0 * rn.err_entropy + 1e-12;
    line(11,
         exact && diff_lin <= budget_lin && diff_nl <= budget_nl,
         fmt("ladder exact on [-5,5]; square-map check: linear |diff| = "
             "%.2e (budget %.2e), perturbed |diff| = %.2e (budget %.2e)",
             diff_lin, budget_lin, diff_nl, budget_nl));
  }

  // 12 — affine straightening: machine-precision recovery of exact affine
  // inputs, and the conjugated perturbed map straightens to the linear
  // model within ten times the conjugacy residual
  {
    auto sample_map = [](auto&& g, int grid) {
      std::vector<std::pair<TorusPoint, TorusPoint>> out;
      out.reserve(static_cast<std::size_t>(grid) * grid);
      for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j) {
          TorusPoint x((i + 0.5) / grid, (j + 0.5) / grid);
          out.emplace_back(x, g(x));
        }
      return out;
    };
    Vec2 tv{0.15, 0.6};
    AffineFit fa = affine_straightening(sample_map(
        [&](TorusPoint x) {
          Vec2 y = kA.as_real().apply(x.as_vec());
          return TorusPoint(y.x + tv.x, y.y + tv.y);
        },
        48));
    bool exact_ok = fa.integer_linear && fa.B_int == kA &&
                    fa.residual < 1e-10 &&
                    std::abs(fa.v.x - tv.x) < 1e-12 &&
                    std::abs(fa.v.y - tv.y) < 1e-12;
    ConjugacyOptions co;
    co.grid_n = 1024;
    Conjugacy h(nl, co);
    AffineFit fs = affine_straightening(sample_map(
        [&](TorusPoint x) {
          return h.apply_series(nl.map().apply(h.apply_inverse_series(x)));
        },
        48));
    bool straight_ok = fs.integer_linear && fs.B_int == kA &&
                       fs.residual < 10.0 * h.residual();
    line(12, exact_ok && straight_ok,
         fmt("exact input residual %.2e, recovered translation (%.6f, "
             "%.6f); straightened residual %.3e vs 10x conjugacy %.3e",
             fa.residual, fa.v.x, fa.v.y, fs.residual, 10.0 * h.residual()));
  }

  // 13 — bi-Lipschitz invariance of the pointwise slopes: identity, the
  // golden-mean automorphism, and a smooth shear, on the flat control
  // ensemble and on a singular equilibrium, judged by 20-center medians
  {
    OrbitEnsemble haar = build_ensemble(lin, Potential::zero(), 14);
    OrbitEnsemble sing = build_ensemble(lin, fphi, 14);
    std::vector<double> ladder = dyadic_radii(0.1, 1e-4);
    std::vector<BiLipschitzMap> battery = {
        identity_bilipschitz(),
        automorphism_bilipschitz(IntMatrix2{1, 1, 1, 0}),
        shear_bilipschitz(0.1, 1, 1)};
    const char* names[] = {"identity", "automorphism", "shear"};
    double worst = 0.0;
    std::string detail;
    for (const OrbitEnsemble* e : {&haar, &sing}) {
      SpatialIndex src(*e);
      std::vector<std::size_t> centers =
          sample_atom_indices(e->points.size(), 20, 20250816);
      for (std::size_t b = 0; b < battery.size(); ++b) {
        const BiLipschitzMap& g = battery[b];
        std::vector<TorusPoint> pushed(e->points.size());
        for (std::size_t i = 0; i < pushed.size(); ++i)
          pushed[i] = g.apply(e->points[i]);
        SpatialIndex dst(std::move(pushed), e->weights);
        std::vector<double> diffs;
        for (std::size_t ci : centers) {
          TorusPoint c = e->points[ci];
          double a = pointwise_dimension(src, c, ladder).slope;
          double bb = pointwise_dimension(dst, g.apply(c), ladder).slope;
          diffs.push_back(bb - a);
        }
        std::sort(diffs.begin(), diffs.end());
        double med = diffs[diffs.size() / 2];
        worst = std::max(worst, std::abs(med));
        detail += fmt("%s%s %.4f", detail.empty() ? "" : ", ",
                      names[b], med);
      }
    }
    line(13, worst < 0.15, "median slope shifts: " + detail);
  }

  // 14 — reproducibility: every canonical aggregate report serializes to
  // identical bytes (timestamp aside) under 1, 4, and 8 workers
  {
    std::vector<std::string> configs = {"lin_zero",  "lin_phiu",
                                        "lin_fourier", "eps05_zero",
                                        "eps05_phiu",  "eps05_fourier"};
    bool all_equal = true;
    std::string detail;
    for (const std::string& name : configs) {
      RunConfig cfg = load_config(root + "/configs/" + name + ".json");
      std::vector<std::string> dumps;
      for (int w : {1, 4, 8}) {
        RunConfig c = cfg;
        c.workers = w;
        ReportSession session(c);
        dumps.push_back(stable_dump(aggregate_report(session)));
      }
      bool eq = dumps[0] == dumps[1] && dumps[1] == dumps[2];
      all_equal = all_equal && eq;
      detail += fmt("%s%s %s", detail.empty() ? "" : ", ", name.c_str(),
                    eq ? "ok" : "DIFFERS");
    }
    line(14, all_equal, detail);
  }

  std::printf("%s\n", failures == 0 ? "ACCEPTANCE: all criteria passed"
                                    : "ACCEPTANCE: FAILURES PRESENT");
  return failures == 0 ? 0 : 1;
}
