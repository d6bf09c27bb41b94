#pragma once
// JSON report builders shared by the command-line tool and the test suite.
//
// Every builder is a deterministic function of the run configuration: all
// reductions inside the library run in fixed block order, so a report built
// with any worker count serializes to identical bytes once the timestamp
// field is removed (see stable_dump in io.hpp).  The CLI emits these
// documents verbatim; tests rebuild them in-process and compare.

#include <cstdio>
#include <ctime>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "anosov/config.hpp"
#include "anosov/conjugacy.hpp"
#include "anosov/dimension.hpp"
#include "anosov/ensemble.hpp"
#include "anosov/io.hpp"
#include "anosov/leaf.hpp"
#include "anosov/leaf_measure.hpp"
#include "anosov/rigidity.hpp"

namespace anosov {

inline std::string iso8601_utc_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Shared lazy cache for the expensive intermediates (certificate, conjugacy,
// periodic ensembles), so an aggregate run certifies once and reuses the
// ensemble across sections exactly as the individual subcommands would.
class ReportSession {
 public:
  explicit ReportSession(RunConfig cfg) : cfg_(std::move(cfg)) {}

  const RunConfig& cfg() const { return cfg_; }

  const CertifiedMap& certified() {
    if (!certified_) certified_.emplace(cfg_.certify());
    return *certified_;
  }

  const Potential& potential() {
    if (!phi_) phi_.emplace(cfg_.build_potential());
    return *phi_;
  }

  const Conjugacy& conjugacy() {
    if (!conj_) {
      ConjugacyOptions co;
      co.grid_n = cfg_.grid_n;
      co.tol = cfg_.tol_conjugacy;
      co.workers = cfg_.workers;
      conj_.emplace(certified(), co);
    }
    return *conj_;
  }

  // equilibrium ensemble for the configured potential at the given period
  const OrbitEnsemble& ensemble(int period) {
    auto it = ensembles_.find(period);
    if (it == ensembles_.end())
      it = ensembles_
               .emplace(period, build_ensemble(certified(), potential(), period))
               .first;
    return it->second;
  }

  // zero-potential control ensemble (measure of maximal entropy)
  const OrbitEnsemble& control_ensemble(int period) {
    auto it = controls_.find(period);
    if (it == controls_.end())
      it = controls_
               .emplace(period,
                        build_ensemble(certified(), Potential::zero(), period))
               .first;
    return it->second;
  }

  const ExponentReport& exponents() {
    if (!expo_)
      expo_.emplace(exponent_report(certified(), potential(), cfg_.period_fine,
                                    cfg_.period_coarse));
    return *expo_;
  }

 private:
  RunConfig cfg_;
  std::optional<CertifiedMap> certified_;
  std::optional<Potential> phi_;
  std::optional<Conjugacy> conj_;
  std::map<int, OrbitEnsemble> ensembles_;
  std::map<int, OrbitEnsemble> controls_;
  std::optional<ExponentReport> expo_;
};

namespace detail {

inline json matrix_json(const IntMatrix2& m) {
  return json::array({json::array({m.a, m.b}), json::array({m.c, m.d})});
}

// The worker count is deliberately absent: a report is a function of the
// configuration alone, and runs with different parallelism must serialize
// to identical bytes (the timestamp is the one field excluded from
// comparisons).
inline json envelope(const RunConfig& cfg, const std::string& subcommand) {
  json j;
  j["timestamp"] = iso8601_utc_now();
  j["subcommand"] = subcommand;
  j["config"] = config_echo(cfg);
  return j;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// verify: hyperbolicity certificate

inline json verify_report(ReportSession& s) {
  json j = detail::envelope(s.cfg(), "verify");
  const ConeReport& r = s.certified().report();
  const Eigenbasis& eb = s.certified().map().eigen();
  json res;
  res["certified"] = r.certified;
  res["grid"] = r.grid;
  res["safety"] = r.safety;
  res["cone_halfwidth_unstable"] = r.halfwidth_u;
  res["cone_halfwidth_stable"] = r.halfwidth_s;
  res["min_expansion_unstable"] = r.min_expansion_u;
  res["min_expansion_stable"] = r.min_expansion_s;
  res["containment_margin_unstable"] = r.containment_margin_u;
  res["containment_margin_stable"] = r.containment_margin_s;
  res["slack_forward"] = r.slack_forward;
  res["slack_inverse"] = r.slack_inverse;
  res["projective_contraction_unstable"] = r.projective_contraction_u;
  res["projective_contraction_stable"] = r.projective_contraction_s;
  res["linear_log_expansion"] = std::log(eb.lambda_u);
  res["linear_log_contraction"] = std::log(std::abs(eb.lambda_s));
  res["detail"] = r.detail;
  j["results"] = std::move(res);
  return j;
}

// ---------------------------------------------------------------------------
// conjugacy: straightening map to the linear model + regularity probe

inline json conjugacy_report(ReportSession& s) {
  json j = detail::envelope(s.cfg(), "conjugacy");
  const Conjugacy& c = s.conjugacy();
  HolderEstimate he = holder_estimate(c);
  json res;
  res["grid_n"] = c.grid_n();
  res["tolerance"] = s.cfg().tol_conjugacy;
  res["iterations"] = c.iterations();
  res["residual"] = c.residual();
  res["holder_exponent"] = he.exponent;
  res["holder_degenerate"] = he.degenerate;
  res["holder_scales_used"] = static_cast<int>(he.separations.size());
  j["results"] = std::move(res);
  return j;
}

// ---------------------------------------------------------------------------
// equilibrium: periodic-orbit realization of the equilibrium state

inline json equilibrium_report(ReportSession& s) {
  json j = detail::envelope(s.cfg(), "equilibrium");
  const RunConfig& cfg = s.cfg();
  const OrbitEnsemble& e = s.ensemble(cfg.period);
  const TorusMap& map = s.certified().map();
  const Potential& phi = s.potential();
  double phi_mean =
      integrate(e, [&](TorusPoint p) { return phi.eval(map, p); });
  json res;
  res["period"] = e.period;
  res["point_count"] = e.points.size();
  res["orbit_count"] = e.orbit_count();
  res["pressure"] = e.pressure_n;
  res["entropy"] = ensemble_entropy(e);
  res["potential_integral"] = phi_mean;
  res["entropy_plus_integral"] = ensemble_entropy(e) + phi_mean;
  j["results"] = std::move(res);
  return j;
}

// ---------------------------------------------------------------------------
// exponents: Lyapunov spectrum, entropy, partial dimensions

inline json exponents_report(ReportSession& s) {
  json j = detail::envelope(s.cfg(), "exponents");
  const ExponentReport& r = s.exponents();
  json res;
  res["period"] = r.period_used;
  res["lambda_unstable"] = r.lambda_u;
  res["lambda_stable"] = r.lambda_s;
  res["entropy"] = r.entropy;
  res["entropy_clamped"] = r.entropy_clamped;
  res["delta_unstable"] = r.delta_u;
  res["delta_stable"] = r.delta_s;
  res["dimension_total"] = r.dim_total;
  res["pressure"] = r.pressure;
  json err;
  err["lambda_unstable"] = r.err_lambda_u;
  err["lambda_stable"] = r.err_lambda_s;
  err["entropy"] = r.err_entropy;
  err["delta_unstable"] = r.err_delta_u;
  err["delta_stable"] = r.err_delta_s;
  err["dimension_total"] = r.err_dim_total;
  res["refinement_error"] = std::move(err);
  double sum = r.lambda_u + r.lambda_s;
  double sum_err = r.err_lambda_u + r.err_lambda_s;
  res["exponent_sum"] = sum;
  res["exponent_sum_error"] = sum_err;
  res["asymmetry_resolved"] = std::abs(sum) > 10.0 * sum_err;
  j["results"] = std::move(res);
  return j;
}

// ---------------------------------------------------------------------------
// dimension: pointwise dimension of the equilibrium state

inline json dimension_report(ReportSession& s) {
  json j = detail::envelope(s.cfg(), "dimension");
  const RunConfig& cfg = s.cfg();
  const OrbitEnsemble& e = s.ensemble(cfg.period_fine);
  SpatialIndex index(e);
  std::vector<std::size_t> centers = sample_atom_indices(
      e.points.size(), static_cast<std::size_t>(cfg.dim_centers), cfg.seed);
  std::vector<double> radii = dyadic_radii(cfg.dim_r_max, 1e-4);
  MedianSlopeReport rep =
      median_pointwise_dimension(index, centers, radii, cfg.workers);
  const ExponentReport& ex = s.exponents();
  json res;
  res["period"] = e.period;
  res["atom_count"] = e.points.size();
  res["center_count"] = centers.size();
  res["r_max"] = cfg.dim_r_max;
  res["median_slope"] = rep.median_slope;
  res["min_slope"] = rep.min_slope;
  res["max_slope"] = rep.max_slope;
  res["dimension_reference"] = ex.dim_total;
  res["median_gap"] = std::abs(rep.median_slope - ex.dim_total);
  json arr = json::array();
  for (const DimensionEstimate& d : rep.estimates) {
    json c;
    c["x1"] = d.center.x1;
    c["x2"] = d.center.x2;
    c["slope"] = d.slope;
    c["slope_stderr"] = d.slope_stderr;
    c["window_min"] = d.window_min;
    c["window_max"] = d.window_max;
    c["reliable"] = d.reliable();
    c["radii"] = d.radii;
    c["masses"] = d.counts;
    arr.push_back(std::move(c));
  }
  res["centers"] = std::move(arr);
  j["results"] = std::move(res);
  return j;
}

// ---------------------------------------------------------------------------
// leaf: conditional measures, their Jacobians, and product structure

inline json leaf_report(ReportSession& s) {
  json j = detail::envelope(s.cfg(), "leaf");
  const RunConfig& cfg = s.cfg();
  const CertifiedMap& cm = s.certified();
  const TorusMap& map = cm.map();
  const Potential& phi = s.potential();
  const TorusPoint base{0.30, 0.70};

  double pressure_ref = s.ensemble(cfg.period_fine).pressure_n;
  LeafSegment useg = local_manifold(map, base, LeafSide::unstable, 0.05);

  json res;
  res["base_point"] = json::array({base.x1, base.x2});
  res["pressure_reference"] = pressure_ref;

  json dyn = json::array();
  for (int g : {cfg.generation_coarse, cfg.generation_fine}) {
    LeafMeasure lm = leaf_measure(cm, phi, useg, g);
    JacobianCheck jc = check_dynamical_jacobian(cm, phi, lm, pressure_ref);
    json one;
    one["generation"] = jc.generation;
    one["total_variation"] = jc.tv;
    dyn.push_back(std::move(one));
  }
  res["dynamical_jacobian"] = std::move(dyn);

  LeafSegment sseg = local_manifold(map, base, LeafSide::stable, 0.06);
  TorusPoint base_s = segment_point(map, sseg, 0.035);
  HolonomyCheck hc =
      check_holonomy_jacobian(cm, phi, base, base_s, 0.05, cfg.generation_coarse);
  json hol;
  hol["generation"] = hc.generation;
  hol["total_variation"] = hc.tv;
  hol["max_tail_bound"] = hc.max_tail_bound;
  res["holonomy_jacobian"] = std::move(hol);

  ProductCheck pc = product_reconstruction(cm, phi, s.ensemble(cfg.period_fine),
                                           base, 32, cfg.generation_coarse,
                                           cfg.chart_half_extent);
  json prod;
  prod["resolution"] = pc.resolution;
  prod["generation"] = pc.generation;
  prod["total_variation"] = pc.tv;
  prod["base_shift_tv"] = pc.base_shift_tv;
  res["product_reconstruction"] = std::move(prod);

  j["results"] = std::move(res);
  return j;
}

// ---------------------------------------------------------------------------
// rigidity: commuting symmetries, translation detection, straightening

inline json rigidity_report(ReportSession& s) {
  json j = detail::envelope(s.cfg(), "rigidity");
  const RunConfig& cfg = s.cfg();
  json res;

  CentralizerData cz = centralizer_generator(cfg.matrix, cfg.rig_entry_bound);
  json czj;
  czj["generator"] = detail::matrix_json(cz.M);
  czj["power"] = cz.k;
  czj["sign"] = cz.sign;
  czj["spectral_radius"] = cz.radius;
  res["centralizer"] = std::move(czj);

  json qc;
  qc["identity"] = quotient_contraction(IntMatrix2{1, 0, 0, 1}, cfg.matrix);
  qc["matrix"] = quotient_contraction(cfg.matrix, cfg.matrix);
  qc["generator"] = quotient_contraction(cz.M, cfg.matrix);
  res["quotient_contraction"] = std::move(qc);

  // translation detection in linear coordinates: compare the configured
  // equilibrium measure's mode statistics against a zero-potential control
  const Conjugacy& h = s.conjugacy();
  ModeTable table = fourier_mode_table(s.ensemble(cfg.period), h,
                                       cfg.rig_mode_cap, cfg.workers);
  ModeTable control = fourier_mode_table(s.control_ensemble(cfg.period), h,
                                         cfg.rig_mode_cap, cfg.workers);
  double floor_ctl = std::max(control.noise_floor(), 1e-12);
  std::vector<RationalVec2> H =
      translation_candidates(table, cfg.rig_denominator_cap, 5.0 * floor_ctl);
  json tr;
  tr["mode_cap"] = cfg.rig_mode_cap;
  tr["denominator_cap"] = cfg.rig_denominator_cap;
  tr["control_noise_floor"] = control.noise_floor();
  tr["threshold"] = 5.0 * floor_ctl;
  tr["statistic_zero"] = table.statistic(RationalVec2::zero());
  tr["statistic_half"] = table.statistic(RationalVec2::make(1, 0, 2));
  json cand = json::array();
  for (const RationalVec2& v : H) cand.push_back(v.to_string());
  tr["candidates"] = std::move(cand);
  res["translations"] = std::move(tr);

  CommutantReport cr = commutant_candidates(cfg.matrix, cz, H);
  json cj;
  cj["symbol_count"] = cr.symbols.size();
  cj["coset_count"] = cr.coset_count;
  cj["closure_verified"] = cr.closure_verified;
  cj["identity_present"] = cr.identity_present;
  cj["inverses_present"] = cr.inverses_present;
  cj["power_cap"] = cr.power_cap;
  res["commutant"] = std::move(cj);

  // straightened dynamics: h . a . h^{-1} sampled on a coarse grid should be
  // affine with linear part the configured matrix and zero translation
  const TorusMap& map = s.certified().map();
  std::vector<std::pair<TorusPoint, TorusPoint>> samples;
  const int grid = 48;
  samples.reserve(static_cast<std::size_t>(grid) * grid);
  for (int i = 0; i < grid; ++i)
    for (int ji = 0; ji < grid; ++ji) {
      TorusPoint x((i + 0.5) / grid, (ji + 0.5) / grid);
      samples.emplace_back(
          x, h.apply_series(map.apply(h.apply_inverse_series(x))));
    }
  AffineFit fit = affine_straightening(samples);
  json sj;
  sj["sample_grid"] = grid;
  sj["pair_count"] = fit.pair_count;
  sj["residual"] = fit.residual;
  sj["integer_linear"] = fit.integer_linear;
  if (fit.integer_linear) sj["linear_part"] = detail::matrix_json(fit.B_int);
  sj["translation"] = json::array({fit.v.x, fit.v.y});
  sj["matches_configured_matrix"] =
      fit.integer_linear && fit.B_int == cfg.matrix;
  res["straightening"] = std::move(sj);

  j["results"] = std::move(res);
  return j;
}

// ---------------------------------------------------------------------------
// spectrum: entropy ladder over the power range, with a cross-pipeline check

inline json spectrum_report(ReportSession& s) {
  json j = detail::envelope(s.cfg(), "spectrum");
  const RunConfig& cfg = s.cfg();
  const ExponentReport& r = s.exponents();
  EntropySpectrum sp = entropy_spectrum(r, -5, 5);
  json res;
  res["base_entropy"] = sp.base_entropy;
  res["gap"] = sp.gap;
  json arr = json::array();
  for (const SpectrumEntry& e : sp.entries) {
    json one;
    one["power"] = e.power;
    one["entropy"] = e.entropy;
    one["exponent"] = element_exponent(r, e.power);
    arr.push_back(std::move(one));
  }
  res["entries"] = std::move(arr);

  // cross-check: entropy of the squared map, realized on its own periodic
  // ensemble at half the reference period, against twice the base entropy
  if (cfg.period % 2 == 0 && cfg.period >= 4) {
    int half = cfg.period / 2;
    const OrbitEnsemble& e = s.ensemble(cfg.period);
    double direct = 2.0 * ensemble_entropy(e);
    double powered =
        power_entropy_from_ensemble(s.certified(), s.potential(), 2, half);
    json pc;
    pc["power"] = 2;
    pc["period"] = half;
    pc["doubled_entropy"] = direct;
    pc["power_entropy"] = powered;
    pc["difference"] = powered - direct;
    res["power_check"] = std::move(pc);
  } else {
    res["power_check"] = nullptr;
  }
  j["results"] = std::move(res);
  return j;
}

// ---------------------------------------------------------------------------
// dispatch

inline json build_report(ReportSession& s, const std::string& name) {
  if (name == "verify") return verify_report(s);
  if (name == "conjugacy") return conjugacy_report(s);
  if (name == "equilibrium") return equilibrium_report(s);
  if (name == "exponents") return exponents_report(s);
  if (name == "dimension") return dimension_report(s);
  if (name == "leaf") return leaf_report(s);
  if (name == "rigidity") return rigidity_report(s);
  if (name == "spectrum") return spectrum_report(s);
  throw ValidationError("unknown report name: " + name);
}

// Aggregate document for the `report` subcommand: one results block per
// configured section, sharing one session (certificate, conjugacy, and
// ensembles are computed once).
inline json aggregate_report(ReportSession& s) {
  json j = detail::envelope(s.cfg(), "report");
  json sections;
  for (const std::string& name : s.cfg().reports)
    sections[name] = build_report(s, name)["results"];
  j["sections"] = std::move(sections);
  return j;
}

}  // namespace anosov
