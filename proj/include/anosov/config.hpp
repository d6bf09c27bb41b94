#pragma once
// Run configuration: a single JSON file declaring the map, the potential, and
// every numeric parameter a run needs.  Parsing is strict: unknown keys are
// rejected with their full path, tolerances must be positive, and the seed is
// mandatory.

#include <array>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anosov/common.hpp"
#include "anosov/cones.hpp"
#include "anosov/int_matrix.hpp"
#include "anosov/map.hpp"
#include "anosov/potential.hpp"

namespace anosov {

using json = nlohmann::ordered_json;

struct RunConfig {
  std::string name = "run";

  IntMatrix2 matrix{2, 1, 1, 1};
  std::vector<PerturbationTerm> perturbations;

  PotentialKind potential_kind = PotentialKind::zero;
  double potential_constant = 0.0;
  std::vector<CosineTerm> fourier_terms;

  int period = 12;
  int period_coarse = 12, period_fine = 14;
  int generation_coarse = 10, generation_fine = 12;

  int grid_n = 1024;   // conjugacy grid per axis
  int cone_grid = 256; // hyperbolicity certificate resolution
  double chart_half_extent = 0.075;

  double tol_conjugacy = 1e-8;
  double tol_newton = 1e-12;
  double tol_leaf_tail = 1e-10;

  std::uint64_t seed = 0;
  int workers = 1;

  double dim_r_max = 0.1;
  int dim_centers = 20;

  int rig_entry_bound = 10;
  int rig_mode_cap = 12;
  int rig_denominator_cap = 12;

  std::vector<std::string> reports = {"verify",    "conjugacy", "equilibrium",
                                      "exponents", "dimension", "leaf",
                                      "rigidity",  "spectrum"};
  std::string output_dir = "out";

  TorusMap build_map() const { return TorusMap(matrix, perturbations); }

  CertifiedMap certify() const {
    ConeOptions co;
    co.grid = cone_grid;
    return CertifiedMap::certify(build_map(), co);
  }

  Potential build_potential() const {
    switch (potential_kind) {
      case PotentialKind::zero: return Potential::zero();
      case PotentialKind::constant: return Potential::constant(potential_constant);
      case PotentialKind::phi_u: return Potential::phi_u();
      case PotentialKind::phi_s: return Potential::phi_s();
      case PotentialKind::fourier: return Potential::fourier(fourier_terms);
      default:
        throw ValidationError("config does not support this potential kind");
    }
  }
};

namespace detail {

inline void reject_unknown_keys(const json& obj, const std::string& path,
                                const std::set<std::string>& allowed) {
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key))
      throw ValidationError("config." + path + (path.empty() ? "" : ".") + key +
                            ": unknown key");
}

inline const json& require(const json& obj, const std::string& path,
                           const std::string& key) {
  if (!obj.contains(key))
    throw ValidationError("config." + path + (path.empty() ? "" : ".") + key +
                          ": required key missing");
  return obj.at(key);
}

inline double positive_number(const json& v, const std::string& where) {
  if (!v.is_number())
    throw ValidationError("config." + where + ": must be a number");
  double d = v.get<double>();
  if (!(d > 0.0))
    throw ValidationError("config." + where + ": must be positive");
  return d;
}

inline int positive_int(const json& v, const std::string& where) {
  if (!v.is_number_integer())
    throw ValidationError("config." + where + ": must be an integer");
  int i = v.get<int>();
  if (i <= 0) throw ValidationError("config." + where + ": must be positive");
  return i;
}

inline std::array<int, 2> int_pair(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() ||
      !v[1].is_number_integer())
    throw ValidationError("config." + where + ": must be a pair of integers");
  return {v[0].get<int>(), v[1].get<int>()};
}

inline Vec2 number_pair(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ValidationError("config." + where + ": must be a pair of numbers");
  return {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace detail

inline RunConfig parse_config(const json& root) {
  using detail::int_pair;
  using detail::number_pair;
  using detail::positive_int;
  using detail::positive_number;
  using detail::reject_unknown_keys;
  using detail::require;

  if (!root.is_object()) throw ValidationError("config: root must be an object");
  reject_unknown_keys(root, "",
                      {"name", "map", "potential", "period", "refinement",
                       "grid_n", "cone_grid", "chart_half_extent", "tolerances",
                       "seed", "workers", "dimension", "rigidity", "reports",
                       "output_dir"});

  RunConfig cfg;
  if (root.contains("name")) {
    if (!root["name"].is_string())
      throw ValidationError("config.name: must be a string");
    cfg.name = root["name"].get<std::string>();
  }

  // --- map -----------------------------------------------------------------
  const json& map = require(root, "", "map");
  reject_unknown_keys(map, "map", {"matrix", "perturbations"});
  const json& mat = require(map, "map", "matrix");
  if (!mat.is_array() || mat.size() != 2)
    throw ValidationError("config.map.matrix: must be a 2x2 integer array");
  std::array<int, 2> r0 = int_pair(mat[0], "map.matrix[0]");
  std::array<int, 2> r1 = int_pair(mat[1], "map.matrix[1]");
  cfg.matrix = IntMatrix2{r0[0], r0[1], r1[0], r1[1]};
  if (map.contains("perturbations")) {
    const json& ps = map["perturbations"];
    if (!ps.is_array())
      throw ValidationError("config.map.perturbations: must be an array");
    for (std::size_t i = 0; i < ps.size(); ++i) {
      std::string where = "map.perturbations[" + std::to_string(i) + "]";
      reject_unknown_keys(ps[i], where,
                          {"amplitude", "direction", "frequency", "phase"});
      PerturbationTerm t;
      t.amplitude = require(ps[i], where, "amplitude").get<double>();
      t.direction = number_pair(require(ps[i], where, "direction"),
                                where + ".direction");
      t.frequency = int_pair(require(ps[i], where, "frequency"),
                             where + ".frequency");
      t.phase = require(ps[i], where, "phase").get<double>();
      cfg.perturbations.push_back(t);
    }
  }

  // --- potential -------------------------------------------------------------
  if (root.contains("potential")) {
    const json& pot = root["potential"];
    reject_unknown_keys(pot, "potential", {"kind", "value", "terms"});
    std::string kind = require(pot, "potential", "kind").get<std::string>();
    if (kind == "zero") {
      cfg.potential_kind = PotentialKind::zero;
    } else if (kind == "constant") {
      cfg.potential_kind = PotentialKind::constant;
      cfg.potential_constant = require(pot, "potential", "value").get<double>();
    } else if (kind == "phi_u") {
      cfg.potential_kind = PotentialKind::phi_u;
    } else if (kind == "phi_s") {
      cfg.potential_kind = PotentialKind::phi_s;
    } else if (kind == "fourier") {
      cfg.potential_kind = PotentialKind::fourier;
      const json& terms = require(pot, "potential", "terms");
      if (!terms.is_array() || terms.empty())
        throw ValidationError("config.potential.terms: must be a nonempty array");
      for (std::size_t i = 0; i < terms.size(); ++i) {
        std::string where = "potential.terms[" + std::to_string(i) + "]";
        reject_unknown_keys(terms[i], where, {"amplitude", "frequency", "phase"});
        CosineTerm t;
        t.amplitude = require(terms[i], where, "amplitude").get<double>();
        t.frequency = int_pair(require(terms[i], where, "frequency"),
                               where + ".frequency");
        t.phase = require(terms[i], where, "phase").get<double>();
        cfg.fourier_terms.push_back(t);
      }
    } else {
      throw ValidationError(
          "config.potential.kind: must be one of zero, constant, phi_u, phi_s, "
          "fourier");
    }
  }

  // --- numeric parameters ----------------------------------------------------
  if (root.contains("period")) cfg.period = positive_int(root["period"], "period");
  if (root.contains("refinement")) {
    const json& rf = root["refinement"];
    reject_unknown_keys(rf, "refinement",
                        {"period_coarse", "period_fine", "generation_coarse",
                         "generation_fine"});
    if (rf.contains("period_coarse"))
      cfg.period_coarse = positive_int(rf["period_coarse"], "refinement.period_coarse");
    if (rf.contains("period_fine"))
      cfg.period_fine = positive_int(rf["period_fine"], "refinement.period_fine");
    if (rf.contains("generation_coarse"))
      cfg.generation_coarse =
          positive_int(rf["generation_coarse"], "refinement.generation_coarse");
    if (rf.contains("generation_fine"))
      cfg.generation_fine =
          positive_int(rf["generation_fine"], "refinement.generation_fine");
    if (cfg.period_coarse >= cfg.period_fine)
      throw ValidationError("config.refinement: period_coarse must be < period_fine");
    if (cfg.generation_coarse >= cfg.generation_fine)
      throw ValidationError(
          "config.refinement: generation_coarse must be < generation_fine");
  }
  if (root.contains("grid_n")) cfg.grid_n = positive_int(root["grid_n"], "grid_n");
  if (root.contains("cone_grid"))
    cfg.cone_grid = positive_int(root["cone_grid"], "cone_grid");
  if (root.contains("chart_half_extent"))
    cfg.chart_half_extent =
        positive_number(root["chart_half_extent"], "chart_half_extent");

  if (root.contains("tolerances")) {
    const json& tol = root["tolerances"];
    reject_unknown_keys(tol, "tolerances", {"conjugacy", "newton", "leaf_tail"});
    if (tol.contains("conjugacy"))
      cfg.tol_conjugacy = positive_number(tol["conjugacy"], "tolerances.conjugacy");
    if (tol.contains("newton"))
      cfg.tol_newton = positive_number(tol["newton"], "tolerances.newton");
    if (tol.contains("leaf_tail"))
      cfg.tol_leaf_tail = positive_number(tol["leaf_tail"], "tolerances.leaf_tail");
  }

  const json& seed = require(root, "", "seed");
  if (!seed.is_number_unsigned() && !seed.is_number_integer())
    throw ValidationError("config.seed: must be a nonnegative integer");
  if (seed.is_number_integer() && seed.get<std::int64_t>() < 0)
    throw ValidationError("config.seed: must be a nonnegative integer");
  cfg.seed = seed.get<std::uint64_t>();

  if (root.contains("workers"))
    cfg.workers = positive_int(root["workers"], "workers");

  if (root.contains("dimension")) {
    const json& dim = root["dimension"];
    reject_unknown_keys(dim, "dimension", {"r_max", "centers"});
    if (dim.contains("r_max"))
      cfg.dim_r_max = positive_number(dim["r_max"], "dimension.r_max");
    if (dim.contains("centers"))
      cfg.dim_centers = positive_int(dim["centers"], "dimension.centers");
  }
  if (root.contains("rigidity")) {
    const json& rig = root["rigidity"];
    reject_unknown_keys(rig, "rigidity",
                        {"entry_bound", "mode_cap", "denominator_cap"});
    if (rig.contains("entry_bound"))
      cfg.rig_entry_bound = positive_int(rig["entry_bound"], "rigidity.entry_bound");
    if (rig.contains("mode_cap"))
      cfg.rig_mode_cap = positive_int(rig["mode_cap"], "rigidity.mode_cap");
    if (rig.contains("denominator_cap"))
      cfg.rig_denominator_cap =
          positive_int(rig["denominator_cap"], "rigidity.denominator_cap");
  }

  if (root.contains("reports")) {
    const json& reps = root["reports"];
    if (!reps.is_array())
      throw ValidationError("config.reports: must be an array of subcommand names");
    static const std::set<std::string> known = {
        "verify",    "conjugacy", "equilibrium", "exponents",
        "dimension", "leaf",      "rigidity",    "spectrum"};
    cfg.reports.clear();
    for (const json& r : reps) {
      if (!r.is_string() || !known.count(r.get<std::string>()))
        throw ValidationError("config.reports: unknown report name " + r.dump());
      cfg.reports.push_back(r.get<std::string>());
    }
    if (cfg.reports.empty())
      throw ValidationError("config.reports: must not be empty");
  }
  if (root.contains("output_dir")) {
    if (!root["output_dir"].is_string())
      throw ValidationError("config.output_dir: must be a string");
    cfg.output_dir = root["output_dir"].get<std::string>();
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("config file not readable: " + path);
  json root;
  try {
    root = json::parse(f);
  } catch (const std::exception& e) {
    throw ValidationError("config file is not valid JSON: " + std::string(e.what()));
  }
  return parse_config(root);
}

// JSON echo of the parsed configuration, for self-describing reports
inline json config_echo(const RunConfig& cfg) {
  json map;
  map["matrix"] = {{cfg.matrix.a, cfg.matrix.b}, {cfg.matrix.c, cfg.matrix.d}};
  json perts = json::array();
  for (const PerturbationTerm& t : cfg.perturbations) {
    json p;
    p["amplitude"] = t.amplitude;
    p["direction"] = {t.direction.x, t.direction.y};
    p["frequency"] = {t.frequency[0], t.frequency[1]};
    p["phase"] = t.phase;
    perts.push_back(p);
  }
  map["perturbations"] = perts;

  json pot;
  pot["kind"] = to_string(cfg.potential_kind);
  if (cfg.potential_kind == PotentialKind::constant)
    pot["value"] = cfg.potential_constant;
  if (cfg.potential_kind == PotentialKind::fourier) {
    json terms = json::array();
    for (const CosineTerm& t : cfg.fourier_terms) {
      json e;
      e["amplitude"] = t.amplitude;
      e["frequency"] = {t.frequency[0], t.frequency[1]};
      e["phase"] = t.phase;
      terms.push_back(e);
    }
    pot["terms"] = terms;
  }

  json out;
  out["name"] = cfg.name;
  out["map"] = map;
  out["potential"] = pot;
  out["period"] = cfg.period;
  out["seed"] = cfg.seed;
  return out;
}

}  // namespace anosov
