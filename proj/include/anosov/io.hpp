#pragma once
// Artifact persistence: CSV tables at full double precision, JSON reports
// with a stable key order, and the comparison helpers used by regression
// tests (timestamp-stripped byte equality and per-field numeric tolerances).

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anosov/common.hpp"

namespace anosov {

// one CSV cell with 17 significant digits (shortest round-trip superset)
inline std::string csv_cell(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header)
      : out_(path) {
    if (!out_) throw ValidationError("cannot open CSV for writing: " + path);
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) out_ << ',';
      out_ << header[i];
    }
    out_ << '\n';
    columns_ = header.size();
  }

  void row(const std::vector<double>& cells) {
    if (cells.size() != columns_)
      throw ValidationError("CSV row width does not match the header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << csv_cell(cells[i]);
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
  std::size_t columns_ = 0;
};

inline void write_json(const std::string& path, const nlohmann::ordered_json& j) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open JSON for writing: " + path);
  out << j.dump(2) << '\n';
}

inline nlohmann::ordered_json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open JSON for reading: " + path);
  return nlohmann::ordered_json::parse(in);
}

// serialization with volatile fields (timestamps) removed, for byte-level
// reproducibility comparisons
inline std::string stable_dump(nlohmann::ordered_json j) {
  j.erase("timestamp");
  return j.dump(2);
}

// Per-field regression comparison: every scalar in `expected` must exist in
// `actual` and agree within reltol (plus abstol near zero); arrays and
// objects recurse; strings, booleans and integers must match exactly.
// The timestamp key is ignored.  Returns a list of human-readable
// discrepancies, empty when the reports agree.
inline void compare_json_fields(const nlohmann::ordered_json& expected,
                                const nlohmann::ordered_json& actual,
                                const std::string& path, double reltol,
                                double abstol,
                                std::vector<std::string>& out) {
  using nlohmann::ordered_json;
  if (expected.is_object()) {
    if (!actual.is_object()) {
      out.push_back(path + ": expected an object");
      return;
    }
    for (const auto& [key, val] : expected.items()) {
      if (key == "timestamp") continue;
      if (!actual.contains(key)) {
        out.push_back(path + "." + key + ": missing");
        continue;
      }
      compare_json_fields(val, actual.at(key), path + "." + key, reltol, abstol,
                          out);
    }
    for (const auto& [key, val] : actual.items())
      if (key != "timestamp" && !expected.contains(key))
        out.push_back(path + "." + key + ": unexpected key");
    return;
  }
  if (expected.is_array()) {
    if (!actual.is_array() || actual.size() != expected.size()) {
      out.push_back(path + ": array shape mismatch");
      return;
    }
    for (std::size_t i = 0; i < expected.size(); ++i)
      compare_json_fields(expected[i], actual[i],
                          path + "[" + std::to_string(i) + "]", reltol, abstol,
                          out);
    return;
  }
  if (expected.is_number_float() || actual.is_number_float()) {
    if (!actual.is_number()) {
      out.push_back(path + ": expected a number");
      return;
    }
    double e = expected.get<double>(), a = actual.get<double>();
    if (std::isnan(e) && std::isnan(a)) return;
    double scale = std::max(std::abs(e), std::abs(a));
    if (std::abs(e - a) > abstol + reltol * scale)
      out.push_back(path + ": " + csv_cell(a) + " vs expected " + csv_cell(e));
    return;
  }
  if (expected != actual)
    out.push_back(path + ": " + actual.dump() + " vs expected " + expected.dump());
}

inline std::vector<std::string> compare_reports(
    const nlohmann::ordered_json& expected, const nlohmann::ordered_json& actual,
    double reltol = 1e-9, double abstol = 1e-12) {
  std::vector<std::string> diffs;
  compare_json_fields(expected, actual, "$", reltol, abstol, diffs);
  return diffs;
}

}  // namespace anosov
