#pragma once
// Potentials: the scalar functions whose equilibrium states are realized.
//
// Supported kinds:
//   zero, constant(c)      exact closed forms
//   phi_u                  -log |Da e_u|   (geometric unstable potential)
//   phi_s                  -log |Da^-1 e_s| (geometric stable potential)
//   fourier                finite cosine series  sum a_j cos(2 pi k_j.x + r_j)
//   pullback               inner(hinv(x)) transported through a conjugacy
//
// Pointwise phi_u / phi_s evaluation resolves the splitting by power
// iteration; ensemble code prefers the exact per-cycle evaluation in
// ensemble.hpp and only falls back to this generic path for off-orbit points.

#include <array>
#include <cmath>
#include <memory>
#include <utility>
#include <vector>

#include "anosov/common.hpp"
#include "anosov/conjugacy.hpp"
#include "anosov/map.hpp"
#include "anosov/splitting.hpp"
#include "anosov/summation.hpp"

namespace anosov {

enum class PotentialKind { zero, constant, phi_u, phi_s, fourier, pullback };

inline const char* to_string(PotentialKind k) {
  switch (k) {
    case PotentialKind::zero: return "zero";
    case PotentialKind::constant: return "constant";
    case PotentialKind::phi_u: return "phi_u";
    case PotentialKind::phi_s: return "phi_s";
    case PotentialKind::fourier: return "fourier";
    case PotentialKind::pullback: return "pullback";
  }
  return "?";
}

// one term  amplitude * cos(2 pi (frequency . x) + phase)
struct CosineTerm {
  double amplitude = 0.0;
  std::array<int, 2> frequency = {0, 0};
  double phase = 0.0;

  double eval(Vec2 x) const {
    return amplitude *
           std::cos(kTwoPi * (frequency[0] * x.x + frequency[1] * x.y) + phase);
  }
};

class Potential {
 public:
  static Potential zero() { return Potential(PotentialKind::zero); }

  static Potential constant(double c) {
    Potential p(PotentialKind::constant);
    p.c_ = c;
    return p;
  }

  static Potential phi_u() { return Potential(PotentialKind::phi_u); }
  static Potential phi_s() { return Potential(PotentialKind::phi_s); }

  static Potential fourier(std::vector<CosineTerm> terms) {
    Potential p(PotentialKind::fourier);
    p.terms_ = std::move(terms);
    return p;
  }

  // inner(hinv(y)): carries a potential for the conjugacy's map over to the
  // linear side (or back).  `series_inverse` trades speed for full accuracy.
  static Potential pullback(Potential inner,
                            std::shared_ptr<const Conjugacy> via,
                            bool series_inverse = false) {
    if (!via) throw ValidationError("pullback potential needs a conjugacy");
    Potential p(PotentialKind::pullback);
    p.inner_ = std::make_shared<Potential>(std::move(inner));
    p.via_ = std::move(via);
    p.series_inverse_ = series_inverse;
    return p;
  }

  PotentialKind kind() const { return kind_; }
  double constant_value() const { return c_; }
  const std::vector<CosineTerm>& terms() const { return terms_; }
  const Potential& inner() const { return *inner_; }
  const std::shared_ptr<const Conjugacy>& via() const { return via_; }
  bool series_inverse() const { return series_inverse_; }

  bool is_geometric() const {
    return kind_ == PotentialKind::phi_u || kind_ == PotentialKind::phi_s;
  }

  double eval(const TorusMap& map, TorusPoint p) const {
    switch (kind_) {
      case PotentialKind::zero:
        return 0.0;
      case PotentialKind::constant:
        return c_;
      case PotentialKind::phi_u: {
        Vec2 e = unstable_direction(map, p);
        return -std::log(map.derivative(p.as_vec()).apply(e).norm());
      }
      case PotentialKind::phi_s: {
        Vec2 e = stable_direction(map, p);
        return -std::log(map.derivative(p.as_vec()).inverse().apply(e).norm());
      }
      case PotentialKind::fourier: {
        double s = 0.0;
        for (const auto& t : terms_) s += t.eval(p.as_vec());
        return s;
      }
      case PotentialKind::pullback: {
        TorusPoint q = series_inverse_ ? via_->apply_inverse_series(p)
                                       : via_->apply_inverse_grid(p);
        return inner_->eval(via_->map(), q);
      }
    }
    throw ValidationError("unknown potential kind");
  }

  // sup |phi| over an evaluation grid; the boundedness diagnostic
  double max_abs_on_grid(const TorusMap& map, int grid = 64) const {
    double m = 0.0;
    for (int i = 0; i < grid; ++i)
      for (int j = 0; j < grid; ++j) {
        TorusPoint p(static_cast<double>(i) / grid,
                     static_cast<double>(j) / grid);
        m = std::max(m, std::abs(eval(map, p)));
      }
    return m;
  }

 private:
  explicit Potential(PotentialKind k) : kind_(k) {}

  PotentialKind kind_;
  double c_ = 0.0;
  std::vector<CosineTerm> terms_;
  std::shared_ptr<const Potential> inner_;
  std::shared_ptr<const Conjugacy> via_;
  bool series_inverse_ = false;
};

// S_n phi(p) = sum_{i<n} phi(a^i p), fixed evaluation order
inline double birkhoff_sum(const TorusMap& map, const Potential& phi,
                           TorusPoint p, int n) {
  if (n < 1) throw ValidationError("birkhoff sum needs n >= 1");
  NeumaierAccumulator acc;
  TorusPoint x = p;
  for (int i = 0; i < n; ++i) {
    acc.add(phi.eval(map, x));
    x = map.apply(x);
  }
  return acc.value();
}

}  // namespace anosov
