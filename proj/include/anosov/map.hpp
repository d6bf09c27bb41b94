#pragma once
// Torus diffeomorphisms with hyperbolic integer linear part and smooth
// trigonometric perturbation:  a(x) = A x + sum_j eps_j v_j sin(2 pi (k_j . x + rho_j)).

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "anosov/common.hpp"
#include "anosov/int_matrix.hpp"

namespace anosov {

struct PerturbationTerm {
  double amplitude = 0.0;          // eps
  Vec2 direction{0.0, 0.0};        // v
  std::array<int, 2> frequency{0, 0};  // k (integer, so the term is Z^2-periodic)
  double phase = 0.0;              // rho

  double angle(Vec2 x) const {
    return kTwoPi * (frequency[0] * x.x + frequency[1] * x.y + phase);
  }
};

class TorusMap {
 public:
  TorusMap() : TorusMap(IntMatrix2{2, 1, 1, 1}, {}) {}

  TorusMap(IntMatrix2 linear, std::vector<PerturbationTerm> terms)
      : linear_(linear), terms_(std::move(terms)) {
    if (!linear_.is_unimodular())
      throw ValidationError("linear part must have determinant +-1, got " +
                            linear_.to_string());
    if (!linear_.is_hyperbolic())
      throw ValidationError("linear part must be hyperbolic, got " +
                            linear_.to_string());
    for (const auto& t : terms_) {
      if (t.amplitude != 0.0 && t.frequency[0] == 0 && t.frequency[1] == 0)
        throw ValidationError("perturbation term needs a nonzero frequency");
    }
    eigen_ = eigenbasis(linear_);
    inverse_linear_ = linear_.unimodular_inverse();
  }

  const IntMatrix2& linear_part() const { return linear_; }
  const IntMatrix2& linear_inverse() const { return inverse_linear_; }
  const Eigenbasis& eigen() const { return eigen_; }
  const std::vector<PerturbationTerm>& terms() const { return terms_; }
  bool is_linear() const {
    for (const auto& t : terms_)
      if (t.amplitude != 0.0) return false;
    return true;
  }

  // periodic displacement added to the linear action
  Vec2 perturbation(Vec2 x) const {
    Vec2 p{0.0, 0.0};
    for (const auto& t : terms_)
      p += (t.amplitude * std::sin(t.angle(x))) * t.direction;
    return p;
  }

  Vec2 lift_apply(Vec2 x) const {
    return linear_.as_real().apply(x) + perturbation(x);
  }

  TorusPoint apply(TorusPoint x) const {
    Vec2 y = lift_apply(Vec2{x.x1, x.x2});
    return TorusPoint(y.x, y.y);
  }

  // Da(x) = A + sum eps 2 pi cos(theta) v k^T   (Z^2-periodic in x)
  Mat2 derivative(Vec2 x) const {
    Mat2 d = linear_.as_real();
    for (const auto& t : terms_) {
      double c = t.amplitude * kTwoPi * std::cos(t.angle(x));
      d = d + Mat2::outer(c * t.direction,
                          Vec2{static_cast<double>(t.frequency[0]),
                               static_cast<double>(t.frequency[1])});
    }
    return d;
  }
  Mat2 derivative(TorusPoint x) const { return derivative(Vec2{x.x1, x.x2}); }

  // inverse by damped Newton on the torus; the linear inverse seeds it
  TorusPoint apply_inverse(TorusPoint y, double tol = 1e-14,
                           int max_iter = 50) const {
    TorusPoint x = TorusPoint(
        static_cast<double>(inverse_linear_.a) * y.x1 +
            static_cast<double>(inverse_linear_.b) * y.x2,
        static_cast<double>(inverse_linear_.c) * y.x1 +
            static_cast<double>(inverse_linear_.d) * y.x2);
    double prev = 1e300;
    for (int it = 0; it < max_iter; ++it) {
      Vec2 delta = nearest_displacement(apply(x), y);
      double err = delta.norm();
      if (err < tol) return x;
      Vec2 step = derivative(x).solve(delta);
      double scale = 1.0;
      if (err > 0.5 * prev && it > 0) scale = 0.5;  // damp when stagnating
      TorusPoint xn = TorusPoint(x.x1 + scale * step.x,
                                         x.x2 + scale * step.y);
      x = xn;
      prev = err;
    }
    Vec2 delta = nearest_displacement(apply(x), y);
    if (delta.norm() < 1e-10) return x;  // accept near-converged
    throw NonConvergence("inverse iteration stalled at residual " +
                         std::to_string(delta.norm()));
  }

  TorusPoint apply_n(TorusPoint x, int n) const {
    if (n >= 0) {
      for (int i = 0; i < n; ++i) x = apply(x);
    } else {
      for (int i = 0; i < -n; ++i) x = apply_inverse(x);
    }
    return x;
  }

  // Rigorous positive lower bound on det Da over the torus (0 if none found).
  // One term: the determinant lemma gives det Da = det A (1 + c k^T A^{-1} v)
  // exactly, with |c| <= eps 2 pi.  Several terms: grid values minus a
  // Lipschitz slack.
  double min_jacobian_bound(int grid = 256) const {
    double det_a = static_cast<double>(linear_.det());
    if (terms_.empty()) return std::abs(det_a);
    if (terms_.size() == 1) {
      const auto& t = terms_[0];
      Vec2 k{static_cast<double>(t.frequency[0]),
             static_cast<double>(t.frequency[1])};
      Vec2 ainv_v = inverse_linear_.as_real().apply(t.direction);
      double reach = std::abs(t.amplitude) * kTwoPi * std::abs(dot(k, ainv_v));
      double lo = std::abs(det_a) * (1.0 - reach);
      return lo > 0.0 ? lo : 0.0;
    }
    // entry-wise Lipschitz constant of Da, then |grad det| bound via products
    double lip_entry = 0.0, reach_entry = 0.0;
    for (const auto& t : terms_) {
      Vec2 k{static_cast<double>(t.frequency[0]),
             static_cast<double>(t.frequency[1])};
      double amp = std::abs(t.amplitude) * kTwoPi * t.direction.norm() * k.norm();
      reach_entry += amp;
      lip_entry += amp * kTwoPi * k.norm();
    }
    double entry_cap = linear_.as_real().max_abs() + reach_entry;
    double det_lip = 4.0 * entry_cap * lip_entry;  // d(det) through 4 entries
    double h = 1.0 / grid;
    double slack = det_lip * h * 0.7072;  // farthest cell point ~ h/sqrt(2)
    double lo = 1e300;
    for (int i = 0; i < grid; ++i)
      for (int j = 0; j < grid; ++j) {
        double dj = derivative(Vec2{(i + 0.5) * h, (j + 0.5) * h}).det();
        lo = std::min(lo, std::abs(dj));
      }
    lo -= slack;
    return lo > 0.0 ? lo : 0.0;
  }

  // A local diffeo of the torus homotopic to a degree-+-1 linear map is a
  // global diffeo, so a positive Jacobian bound certifies invertibility.
  bool is_diffeomorphism(int grid = 256) const {
    return min_jacobian_bound(grid) > 0.0;
  }

 private:
  IntMatrix2 linear_;
  IntMatrix2 inverse_linear_;
  std::vector<PerturbationTerm> terms_;
  Eigenbasis eigen_;
};

}  // namespace anosov
