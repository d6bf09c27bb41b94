#pragma once
// Cone-field hyperbolicity certificates.
//
// A constant double-cone pair about the eigendirections of the linear part is
// checked for strict invariance and uniform expansion:
//   Da(x)  C_u  inside  C_u   with  |Da w| >= mu > 1      on C_u,
//   Da(x)^-1 C_s inside C_s   with  |Da^-1 w| >= mu > 1   on C_s,
// for every x.  Quantities are evaluated exactly per grid point (closed-form
// minimum of the quadratic form over the cone arc, exact boundary-ray image
// angles); the gap between grid points is covered by a Lipschitz bound on the
// derivative entries, so a positive reported margin certifies the estimates
// on the whole torus, not just the sample set.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "anosov/common.hpp"
#include "anosov/map.hpp"

namespace anosov {

struct ConeOptions {
  int grid = 512;          // sample resolution per axis
  double safety = 0.1;     // expansion excess and fractional angle margin
  std::vector<double> halfwidths = {};  // candidate cone halfwidths (radians)

  static std::vector<double> default_halfwidths() {
    std::vector<double> h;
    for (double t = 0.075; t <= 0.701; t += 0.025) h.push_back(t);
    return h;
  }
};

struct ConeReport {
  bool certified = false;
  int grid = 0;
  double safety = 0.0;
  double halfwidth_u = 0.0, halfwidth_s = 0.0;
  double min_expansion_u = 0.0;      // slack-corrected lower bound over C_u
  double min_expansion_s = 0.0;      // same for Da^-1 over C_s
  double containment_margin_u = 0.0; // radians left between image cone and C_u
  double containment_margin_s = 0.0;
  double slack_forward = 0.0;        // operator-norm slack between grid points
  double slack_inverse = 0.0;        // worst-case slack on the inverse side
  double projective_contraction_u = 0.0;  // sup |det| / inf |Dw|^2 on C_u
  double projective_contraction_s = 0.0;
  std::string detail;
};

namespace detail {

// min of |M w| over unit w in the double cone of halfwidth theta about
// center angle tc:  |M w|^2 = m0 + R cos(2t - psi) on the arc.
inline double min_norm_over_cone(const Mat2& M, double tc, double theta) {
  Mat2 S{M.a * M.a + M.c * M.c, M.a * M.b + M.c * M.d,
         M.a * M.b + M.c * M.d, M.b * M.b + M.d * M.d};  // M^T M
  double m0 = 0.5 * (S.a + S.d);
  double alpha = 0.5 * (S.a - S.d);
  double beta = S.b;
  double R = std::hypot(alpha, beta);
  double psi = std::atan2(beta, alpha);
  double lo = tc - theta, hi = tc + theta;
  auto q = [&](double t) { return m0 + R * std::cos(2.0 * t - psi); };
  double best = std::min(q(lo), q(hi));
  // interior minimum candidates: 2t - psi = pi (mod 2 pi)
  for (int k = -3; k <= 3; ++k) {
    double t = 0.5 * (psi + kPi + kTwoPi * k);
    if (t > lo && t < hi) best = std::min(best, q(t));
  }
  return std::sqrt(std::max(best, 0.0));
}

// angle of the image line M*dir(t) to the line spanned by e, as a signed
// value in (-pi/2, pi/2]; pi/2 means the image reached the perpendicular
inline double image_line_angle(const Mat2& M, Vec2 e, double t) {
  Vec2 y = M.apply(Vec2{std::cos(t), std::sin(t)});
  double d = dot(e, y);
  if (d < 0.0) { y = -y; d = -d; }
  if (d == 0.0) return kPi / 2.0;
  return std::atan2(cross(e, y), d);
}

inline double sigma_min(const Mat2& M) {
  double f = M.a * M.a + M.b * M.b + M.c * M.c + M.d * M.d;
  double dt = M.det();
  double disc = std::sqrt(std::max(f * f - 4.0 * dt * dt, 0.0));
  return std::sqrt(std::max(0.5 * (f - disc), 0.0));
}

}  // namespace detail

// Scan candidate halfwidths on one grid sweep and report the best margins.
inline ConeReport verify_anosov_cones(const TorusMap& map, ConeOptions opts = {}) {
  if (opts.grid < 16) throw ValidationError("cone grid must be >= 16");
  if (opts.halfwidths.empty()) opts.halfwidths = ConeOptions::default_halfwidths();
  const auto& eb = map.eigen();
  const double tu = std::atan2(eb.e_u.y, eb.e_u.x);
  const double ts = std::atan2(eb.e_s.y, eb.e_s.x);

  // Lipschitz constant of the derivative in operator norm: each term changes
  // by eps 2pi v k^T [cos(..) - cos(..)] with |delta cos| <= 2pi |k . dx| and
  // ||v k^T||_2 = |v| |k|, so ||Da(x) - Da(x0)|| <= lip |x - x0| exactly.
  double lip = 0.0;
  for (const auto& t : map.terms()) {
    Vec2 k{static_cast<double>(t.frequency[0]), static_cast<double>(t.frequency[1])};
    lip += std::abs(t.amplitude) * kTwoPi * kTwoPi * t.direction.norm() * k.norm_sq();
  }
  const double h = 1.0 / opts.grid;
  const double cell_reach = h * 0.7072;  // any point is this close to a sample
  const double slack_fwd = lip * cell_reach;

  // line-angle shift of an image ray when the matrix moves by at most s and
  // the unperturbed image has norm at least r:  sin(shift) <= s / (r - s)
  auto angle_slack = [](double s, double r) {
    if (s <= 0.0) return 0.0;
    if (r - s <= s) return kPi / 2.0;
    return std::asin(s / (r - s));
  };

  const std::size_t nth = opts.halfwidths.size();
  std::vector<double> exp_u(nth, 1e300), exp_s(nth, 1e300);
  std::vector<double> mar_u(nth, 1e300), mar_s(nth, 1e300);
  double max_inv_slack = 0.0;
  double max_det_fwd = 0.0, min_det_fwd = 1e300;  // |det D| extremes
  double max_frob = 0.0;                          // sup ||D||_F >= sup ||D||_2
  bool inv_bound_valid = true;

  for (int i = 0; i < opts.grid && inv_bound_valid; ++i) {
    for (int j = 0; j < opts.grid; ++j) {
      Vec2 x{(i + 0.5) * h, (j + 0.5) * h};
      Mat2 D = map.derivative(x);
      double smin = detail::sigma_min(D);
      if (smin <= 0.0) {
        ConeReport r;
        r.grid = opts.grid;
        r.safety = opts.safety;
        r.detail = "derivative singular at a sample point";
        return r;
      }
      // Neumann perturbation bound for this cell:
      //   ||(D+E)^-1 - D^-1|| <= g^2 ||E|| / (1 - g ||E||),  g = ||D^-1||
      double g = 1.0 / smin;
      if (g * slack_fwd >= 0.5) {  // bound unusable: grid too coarse
        inv_bound_valid = false;
        break;
      }
      double slack_inv = g * g * slack_fwd / (1.0 - g * slack_fwd);
      max_inv_slack = std::max(max_inv_slack, slack_inv);
      double adet = std::abs(D.det());
      max_det_fwd = std::max(max_det_fwd, adet);
      min_det_fwd = std::min(min_det_fwd, adet);
      max_frob = std::max(max_frob, std::sqrt(D.a * D.a + D.b * D.b +
                                              D.c * D.c + D.d * D.d));
      Mat2 Dinv = D.inverse();
      for (std::size_t q = 0; q < nth; ++q) {
        double th = opts.halfwidths[q];
        double eu = detail::min_norm_over_cone(D, tu, th);
        double au = std::max(std::abs(detail::image_line_angle(D, eb.e_u, tu - th)),
                             std::abs(detail::image_line_angle(D, eb.e_u, tu + th)));
        exp_u[q] = std::min(exp_u[q], eu - slack_fwd);
        mar_u[q] = std::min(mar_u[q], th - au - angle_slack(slack_fwd, eu));

        double es = detail::min_norm_over_cone(Dinv, ts, th);
        double as = std::max(std::abs(detail::image_line_angle(Dinv, eb.e_s, ts - th)),
                             std::abs(detail::image_line_angle(Dinv, eb.e_s, ts + th)));
        exp_s[q] = std::min(exp_s[q], es - slack_inv);
        mar_s[q] = std::min(mar_s[q], th - as - angle_slack(slack_inv, es));
      }
    }
  }

  ConeReport best;
  best.grid = opts.grid;
  best.safety = opts.safety;
  best.slack_forward = slack_fwd;
  best.slack_inverse = max_inv_slack;
  if (!inv_bound_valid) {
    best.detail = "grid too coarse for the inverse-derivative slack bound";
    return best;
  }
  // |det(D+E) - det D| <= 2 ||D|| ||E|| + ||E||^2, extending the |det| bounds
  // from the samples to every point of each cell
  double det_var = 2.0 * max_frob * slack_fwd + slack_fwd * slack_fwd;
  double det_hi = max_det_fwd + det_var;
  double det_lo = min_det_fwd - det_var;

  double best_score_u = -1e300, best_score_s = -1e300;
  for (std::size_t q = 0; q < nth; ++q) {
    double th = opts.halfwidths[q];
    double score_u = std::min((exp_u[q] - 1.0) / opts.safety - 1.0,
                              mar_u[q] / (opts.safety * th) - 1.0);
    if (score_u > best_score_u) {
      best_score_u = score_u;
      best.halfwidth_u = th;
      best.min_expansion_u = exp_u[q];
      best.containment_margin_u = mar_u[q];
    }
    double score_s = std::min((exp_s[q] - 1.0) / opts.safety - 1.0,
                              mar_s[q] / (opts.safety * th) - 1.0);
    if (score_s > best_score_s) {
      best_score_s = score_s;
      best.halfwidth_s = th;
      best.min_expansion_s = exp_s[q];
      best.containment_margin_s = mar_s[q];
    }
  }

  // Projective contraction sup |det| / inf |Dw|^2 < 1 on each cone proves the
  // image arc is shorter than the source arc, so the two boundary-ray images
  // really delimit it: containment checked at the boundary holds throughout.
  best.projective_contraction_u =
      best.min_expansion_u > 0.0
          ? det_hi / (best.min_expansion_u * best.min_expansion_u)
          : 1e300;
  best.projective_contraction_s =
      (best.min_expansion_s > 0.0 && det_lo > 0.0)
          ? 1.0 / (det_lo * best.min_expansion_s * best.min_expansion_s)
          : 1e300;

  best.certified = best.min_expansion_u >= 1.0 + opts.safety &&
                   best.min_expansion_s >= 1.0 + opts.safety &&
                   best.containment_margin_u >= opts.safety * best.halfwidth_u &&
                   best.containment_margin_s >= opts.safety * best.halfwidth_s &&
                   best.projective_contraction_u < 1.0 &&
                   best.projective_contraction_s < 1.0;
  best.detail =
      "expansion u/s = " + std::to_string(best.min_expansion_u) + "/" +
      std::to_string(best.min_expansion_s) +
      ", containment margin u/s = " + std::to_string(best.containment_margin_u) +
      "/" + std::to_string(best.containment_margin_s) + " rad at halfwidth " +
      std::to_string(best.halfwidth_u) + "/" + std::to_string(best.halfwidth_s) +
      ", projective contraction u/s = " +
      std::to_string(best.projective_contraction_u) + "/" +
      std::to_string(best.projective_contraction_s);
  return best;
}

// A map bundled with the certificate that it is Anosov; thermodynamic
// routines take this wrapper so uncertified maps cannot reach them.
class CertifiedMap {
 public:
  static CertifiedMap certify(TorusMap map, ConeOptions opts = {}) {
    ConeReport rep = verify_anosov_cones(map, opts);
    if (!rep.certified)
      throw CertificationError("hyperbolicity certificate failed: " + rep.detail);
    return CertifiedMap(std::move(map), std::move(rep));
  }

  const TorusMap& map() const { return map_; }
  const ConeReport& report() const { return report_; }

 private:
  CertifiedMap(TorusMap map, ConeReport rep)
      : map_(std::move(map)), report_(std::move(rep)) {}
  TorusMap map_;
  ConeReport report_;
};

}  // namespace anosov
