#pragma once
// Symmetry arithmetic around a hyperbolic toral automorphism:
//   * the minimal commuting generator M with sign * M^k = A, integer-exact,
//   * signed expansion rates of powers and the quantized entropy ladder,
//   * the contraction factor a commuting matrix induces transverse to the
//     expanding line,
//   * Fourier statistics that detect translation symmetries of an ensemble
//     pushed to linear coordinates,
//   * the affine symmetry group generated by the centralizer and the
//     detected translations, with closure and coset counts over exact
//     rationals,
//   * least-squares affine fits to sampled maps ("straightening").

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "anosov/common.hpp"
#include "anosov/conjugacy.hpp"
#include "anosov/ensemble.hpp"
#include "anosov/int_matrix.hpp"
#include "anosov/parallel.hpp"
#include "anosov/potential.hpp"
#include "anosov/summation.hpp"

namespace anosov {

// ---------------------------------------------------------------------------
// exact rational 2-vectors (translations with bounded denominators)

struct RationalVec2 {
  std::int64_t n1 = 0, n2 = 0;
  std::int64_t den = 1;  // > 0, gcd(n1, n2, den) = 1 after reduce()

  static RationalVec2 make(std::int64_t a, std::int64_t b, std::int64_t d) {
    if (d == 0) throw ValidationError("rational vector needs a nonzero denominator");
    RationalVec2 r{a, b, d};
    r.reduce();
    return r;
  }
  static RationalVec2 zero() { return {0, 0, 1}; }

  void reduce() {
    if (den < 0) {
      den = -den;
      n1 = -n1;
      n2 = -n2;
    }
    std::int64_t g = std::gcd(std::gcd(std::llabs(n1), std::llabs(n2)),
                              std::llabs(den));
    if (g > 1) {
      n1 /= g;
      n2 /= g;
      den /= g;
    }
  }
  RationalVec2 mod1() const {
    auto wrap = [&](std::int64_t n) {
      std::int64_t r = n % den;
      return r < 0 ? r + den : r;
    };
    return make(wrap(n1), wrap(n2), den);
  }
  bool is_zero() const { return n1 == 0 && n2 == 0; }
  bool operator==(const RationalVec2& o) const {
    return n1 == o.n1 && n2 == o.n2 && den == o.den;
  }
  bool operator!=(const RationalVec2& o) const { return !(*this == o); }
  bool operator<(const RationalVec2& o) const {
    return std::tie(den, n1, n2) < std::tie(o.den, o.n1, o.n2);
  }
  Vec2 to_vec2() const {
    return {static_cast<double>(n1) / static_cast<double>(den),
            static_cast<double>(n2) / static_cast<double>(den)};
  }
  std::string to_string() const {
    return std::to_string(n1) + "/" + std::to_string(den) + "," +
           std::to_string(n2) + "/" + std::to_string(den);
  }
};

inline RationalVec2 rational_add(const RationalVec2& x, const RationalVec2& y) {
  std::int64_t g = std::gcd(x.den, y.den);
  std::int64_t d = detail::checked_mul(x.den / g, y.den);
  return RationalVec2::make(
      detail::checked_add(detail::checked_mul(x.n1, d / x.den), detail::checked_mul(y.n1, d / y.den)),
      detail::checked_add(detail::checked_mul(x.n2, d / x.den), detail::checked_mul(y.n2, d / y.den)), d);
}

inline RationalVec2 rational_negate(const RationalVec2& x) {
  return {-x.n1, -x.n2, x.den};
}

inline RationalVec2 rational_apply(const IntMatrix2& B, const RationalVec2& v) {
  return RationalVec2::make(
      detail::checked_add(detail::checked_mul(B.a, v.n1), detail::checked_mul(B.b, v.n2)),
      detail::checked_add(detail::checked_mul(B.c, v.n1), detail::checked_mul(B.d, v.n2)), v.den);
}

// exact solve D v = rhs over the rationals (Cramer / adjugate)
inline RationalVec2 rational_solve(const IntMatrix2& D, const RationalVec2& rhs) {
  std::int64_t dt = D.det();
  if (dt == 0) throw ValidationError("singular integer system in rational solve");
  return RationalVec2::make(
      detail::checked_add(detail::checked_mul(D.d, rhs.n1), detail::checked_mul(-D.b, rhs.n2)),
      detail::checked_add(detail::checked_mul(-D.c, rhs.n1), detail::checked_mul(D.a, rhs.n2)),
      detail::checked_mul(rhs.den, dt));
}

// true iff D * (x - y) is an integer vector: x and y differ by a translation
// that the linear map L_D kills on the torus
inline bool rational_equivalent_mod_kernel(const IntMatrix2& D,
                                           const RationalVec2& x,
                                           const RationalVec2& y) {
  RationalVec2 d = rational_add(x, rational_negate(y));
  RationalVec2 img = rational_apply(D, d);
  return img.den == 1;  // make() fully reduces, so integer vectors end at den 1
}

// ---------------------------------------------------------------------------
// centralizer generator

inline double spectral_radius(const IntMatrix2& m) {
  double tr = static_cast<double>(m.trace());
  double dt = static_cast<double>(m.det());
  double disc = tr * tr - 4.0 * dt;
  if (disc < 0.0) return std::sqrt(std::abs(dt));
  double s = std::sqrt(disc);
  return std::max(std::abs((tr + s) / 2.0), std::abs((tr - s) / 2.0));
}

struct CentralizerData {
  IntMatrix2 M;   // minimal-expansion commuting unimodular hyperbolic matrix
  int k = 1;      // power reaching the input
  int sign = 1;   // sign * M^k == A, integer-exact
  double radius = 0.0;  // spectral radius of M
};

// Brute-force search over integer matrices with entries in
// [-entry_bound, entry_bound] for the commuting unimodular hyperbolic matrix
// of minimal spectral radius that reaches A as a signed power.  Ties at the
// minimal radius are broken toward lexicographically largest entries, which
// selects the "positive" generator among {±M, ±M^-1}.
inline CentralizerData centralizer_generator(const IntMatrix2& A,
                                             int entry_bound = 10) {
  if (!A.is_hyperbolic())
    throw ValidationError("centralizer search needs a hyperbolic matrix");
  std::int64_t amax = std::max({std::llabs(A.a), std::llabs(A.b),
                                std::llabs(A.c), std::llabs(A.d)});
  if (entry_bound < amax)
    throw ValidationError("entry bound " + std::to_string(entry_bound) +
                          " is below the largest input entry " +
                          std::to_string(amax));

  std::vector<IntMatrix2> candidates;
  for (std::int64_t a = -entry_bound; a <= entry_bound; ++a)
    for (std::int64_t b = -entry_bound; b <= entry_bound; ++b)
      for (std::int64_t c = -entry_bound; c <= entry_bound; ++c)
        for (std::int64_t d = -entry_bound; d <= entry_bound; ++d) {
          IntMatrix2 m{a, b, c, d};
          if (!m.is_unimodular() || !m.is_hyperbolic()) continue;
          if (!m.commutes_with(A)) continue;
          candidates.push_back(m);
        }
  if (candidates.empty())
    throw NotFound("no commuting hyperbolic unimodular matrix with entries in [-" +
                   std::to_string(entry_bound) + "," + std::to_string(entry_bound) +
                   "]; retry with entry_bound = " + std::to_string(2 * entry_bound));

  std::sort(candidates.begin(), candidates.end(),
            [](const IntMatrix2& x, const IntMatrix2& y) {
              double rx = spectral_radius(x), ry = spectral_radius(y);
              if (rx != ry) return rx < ry;
              return std::tie(x.a, x.b, x.c, x.d) > std::tie(y.a, y.b, y.c, y.d);
            });

  const IntMatrix2 negA = A.negated();
  for (const IntMatrix2& m : candidates) {
    IntMatrix2 p = m;
    for (int k = 1; k <= 64; ++k) {
      if (p == A || p == negA) {
        CentralizerData out{m, k, p == A ? 1 : -1, spectral_radius(m)};
        // integer re-verification of the power relation
        IntMatrix2 q = IntMatrix2::identity();
        for (int i = 0; i < out.k; ++i) q = q * out.M;
        if (out.sign == -1) q = q.negated();
        if (q != A) throw NotFound("power verification failed unexpectedly");
        return out;
      }
      try {
        p = p * m;
      } catch (const OverflowLimit&) {
        break;
      }
    }
  }
  throw NotFound("no bounded signed power of a commuting unit reaches the input; "
                 "retry with entry_bound = " + std::to_string(2 * entry_bound));
}

// ---------------------------------------------------------------------------
// group element symbols and the entropy ladder

struct AffineTag {
  IntMatrix2 B;       // linear part, commuting with the reference matrix
  RationalVec2 v;     // translation, representative in [0,1)^2
};

struct GroupElementSymbol {
  int power = 0;                   // formal exponent in the generating word
  std::optional<AffineTag> tag;    // explicit affine realization, when known

  static GroupElementSymbol word(int m) { return {m, std::nullopt}; }
};

// signed mean expansion rate of the m-th power word
inline double element_exponent(const ExponentReport& rep, int power) {
  return static_cast<double>(power) * rep.lambda_u;
}
inline double element_exponent(const ExponentReport& rep,
                               const GroupElementSymbol& s) {
  return element_exponent(rep, s.power);
}

// One canonical product |lambda_u| * delta_u is formed once; every ladder
// value is an exact integer multiple of it, so scaling identities hold
// bit-for-bit.
inline double entropy_unit(const ExponentReport& rep) {
  return std::abs(rep.lambda_u) * rep.delta_u;
}

inline double element_entropy(const ExponentReport& rep, int power) {
  return static_cast<double>(std::abs(power)) * entropy_unit(rep);
}
inline double element_entropy(const ExponentReport& rep,
                              const GroupElementSymbol& s) {
  return element_entropy(rep, s.power);
}

struct SpectrumEntry {
  int power = 0;
  double entropy = 0.0;
};

struct EntropySpectrum {
  double base_entropy = 0.0;           // the quantum
  std::vector<SpectrumEntry> entries;  // (m, |m| * base) over the power range
  double gap = 0.0;                    // = base_entropy
};

inline EntropySpectrum entropy_spectrum(const ExponentReport& rep, int m_lo = -5,
                                        int m_hi = 5) {
  if (m_lo > m_hi) throw ValidationError("empty power range for the spectrum");
  EntropySpectrum sp;
  sp.base_entropy = entropy_unit(rep);
  sp.gap = sp.base_entropy;
  sp.entries.reserve(static_cast<std::size_t>(m_hi - m_lo + 1));
  for (int m = m_lo; m <= m_hi; ++m)
    sp.entries.push_back({m, element_entropy(rep, m)});
  // discreteness: the smallest positive value is one quantum
  double min_pos = 0.0;
  for (const SpectrumEntry& e : sp.entries)
    if (e.entropy > 0.0 && (min_pos == 0.0 || e.entropy < min_pos))
      min_pos = e.entropy;
  if (min_pos != 0.0 && min_pos != sp.gap)
    throw ValidationError("entropy ladder lost its quantization");
  return sp;
}

// ---------------------------------------------------------------------------
// transverse quotient contraction

// The eigenvalue of B along the contracting eigendirection of A: the factor
// by which B acts on the quotient of the plane by the expanding line.  B must
// commute with A so that the eigenline is shared.
inline double quotient_contraction(const IntMatrix2& B, const IntMatrix2& A) {
  if (!B.commutes_with(A))
    throw NonCommuting("matrix does not commute with the reference automorphism");
  Eigenbasis eb = eigenbasis(A);
  Vec2 w = B.as_real().apply(eb.e_s);
  // Rayleigh quotient: exact 1.0 for the identity regardless of how the
  // eigenvector normalization rounded
  return dot(w, eb.e_s) / dot(eb.e_s, eb.e_s);
}

// ---------------------------------------------------------------------------
// translation-invariance statistics in linear coordinates

// Fourier coefficients of the ensemble pushed through the conjugacy to linear
// coordinates: chat(k) = sum_p w_p exp(-2 pi i k . h(p)) over the mode square
// max(|k1|,|k2|) <= n_modes.  Accumulation runs in fixed block order so the
// table is byte-identical across worker counts.
struct ModeTable {
  int n_modes = 0;
  std::vector<std::complex<double>> chat;  // (2n+1)^2 entries, k1-major

  std::complex<double> at(int k1, int k2) const {
    int side = 2 * n_modes + 1;
    return chat[static_cast<std::size_t>(k1 + n_modes) * side + (k2 + n_modes)];
  }

  // max_k |chat(k)| * |1 - exp(-2 pi i k.v)|: the defect of T_v-invariance
  double statistic(Vec2 v) const {
    double best = 0.0;
    for (int k1 = -n_modes; k1 <= n_modes; ++k1)
      for (int k2 = -n_modes; k2 <= n_modes; ++k2) {
        if (k1 == 0 && k2 == 0) continue;
        double phase = -2.0 * kPi * (k1 * v.x + k2 * v.y);
        double gap = std::abs(1.0 - std::polar(1.0, phase));
        double val = std::abs(at(k1, k2)) * gap;
        if (val > best) best = val;
      }
    return best;
  }
  double statistic(const RationalVec2& v) const { return statistic(v.to_vec2()); }

  // largest possible statistic a mode of this size could produce: the control
  // value used to threshold candidate translations
  double noise_floor() const {
    double best = 0.0;
    for (int k1 = -n_modes; k1 <= n_modes; ++k1)
      for (int k2 = -n_modes; k2 <= n_modes; ++k2) {
        if (k1 == 0 && k2 == 0) continue;
        best = std::max(best, std::abs(at(k1, k2)));
      }
    return 2.0 * best;
  }
};

inline ModeTable fourier_mode_table(const OrbitEnsemble& e, const Conjugacy& h,
                                    int n_modes, int workers = 1) {
  if (n_modes < 1) throw ValidationError("mode cap must be at least 1");
  const int side = 2 * n_modes + 1;
  const std::size_t cells = static_cast<std::size_t>(side) * side;
  const std::size_t n = e.points.size();
  const std::size_t n_blocks = (n + kSumBlock - 1) / kSumBlock;
  std::vector<std::vector<std::complex<double>>> blocks(
      n_blocks, std::vector<std::complex<double>>(cells, {0.0, 0.0}));

  parallel_chunks(n, kSumBlock, workers, [&](std::size_t blk, std::size_t i0,
                                             std::size_t i1) {
    auto& acc = blocks[blk];
    std::vector<std::complex<double>> p1(side), p2(side);
    for (std::size_t i = i0; i < i1; ++i) {
      TorusPoint y = h.apply_series(e.points[i]);
      const double w = e.weights[i];
      const std::complex<double> e1 = std::polar(1.0, -2.0 * kPi * y.x1);
      const std::complex<double> e2 = std::polar(1.0, -2.0 * kPi * y.x2);
      p1[n_modes] = {1.0, 0.0};
      p2[n_modes] = {1.0, 0.0};
      for (int k = 1; k <= n_modes; ++k) {
        p1[n_modes + k] = p1[n_modes + k - 1] * e1;
        p1[n_modes - k] = std::conj(p1[n_modes + k]);
        p2[n_modes + k] = p2[n_modes + k - 1] * e2;
        p2[n_modes - k] = std::conj(p2[n_modes + k]);
      }
      std::size_t cell = 0;
      for (int a = 0; a < side; ++a)
        for (int b = 0; b < side; ++b, ++cell) acc[cell] += w * (p1[a] * p2[b]);
    }
  });

  ModeTable t;
  t.n_modes = n_modes;
  t.chat.assign(cells, {0.0, 0.0});
  for (std::size_t b = 0; b < n_blocks; ++b)
    for (std::size_t c = 0; c < cells; ++c) t.chat[c] += blocks[b][c];
  return t;
}

inline double translation_invariance_statistic(const OrbitEnsemble& e,
                                               const Conjugacy& h,
                                               const RationalVec2& v,
                                               int n_modes, int workers = 1) {
  return fourier_mode_table(e, h, n_modes, workers).statistic(v);
}

// All rational translations with coordinate denominators <= denominator_cap
// whose invariance statistic stays below the threshold.  The zero translation
// is always a member.
inline std::vector<RationalVec2> translation_candidates(const ModeTable& table,
                                                        int denominator_cap,
                                                        double threshold) {
  if (denominator_cap < 1) throw ValidationError("denominator cap must be >= 1");
  std::vector<double> grid_vals;
  std::vector<std::pair<std::int64_t, std::int64_t>> fracs;  // (num, den)
  for (std::int64_t q = 1; q <= denominator_cap; ++q)
    for (std::int64_t p = 0; p < q; ++p)
      if (std::gcd(p, q) == 1 || p == 0) {
        if (p == 0 && q > 1) continue;  // 0/1 already present
        fracs.emplace_back(p, q);
      }
  std::vector<RationalVec2> out;
  for (const auto& [pa, qa] : fracs)
    for (const auto& [pb, qb] : fracs) {
      std::int64_t d = std::lcm(qa, qb);
      RationalVec2 v = RationalVec2::make(pa * (d / qa), pb * (d / qb), d);
      if (table.statistic(v) <= threshold) out.push_back(v);
    }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// affine symmetry group (centralizer x detected translations)

struct CommutantReport {
  CentralizerData centralizer;
  std::vector<GroupElementSymbol> symbols;  // truncated enumeration
  bool closure_verified = false;    // products stayed in the enumeration
  bool identity_present = false;
  bool inverses_present = false;
  int power_cap = 0;
  std::size_t coset_count = 0;  // cosets of the pure power subgroup <M^k>
};

namespace detail {
inline IntMatrix2 signed_power(const IntMatrix2& M, int sign, int l) {
  IntMatrix2 p = l >= 0 ? M.pow(l) : M.unimodular_inverse().pow(-l);
  return sign == 1 ? p : p.negated();
}
}  // namespace detail

// Enumerates the affine symbols (sign * M^l, v) with l in [-power_cap,
// power_cap] and v drawn from the exact rational solutions of
// (I - M^k) v = eta over the detected translations eta, then verifies the
// composition law (B, v) (B', v') = (B B', B v' + v) on the truncation.
// Translations are compared modulo the finite kernel lattice of I - M^k.
inline CommutantReport commutant_candidates(
    const IntMatrix2& A, const CentralizerData& cz,
    std::vector<RationalVec2> detected_translations, int power_cap = 3,
    std::size_t closure_cap = 4096) {
  if (!cz.M.commutes_with(A))
    throw NonCommuting("centralizer generator no longer commutes with the input");
  if (power_cap < 1) throw ValidationError("power cap must be >= 1");
  if (detected_translations.empty())
    detected_translations.push_back(RationalVec2::zero());

  IntMatrix2 Mk = cz.M.pow(cz.k);
  IntMatrix2 D = IntMatrix2::identity() - Mk;
  if (D.det() == 0)
    throw ValidationError("I - M^k is singular; the generator is not hyperbolic");

  // base translations: exact rational solutions, one per detected eta
  std::vector<RationalVec2> base;
  for (const RationalVec2& eta : detected_translations)
    base.push_back(rational_solve(D, eta.mod1()).mod1());
  std::sort(base.begin(), base.end());
  base.erase(std::unique(base.begin(), base.end()), base.end());

  CommutantReport rep;
  rep.centralizer = cz;
  rep.power_cap = power_cap;

  for (int l = -power_cap; l <= power_cap; ++l)
    for (int sign : {1, -1}) {
      IntMatrix2 B = detail::signed_power(cz.M, sign, l);
      for (const RationalVec2& v : base) {
        if (rep.symbols.size() >= closure_cap)
          throw OverflowLimit("affine symbol enumeration exceeded its cap");
        GroupElementSymbol s;
        s.power = l;
        s.tag = AffineTag{B, v};
        rep.symbols.push_back(std::move(s));
      }
    }

  auto find_symbol = [&](const IntMatrix2& B, const RationalVec2& v) -> bool {
    for (const GroupElementSymbol& s : rep.symbols)
      if (s.tag->B == B && rational_equivalent_mod_kernel(D, s.tag->v, v))
        return true;
    return false;
  };

  // identity and inverses
  rep.identity_present = find_symbol(IntMatrix2::identity(), RationalVec2::zero());
  rep.inverses_present = true;
  for (const GroupElementSymbol& s : rep.symbols) {
    if (std::abs(s.power) > power_cap) continue;
    IntMatrix2 Binv = s.tag->B.unimodular_inverse();
    RationalVec2 vinv =
        rational_negate(rational_apply(Binv, s.tag->v)).mod1();
    if (!find_symbol(Binv, vinv)) rep.inverses_present = false;
  }

  // closure under the composition law, restricted to products whose power
  // stays inside the truncation window
  rep.closure_verified = true;
  for (const GroupElementSymbol& x : rep.symbols)
    for (const GroupElementSymbol& y : rep.symbols) {
      if (std::abs(x.power + y.power) > power_cap) continue;
      IntMatrix2 B = x.tag->B * y.tag->B;
      RationalVec2 v =
          rational_add(rational_apply(x.tag->B, y.tag->v), x.tag->v).mod1();
      if (!find_symbol(B, v)) rep.closure_verified = false;
    }

  // coset count of the pure power subgroup <M^k>: reduce each symbol's power
  // into [0, k) by exact left multiplications, then key on the residual data.
  // The kernel class of v is identified by D v mod 1, which is invariant.
  IntMatrix2 Mk_inv = Mk.unimodular_inverse();
  std::vector<std::tuple<std::int64_t, std::int64_t, std::int64_t, std::int64_t,
                         RationalVec2>>
      keys;
  for (const GroupElementSymbol& s : rep.symbols) {
    int l = s.power;
    IntMatrix2 B = s.tag->B;  // the reduced matrix already encodes the sign
    RationalVec2 v = s.tag->v;
    while (l >= cz.k) {
      B = Mk_inv * B;
      v = rational_apply(Mk_inv, v).mod1();
      l -= cz.k;
    }
    while (l < 0) {
      B = Mk * B;
      v = rational_apply(Mk, v).mod1();
      l += cz.k;
    }
    RationalVec2 cls = rational_apply(D, v).mod1();
    keys.emplace_back(B.a, B.b, B.c, B.d, cls);
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  rep.coset_count = keys.size();
  return rep;
}

// ---------------------------------------------------------------------------
// affine straightening

struct AffineFit {
  Mat2 B;                       // least-squares linear part
  bool integer_linear = false;  // true when B rounds cleanly to integers
  IntMatrix2 B_int;             // the rounded linear part, when it does
  Vec2 v;                       // translation, each coordinate in [0,1)
  double residual = 0.0;        // max torus deviation over the samples
  std::size_t pair_count = 0;   // neighbor differences used for the fit
};

// Least-squares affine fit to a sampled self-map of the torus.  The linear
// part comes from nearest-displacement differences over neighboring sample
// pairs (so no global lift is needed), the translation from a circular mean
// of the residues, and the residual is the max torus distance between the
// samples and the fitted map.
inline AffineFit affine_straightening(
    const std::vector<std::pair<TorusPoint, TorusPoint>>& samples) {
  const std::size_t n = samples.size();
  if (n < 8) throw DegenerateSamples("affine fit needs at least 8 samples");
  const double r_cut = 2.5 / std::sqrt(static_cast<double>(n));

  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  Vec2 r1{0.0, 0.0}, r2{0.0, 0.0};
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      Vec2 dx = nearest_displacement(samples[i].first, samples[j].first);
      if (std::abs(dx.x) > r_cut || std::abs(dx.y) > r_cut) continue;
      if (dx.norm_sq() > r_cut * r_cut) continue;
      Vec2 dy = nearest_displacement(samples[i].second, samples[j].second);
      sxx += dx.x * dx.x;
      sxy += dx.x * dx.y;
      syy += dx.y * dx.y;
      r1 = r1 + dy.x * dx;
      r2 = r2 + dy.y * dx;
      ++pairs;
    }
  if (pairs < 4)
    throw DegenerateSamples("too few neighboring sample pairs for an affine fit");
  double det = sxx * syy - sxy * sxy;
  if (std::abs(det) < 1e-12 * (sxx + syy) * (sxx + syy))
    throw DegenerateSamples("sample differences span no area");

  AffineFit fit;
  fit.pair_count = pairs;
  fit.B = {(syy * r1.x - sxy * r1.y) / det, (sxx * r1.y - sxy * r1.x) / det,
           (syy * r2.x - sxy * r2.y) / det, (sxx * r2.y - sxy * r2.x) / det};

  // snap to integers when the fit is within rounding reach
  IntMatrix2 bi{std::llround(fit.B.a), std::llround(fit.B.b),
                std::llround(fit.B.c), std::llround(fit.B.d)};
  double snap = std::max({std::abs(fit.B.a - bi.a), std::abs(fit.B.b - bi.b),
                          std::abs(fit.B.c - bi.c), std::abs(fit.B.d - bi.d)});
  Mat2 Buse = fit.B;
  if (snap < 0.1) {
    fit.integer_linear = true;
    fit.B_int = bi;
    Buse = bi.as_real();
  }

  // translation: circular mean of y - B x per coordinate
  std::complex<double> m1{0.0, 0.0}, m2{0.0, 0.0};
  for (const auto& [x, y] : samples) {
    Vec2 bx = Buse.apply({x.x1, x.x2});
    m1 += std::polar(1.0, 2.0 * kPi * (y.x1 - bx.x));
    m2 += std::polar(1.0, 2.0 * kPi * (y.x2 - bx.y));
  }
  auto angle01 = [](std::complex<double> m) {
    double t = std::arg(m) / (2.0 * kPi);
    if (t < 0.0) t += 1.0;
    if (t >= 1.0) t -= 1.0;
    return t;
  };
  fit.v = {angle01(m1), angle01(m2)};

  for (const auto& [x, y] : samples) {
    Vec2 bx = Buse.apply({x.x1, x.x2});
    TorusPoint img(bx.x + fit.v.x, bx.y + fit.v.y);  // ctor wraps into [0,1)^2
    fit.residual = std::max(fit.residual, torus_distance(y, img));
  }
  return fit;
}

// ---------------------------------------------------------------------------
// entropy of power maps from their own periodic ensembles

// Entropy of the |m|-th power map read off the n-periodic ensemble of the
// power map itself: the m p - periodic points of the base map carry the power
// map's Birkhoff data, the pressure rescales by m exactly, and the potential
// integral uses the stride-m sums.  Serves as an independent pipeline against
// |m| * (base entropy).
inline double power_entropy_from_ensemble(const CertifiedMap& certified,
                                          const Potential& phi, int m,
                                          int period,
                                          EnsembleOptions opts = {}) {
  int am = std::abs(m);
  if (am == 0) return 0.0;
  if (am * period > 16)
    throw ValidationError("power-period product too large for the periodic "
                          "ensemble route (cap 16)");
  OrbitEnsemble e = build_ensemble(certified, phi, am * period, opts);
  double pressure_power = static_cast<double>(am) * e.pressure_n;
  const TorusMap& map = certified.map();
  double phi_power = integrate(e, [&](TorusPoint p) {
    double s = 0.0;
    TorusPoint z = p;
    for (int j = 0; j < am; ++j) {
      s += phi.eval(map, z);
      z = map.apply(z);
    }
    return s;
  });
  return pressure_power - phi_power;
}

}  // namespace anosov
