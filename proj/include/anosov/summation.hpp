#pragma once
// Deterministic compensated summation.  All ensemble reductions go through
// these helpers so that results are bit-identical for any worker count: terms
// are accumulated in fixed-size index blocks (Neumaier within a block, blocks
// combined in index order), independent of how blocks were scheduled.

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "anosov/parallel.hpp"

namespace anosov {

// Neumaier variant of Kahan summation: exact for modest cancellation and
// insensitive to term ordering within round-off of the compensated result.
struct NeumaierAccumulator {
  double sum = 0.0;
  double comp = 0.0;

  void add(double x) {
    double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

inline constexpr std::size_t kSumBlock = 4096;

// Fixed-order compensated block sum of term(0..n-1).  K values per term are
// accumulated simultaneously (e.g. real and imaginary parts).
template <std::size_t K, typename TermFn>
std::array<double, K> deterministic_sum_multi(std::size_t n, TermFn&& term,
                                              int workers = 1) {
  std::size_t n_blocks = (n + kSumBlock - 1) / kSumBlock;
  std::vector<std::array<NeumaierAccumulator, K>> blocks(n_blocks);
  parallel_chunks(n, kSumBlock, workers,
                  [&](std::size_t block, std::size_t i0, std::size_t i1) {
                    auto& acc = blocks[block];
                    for (std::size_t i = i0; i < i1; ++i) {
                      std::array<double, K> v = term(i);
                      for (std::size_t k = 0; k < K; ++k) acc[k].add(v[k]);
                    }
                  });
  std::array<double, K> out{};
  for (std::size_t k = 0; k < K; ++k) {
    NeumaierAccumulator total;
    for (std::size_t b = 0; b < n_blocks; ++b) total.add(blocks[b][k].value());
    out[k] = total.value();
  }
  return out;
}

template <typename TermFn>
double deterministic_sum(std::size_t n, TermFn&& term, int workers = 1) {
  auto fn = [&](std::size_t i) { return std::array<double, 1>{term(i)}; };
  return deterministic_sum_multi<1>(n, fn, workers)[0];
}

}  // namespace anosov
