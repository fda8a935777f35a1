#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

#include "kpcm/linalg.hpp"

namespace kpcm::testing {

inline ComplexMatrix random_matrix(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ComplexMatrix a(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = scale * Complex(u(rng), u(rng));
  return a;
}

inline double max_diff(const ComplexMatrix& a, const ComplexMatrix& b) { return (a - b).max_abs(); }

inline double max_diff(std::span<const Complex> a, std::span<const Complex> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

/// Smallest max |a_i - b_sigma(i)| over all permutations sigma (n <= 8).
inline double matched_distance(std::span<const Complex> a, std::span<const Complex> b) {
  std::vector<std::size_t> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[perm[i]]));
    best = std::min(best, d);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace kpcm::testing
