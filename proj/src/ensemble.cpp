#include "kpcm/ensemble.hpp"

#include <algorithm>

#include "kpcm/errors.hpp"

namespace kpcm {

PhaseState random_state(std::mt19937_64& rng, std::size_t n, Complex gamma, const EnsembleOptions& opts) {
  if (n == 0) throw InvalidArgument("random_state needs n >= 1");
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    PhaseState s;
    s.gamma = gamma;
    s.x.resize(n);
    s.p.resize(n);
    const double centre = 0.5 * static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = unit(rng);
      const double b = unit(rng);
      const double c = unit(rng);
      const double d = unit(rng);
      const Complex xi(opts.spacing * (static_cast<double>(i) - centre + opts.jitter * a), opts.imag_spread * b);
      const Complex q(opts.momentum * c, opts.momentum_imag * d);
      s.x[i] = opts.scale_by_gamma ? xi / gamma : xi;
      s.p[i] = opts.scale_by_gamma ? gamma * q : q;
    }
    double closest = 1e300;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const Complex d = opts.scale_by_gamma ? gamma * (s.x[i] - s.x[j]) : s.x[i] - s.x[j];
        closest = std::min(closest, std::abs(std::sinh(d)));
      }
    if (closest >= opts.min_sinh) return s;
  }
  throw ConvergenceFailure("random_state: could not draw a regular state");
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (h | 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace kpcm
