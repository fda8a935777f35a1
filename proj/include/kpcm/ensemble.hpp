#pragma once

// Seeded random phase states for the verification suites.

#include <cstdint>
#include <random>
#include <string_view>

#include "kpcm/cm_core.hpp"

namespace kpcm {

struct EnsembleOptions {
  /// Mean gap between consecutive Re(gamma x_i).
  double spacing = 0.8;
  /// Uniform jitter of Re(gamma x_i), as a fraction of spacing.
  double jitter = 0.15;
  /// Half-width of the uniform imaginary part of gamma x_i.
  double imag_spread = 0.3;
  /// Draws with min |sinh(gamma x_ij)| below this are rejected.
  double min_sinh = 0.5;
  /// p = gamma q with Re q uniform in [-momentum, momentum].
  double momentum = 0.5;
  double momentum_imag = 0.1;
  /// When false, x and p are drawn without the gamma scaling (for small gamma).
  bool scale_by_gamma = true;
};

/// Draws a regular N-particle state. The scaled variables gamma x_i are
/// sorted by real part, which keeps every pair well separated.
PhaseState random_state(std::mt19937_64& rng, std::size_t n, Complex gamma,
                        const EnsembleOptions& opts = {});

/// Stable per-name seed derived from a run seed (FNV-1a over the name, mixed
/// with splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name);

}  // namespace kpcm
