#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kpcm/cm_core.hpp"
#include "kpcm/suite.hpp"

namespace kpcm::cli {

/// Anything wrong with the configuration itself; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FlowSpec {
  int m = 2;
  double t = 0.0;
  double rtol = 1e-10;
};

struct CheckSpec {
  std::string name;
  CheckParams params;
};

struct RunConfig {
  Complex gamma = 1.0;
  ComplexVector x0;
  ComplexVector p0;
  std::vector<FlowSpec> flows;
  /// Empty means every registered check.
  std::vector<CheckSpec> checks;
  std::uint64_t seed = 0;
  std::string output_dir = "kpcm-out";
  /// Spectral parameters for the backlund command.
  std::vector<Complex> mus;
  /// Rows per flow in tau-compare, including t = 0.
  int tau_rows = 11;
  /// Canonical-defect bound per backlund row, relative to |mu| + N|g| + max|p|.
  double backlund_tol = 1e-10;
  /// sha256 of the canonical JSON form, after command-line overrides.
  std::string digest;

  PhaseState initial_state() const;
};

/// Parses and validates a JSON document. Complex numbers are [re, im] or a
/// plain real number. Throws ConfigError.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);

/// Replaces the seed and recomputes the digest.
void override_seed(RunConfig& cfg, std::uint64_t seed);

std::string sha256_hex(std::string_view data);

}  // namespace kpcm::cli
