#pragma once

// Registered verification checks. Each check draws a seeded ensemble, measures
// the largest normalised defect and compares it with a tolerance taken from
// the check parameters (defaults below).

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace kpcm {

struct CheckParams {
  std::map<std::string, double> values;

  double get(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
};

struct CheckOutcome {
  std::string name;
  double defect = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  int samples = 0;
  /// Draws dropped because the flow collided or Newton did not converge.
  int skipped = 0;
  double wall_time = 0.0;
};

struct CheckInfo {
  std::string name;
  std::string description;
  double default_tolerance;
};

/// All registered checks, sorted by name.
const std::vector<CheckInfo>& check_registry();
bool is_registered_check(std::string_view name);

/// Runs one check with an ensemble seeded from derive_seed(seed, name).
/// Throws InvalidArgument for an unknown name. A check that collects no
/// samples fails with an infinite defect.
CheckOutcome run_check(std::string_view name, std::uint64_t seed, const CheckParams& params = {});

}  // namespace kpcm
