#pragma once

// Hamiltonian flows of the hierarchy: dx/dt_m = dH_m/dp, dp/dt_m = -dH_m/dx.

#include <map>
#include <span>
#include <vector>

#include "kpcm/cm_core.hpp"

namespace kpcm {

/// Finite assignment of values to the hierarchical times t_1, t_2, ...
class HierarchyTimes {
 public:
  static constexpr std::size_t kMaxEntries = 16;

  HierarchyTimes() = default;
  HierarchyTimes(std::initializer_list<std::pair<const int, double>> entries);

  /// Sets t_m; m >= 1. Throws InvalidArgument past kMaxEntries or for non-finite t.
  void set(int m, double t);
  double get(int m) const;
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  /// Entries in ascending m.
  const std::map<int, double>& entries() const { return entries_; }

 private:
  std::map<int, double> entries_;
};

struct FlowDerivative {
  ComplexVector dx;
  ComplexVector dp;
};

FlowDerivative flow_derivative(const PhaseState& s, int m);

struct TrajectorySample {
  double t;
  PhaseState state;
};

/// Samples ordered along the direction of integration (t moves
/// monotonically from 0 towards t_end).
struct Trajectory {
  int m = 0;
  std::vector<TrajectorySample> samples;
};

/// RK4 with step doubling. The local error of each accepted step is at most
/// rtol |h| max(1, ||y||), i.e. rtol per unit time. Throws PoleCollision or
/// StepUnderflow (|h| < 1e-12), both carrying the time reached.
Trajectory integrate(const PhaseState& s0, int m, double t_end, double rtol);

/// Same, appending to an existing trajectory so that the samples reached
/// before a failure remain available to the caller.
void integrate(const PhaseState& s0, int m, double t_end, double rtol, Trajectory& out);

/// Integrates each (m, t_m) in ascending m.
PhaseState evolve_multi(const PhaseState& s0, const HierarchyTimes& times, double rtol);

/// Integrates the flows in the given order of indices (each must be present in times).
PhaseState evolve_multi(const PhaseState& s0, const HierarchyTimes& times, double rtol,
                        std::span<const int> order);

/// max_{k <= k_max, samples} |H_k(sample) - H_k(first sample)|
double conserved_drift(const Trajectory& traj, int k_max);

}  // namespace kpcm
