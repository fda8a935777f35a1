#pragma once

// Parameter-dependent Backlund transformation (x, p) -> (y, pt):
//
//   p_i  = -mu + g sum_{k != i} coth(g x_ik) - g sum_k coth(g (x_i - y_k))
//   pt_i = -mu - g sum_{k != i} coth(g y_ik) + g sum_k coth(g (y_i - x_k))
//
// For large mu the solution continuous with y = x is y = exp(-D(mu)) x, the
// positions at times shifted by -[1/mu]. The backward solve gives exp(+D(mu)) x.

#include <optional>
#include <utility>
#include <vector>

#include "kpcm/cm_core.hpp"

namespace kpcm {

struct BacklundPair {
  PhaseState source;
  ComplexVector target_y;
  ComplexVector target_p;
  Complex mu;
  int iterations = 0;
  /// Final max-norm residual of the solved equation set.
  double residual = 0.0;
};

/// x + 1/mu - p/mu^2, the first terms of the series for exp(-D) x.
ComplexVector backlund_seed(const PhaseState& s, Complex mu);

/// Newton's method with backtracking on the first equation set, solved for
/// y. Converged when the residual is at most 1e-12 (|mu| + N|g| + max|p|).
/// Throws NewtonDivergence after 50 iterations or a failed line search, and
/// PoleCollision if an iterate comes within the guard of x or of itself.
BacklundPair backlund_solve(const PhaseState& s, Complex mu, std::optional<ComplexVector> y_init = std::nullopt);

/// The reverse map: finds z with (z, pz) -> (x, p), i.e. solves the second
/// equation set with x in the role of y. The seed is x - 1/mu + p/mu^2.
/// Returns the pair with target_y = z and target_p = pz.
BacklundPair backlund_solve_backward(const PhaseState& s, Complex mu,
                                     std::optional<ComplexVector> z_init = std::nullopt);

/// F = sum_{i<j} log[sinh(g x_ij) sinh(g y_ij)] - sum_{i,j} log sinh(g (x_i - y_j)) - mu sum_i (x_i - y_i),
/// principal branch of the logarithm.
Complex gen_function(std::span<const Complex> x, std::span<const Complex> y, Complex mu, Complex gamma);

/// (dF/dx, dF/dy) in closed form.
std::pair<ComplexVector, ComplexVector> gen_function_gradient(std::span<const Complex> x, std::span<const Complex> y,
                                                              Complex mu, Complex gamma);

/// max_i |p_i - dF/dx_i| and |pt_i + dF/dy_i|
double canonical_defect(const BacklundPair& pair);

/// Actions of the Schur operators on the positions: forward[k-1] = h_k(d)x
/// and backward[k-1] = h_k(-d)x, where d_k = (1/k) d/dt_k, for k = 1..order.
struct SchurOperatorTable {
  int order = 0;
  std::vector<ComplexVector> forward;
  std::vector<ComplexVector> backward;
};

SchurOperatorTable schur_table(const PhaseState& s0, int order = 4);

/// x + sum_{k <= K} h_k(-+d)x mu^-k: the truncated exp(-D) x (sign = -1) or exp(D) x (sign = +1).
ComplexVector series_shift(const PhaseState& s, const SchurOperatorTable& table, Complex mu, int K, int sign);

/// max_i |y_i - truncated series for exp(-D) x|, y from backlund_solve.
double expansion_defect(const PhaseState& s, Complex mu, int K);

/// Least-squares slope of log expansion_defect(s, mu, K) against log mu over real mu.
/// Close to -(K + 1) once mu is large against the state and h_{K+1}x is not degenerate.
double expansion_exponent(const PhaseState& s, int K, std::span<const double> mus);

/// max_i |sum_k coth(g(x_i - y_k)) + sum_k coth(g(x_i - z_k)) - 2 sum_{k != i} coth(g x_ik)|
/// with y and z from the forward and backward solves at the same state.
double subtracted_defect(const PhaseState& s, Complex mu);

/// Deviations of the explicit t_3 and t_4 velocity formulas from grad_p(s, 3) and grad_p(s, 4).
std::pair<double, double> appendix_flow_check(const PhaseState& s);

}  // namespace kpcm
