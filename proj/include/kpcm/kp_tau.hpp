#pragma once

// KP side of the correspondence: the tau-function as a root product and as a
// determinant, pole extraction from the hierarchical times, shifted tau
// functions and the bilinear identity, wave-function coefficients and the
// residue identities, and a finite-difference KP residual.

#include <array>
#include <optional>
#include <vector>

#include "kpcm/cm_core.hpp"
#include "kpcm/flows.hpp"

namespace kpcm {

/// Matrices fixed by the initial state: L0, W0 and the flow generators
/// calL_k = (L0 + gI)^k - (L0 - gI)^k for k = 1..k_max.
struct FlowMatrixSet {
  PhaseState initial;
  ComplexMatrix lax0;
  ComplexMatrix w0;
  std::vector<ComplexMatrix> generators;  // generators[k - 1] = calL_k

  int k_max() const { return static_cast<int>(generators.size()); }
};

FlowMatrixSet build_flow_matrices(const PhaseState& s0, int k_max = static_cast<int>(HierarchyTimes::kMaxEntries));

/// exp(-sum_k t_k calL_k). Throws InvalidArgument when a time index exceeds
/// k_max or ||sum t_k calL_k||_inf > 100.
ComplexMatrix evolution_matrix(const FlowMatrixSet& fm, const HierarchyTimes& times);

/// prod_i (w - exp(2 g x_i))
Complex tau_from_roots(const PhaseState& s, Complex w);

/// det(wI - exp(-sum t_k calL_k) W0)
Complex tau_det(const FlowMatrixSet& fm, const HierarchyTimes& times, Complex w);

/// Eigenvalues of exp(-sum t_k calL_k) W0, i.e. the exponentiated poles.
ComplexVector pole_weights(const FlowMatrixSet& fm, const HierarchyTimes& times);

/// Converts w_i = exp(2 g x_i) to positions. Roots are assigned to the
/// reference particles by the matching that minimises the total distance
/// (over all branches x + k i pi / g), then each gets its nearest branch.
/// Throws BranchAmbiguity if two branches are within 1e-9 of equally close.
ComplexVector poles_to_positions(std::span<const Complex> w, Complex gamma, std::span<const Complex> reference);

/// Positions at the given times, paired with and branch-matched to
/// `reference` (defaults to the initial positions).
ComplexVector poles_from_times(const FlowMatrixSet& fm, const HierarchyTimes& times,
                               std::optional<ComplexVector> reference = std::nullopt);

/// Same, continued from the initial state along the straight path s * times,
/// 0 < s <= 1, so that branches and labels follow the motion. Steps start at
/// 1/substeps and are halved while a particle would move more than a quarter
/// of the gap to its nearest neighbour.
ComplexVector track_poles(const FlowMatrixSet& fm, const HierarchyTimes& times, int substeps = 32);

/// Full phase state at the given times: positions by track_poles and momenta
/// from the diagonal of L(t) = V L0 V^{-1}, where the rows of V are left
/// eigenvectors of the evolution matrix times W0.
PhaseState state_at_times(const FlowMatrixSet& fm, const HierarchyTimes& times, int substeps = 32);

/// u = -sum_i g^2 / sinh^2(g (xq - x_i)). Throws EvaluationAtPole within 1e-8 of a pole.
Complex u1_eval(const PhaseState& s, Complex xq);

/// u and its first four x-derivatives at xq, in closed form.
std::array<Complex, 5> u1_derivatives(const PhaseState& s, Complex xq);

/// Multiplicative factors of the shifted tau-function at a (time-evolved) state:
/// tau(t + [1/lambda]) / tau(t), tau(t - [1/mu]) / tau(t) and
/// tau(t + [1/lambda] - [1/mu]) / tau(t), plus the x-derivative of the last.
struct ShiftFactors {
  Complex lambda;
  Complex mu;
  Complex mu_only;
  Complex both;
  Complex both_dx;
};

/// Throws SingularLinearSystem if w is within 1e-6 (relative) of a pole or a
/// resolvent is singular.
ShiftFactors shift_factors(const PhaseState& s, Complex w, Complex lambda, Complex mu);

/// tau at times shifted by [1/lambda] and/or -[1/mu], from the exact trace formulas.
Complex tau_shift(const FlowMatrixSet& fm, const HierarchyTimes& times, Complex w, std::optional<Complex> lambda,
                  std::optional<Complex> mu);

/// tau at times + [1/lambda] - [1/mu] approximated by truncating the shift to
/// k <= terms (t_k += (lambda^-k - mu^-k) / k), evaluated by tau_det.
Complex tau_shift_truncated(const FlowMatrixSet& fm, const HierarchyTimes& times, Complex w,
                            std::optional<Complex> lambda, std::optional<Complex> mu, int terms);

struct BilinearResult {
  Complex residual;
  double scale;
};

/// d_x F_lm - (lambda - mu)(F_lm - F_l F_m), where F are the shift factors
/// above; this is the bilinear identity divided by tau(t)^2.
BilinearResult bilinear_residual(const PhaseState& s, Complex w, Complex lambda, Complex mu);
BilinearResult bilinear_residual(const FlowMatrixSet& fm, const HierarchyTimes& times, Complex w, Complex lambda,
                                 Complex mu);

struct WaveCoeffs {
  Complex z;
  ComplexVector c_tilde;
  ComplexVector c_tilde_star;
};

/// c = -((z - g)I - L)^{-1} W^{1/2} e, c* = e^T W^{1/2} ((z + g)I - L)^{-1}
WaveCoeffs wave_coeffs(const PhaseState& s, Complex z);

/// ||d_{t2} c - M c||_inf with d_{t2} c from a fourth-order central
/// difference over integrated states at t2 = +-h, +-2h.
double wave_evolution_defect(const PhaseState& s, Complex z, double h);

/// max_i |4th-order central difference of the poles along t_m at step h - grad_p(s0, m)_i|
double residue_identity_defect(const FlowMatrixSet& fm, int m, double h);

/// Trapezoid rule on |z| = R, Q nodes, counterclockwise, of
/// (1/2 pi i) z^m c*_i c_i / w_i dz. Equals grad_p(s, m) by the residue identity.
ComplexVector contour_residue(const PhaseState& s, int m, double radius, int nodes);

/// Smallest admissible contour radius: max |spec(L)| + |g| + 1.
double contour_min_radius(const PhaseState& s);

struct KpResidual {
  Complex residual;
  /// Largest magnitude among the terms of the equation.
  double scale;
};

/// 3 u_{t2 t2} - 4 u_{t3 x} + 12 (u_x^2 + u u_xx) + u_xxxx at xq, where u is
/// built from the poles at base_times + (t2, t3). x-derivatives are exact;
/// t-derivatives use second-order central differences with step h.
KpResidual kp_residual(const FlowMatrixSet& fm, const HierarchyTimes& base_times, Complex xq, double h);

/// Max |2x2 minor| / max |entry| of XZ - YX with X = -W, Z = L - gI, Y = L + gI.
double rank_one_defect(const PhaseState& s);
double rank_one_defect(const ComplexMatrix& lax, const ComplexMatrix& w, Complex gamma);

}  // namespace kpcm
