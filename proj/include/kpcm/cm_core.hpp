#pragma once

// Phase-space objects of the trigonometric Calogero-Moser system: the Lax
// matrix and its companions, the hierarchy Hamiltonians and their gradients.
//
// Coupling, positions and momenta are complex. Real gamma gives the
// hyperbolic model, imaginary gamma the trigonometric one. Half powers
// w_i^{1/2} are always taken as exp(gamma x_i), never as a square root of w_i.

#include <array>

#include "kpcm/linalg.hpp"

namespace kpcm {

inline constexpr double kDefaultCollisionGuard = 1e-8;

/// A point of the N-particle phase space together with the coupling.
struct PhaseState {
  Complex gamma{1.0, 0.0};
  ComplexVector x;
  ComplexVector p;
  /// Minimum admissible |sinh(gamma (x_i - x_j))|.
  double collision_guard = kDefaultCollisionGuard;

  std::size_t size() const { return x.size(); }
};

/// Checks |x| = |p| >= 1, gamma != 0 and finite entries. Throws InvalidArgument.
void validate(const PhaseState& s);

/// min_{i != j} |sinh(gamma (x_i - x_j))|, or +inf for a single particle.
double min_pair_sinh(const PhaseState& s);

/// validate() plus the pairwise regularity guard. Throws PoleCollision.
void require_regular(const PhaseState& s);

ComplexMatrix build_lax(const PhaseState& s);
/// diag(exp(2 gamma x_i))
ComplexMatrix build_w(const PhaseState& s);
/// diag(exp(gamma x_i))
ComplexVector w_half(const PhaseState& s);
/// The t_2 companion of the Lax matrix, with xdot_i = 2 p_i.
ComplexMatrix build_m(const PhaseState& s);
/// Mtilde_ij = -2 gamma xdot_i delta_ij + M_ji
ComplexMatrix build_m_tilde(const PhaseState& s);

/// [L, W] - 2 gamma (W^{1/2} E W^{1/2} - W); vanishes identically.
ComplexMatrix comm_defect(const PhaseState& s);

/// H_k = tr L^k
Complex hamiltonian_h(const PhaseState& s, int k);

/// (L + gamma I)^m - (L - gamma I)^m
ComplexMatrix hierarchy_difference(const ComplexMatrix& lax, Complex gamma, int m);

/// The m-th flow Hamiltonian tr((L+gI)^{m+1} - (L-gI)^{m+1}) / (2 (m+1) g).
Complex hamiltonian_cal(const PhaseState& s, int m);

struct HamiltonianGradient {
  ComplexVector dp;  // d/dp_i
  ComplexVector dx;  // d/dx_i
};

/// Both gradients of hamiltonian_cal(s, m) from one matrix power evaluation.
HamiltonianGradient hamiltonian_gradient(const PhaseState& s, int m);

/// Partial derivatives of hamiltonian_cal(s, m) with respect to p_i.
ComplexVector grad_p(const PhaseState& s, int m);

/// Partial derivatives of hamiltonian_cal(s, m) with respect to x_i. dL/dx_i
/// is nonzero only in row i and column i.
ComplexVector grad_x(const PhaseState& s, int m);

/// Second t_2 derivative of the positions:
/// -8 g^3 sum_{j != i} cosh(g x_ij) / sinh^3(g x_ij).
ComplexVector eom_accel(const PhaseState& s);

/// ||Ldot + [L, M]||_inf along the t_2 flow, with Ldot in closed form.
double lax_defect(const PhaseState& s);

/// The explicit sums H_1..H_4 written with c'(x) = -g^2 / sinh^2(g x). The
/// triple sum in H_4 runs over pairwise distinct indices; with that reading
/// the sums coincide with tr L^k.
std::array<Complex, 4> appendix_hamiltonians(const PhaseState& s);

}  // namespace kpcm
