#include "kpcm/cm_core.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "kpcm/errors.hpp"

namespace kpcm {

namespace {

bool finite(Complex z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

// 1 / sinh(gamma (x_i - x_j)) for i != j, zero on the diagonal.
ComplexMatrix inverse_sinh(const PhaseState& s) {
  const std::size_t n = s.size();
  ComplexMatrix out(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) out(i, j) = 1.0 / std::sinh(s.gamma * (s.x[i] - s.x[j]));
  return out;
}

// dL_ik/dx_i = gamma^2 cosh(g x_ik) / sinh^2(g x_ik)
Complex lax_slope(Complex gamma, Complex xij) {
  const Complex sh = std::sinh(gamma * xij);
  return gamma * gamma * std::cosh(gamma * xij) / (sh * sh);
}

}  // namespace

void validate(const PhaseState& s) {
  if (s.x.empty()) throw InvalidArgument("phase state needs at least one particle");
  if (s.x.size() != s.p.size())
    throw InvalidArgument("x and p differ in length: " + std::to_string(s.x.size()) + " vs " +
                          std::to_string(s.p.size()));
  if (s.gamma == Complex(0.0) || !finite(s.gamma)) throw InvalidArgument("gamma must be finite and nonzero");
  for (std::size_t i = 0; i < s.size(); ++i)
    if (!finite(s.x[i]) || !finite(s.p[i])) throw InvalidArgument("non-finite phase-space coordinate");
  if (!(s.collision_guard >= 0.0)) throw InvalidArgument("collision guard must be non-negative");
}

double min_pair_sinh(const PhaseState& s) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j)
      best = std::min(best, std::abs(std::sinh(s.gamma * (s.x[i] - s.x[j]))));
  return best;
}

void require_regular(const PhaseState& s) {
  validate(s);
  const double d = min_pair_sinh(s);
  if (d < s.collision_guard)
    throw PoleCollision("particles collide: min |sinh(gamma x_ij)| = " + std::to_string(d));
}

ComplexMatrix build_lax(const PhaseState& s) {
  require_regular(s);
  const std::size_t n = s.size();
  ComplexMatrix l = inverse_sinh(s);
  l *= -s.gamma;
  for (std::size_t i = 0; i < n; ++i) l(i, i) = -s.p[i];
  return l;
}

ComplexMatrix build_w(const PhaseState& s) {
  validate(s);
  ComplexVector d(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) d[i] = std::exp(2.0 * s.gamma * s.x[i]);
  return ComplexMatrix::diagonal(d);
}

ComplexVector w_half(const PhaseState& s) {
  validate(s);
  ComplexVector d(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) d[i] = std::exp(s.gamma * s.x[i]);
  return d;
}

ComplexMatrix build_m(const PhaseState& s) {
  require_regular(s);
  const std::size_t n = s.size();
  const Complex g = s.gamma;
  const ComplexMatrix inv = inverse_sinh(s);
  ComplexMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    Complex sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      const Complex q = inv(i, k) * inv(i, k);
      sum += q;
      m(i, k) = 2.0 * g * g * std::exp(g * (s.x[i] - s.x[k])) * q;
    }
    m(i, i) = 2.0 * g * s.p[i] - 2.0 * g * g * sum;
  }
  return m;
}

ComplexMatrix build_m_tilde(const PhaseState& s) {
  const ComplexMatrix m = build_m(s);
  ComplexMatrix out = m.transpose();
  for (std::size_t i = 0; i < s.size(); ++i) out(i, i) -= 4.0 * s.gamma * s.p[i];
  return out;
}

ComplexMatrix comm_defect(const PhaseState& s) {
  const ComplexMatrix l = build_lax(s);
  const ComplexMatrix w = build_w(s);
  const ComplexVector h = w_half(s);
  const std::size_t n = s.size();
  ComplexMatrix rhs(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) rhs(i, j) = h[i] * h[j] - (i == j ? w(i, i) : Complex(0.0));
  return commutator(l, w) - (2.0 * s.gamma) * rhs;
}

Complex hamiltonian_h(const PhaseState& s, int k) {
  if (k < 1) throw InvalidArgument("hamiltonian_h needs k >= 1");
  return mat_pow(build_lax(s), k).trace();
}

ComplexMatrix hierarchy_difference(const ComplexMatrix& lax, Complex gamma, int m) {
  if (m < 0) throw InvalidArgument("hierarchy_difference needs m >= 0");
  ComplexMatrix plus = lax;
  plus.shift(gamma);
  ComplexMatrix minus = lax;
  minus.shift(-gamma);
  return mat_pow(plus, m) - mat_pow(minus, m);
}

Complex hamiltonian_cal(const PhaseState& s, int m) {
  if (m < 1) throw InvalidArgument("hamiltonian_cal needs m >= 1");
  const ComplexMatrix d = hierarchy_difference(build_lax(s), s.gamma, m + 1);
  return d.trace() / (2.0 * (m + 1) * s.gamma);
}

HamiltonianGradient hamiltonian_gradient(const PhaseState& s, int m) {
  if (m < 1) throw InvalidArgument("hamiltonian gradients need m >= 1");
  const ComplexMatrix d = hierarchy_difference(build_lax(s), s.gamma, m);
  const std::size_t n = s.size();
  const Complex half = 1.0 / (2.0 * s.gamma);
  HamiltonianGradient g{ComplexVector(n), ComplexVector(n)};
  for (std::size_t i = 0; i < n; ++i) {
    g.dp[i] = -d(i, i) * half;
    Complex acc = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) acc += lax_slope(s.gamma, s.x[i] - s.x[k]) * (d(k, i) - d(i, k));
    g.dx[i] = acc * half;
  }
  return g;
}

ComplexVector grad_p(const PhaseState& s, int m) { return hamiltonian_gradient(s, m).dp; }

ComplexVector grad_x(const PhaseState& s, int m) { return hamiltonian_gradient(s, m).dx; }

ComplexVector eom_accel(const PhaseState& s) {
  require_regular(s);
  const std::size_t n = s.size();
  const Complex g = s.gamma;
  ComplexVector out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Complex acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const Complex sh = std::sinh(g * (s.x[i] - s.x[j]));
      acc += std::cosh(g * (s.x[i] - s.x[j])) / (sh * sh * sh);
    }
    out[i] = -8.0 * g * g * g * acc;
  }
  return out;
}

double lax_defect(const PhaseState& s) {
  const ComplexMatrix l = build_lax(s);
  const ComplexMatrix m = build_m(s);
  const ComplexVector fx = grad_x(s, 2);
  const std::size_t n = s.size();
  ComplexMatrix ldot(n);
  for (std::size_t i = 0; i < n; ++i) {
    ldot(i, i) = fx[i];  // -pdot_i
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) ldot(i, j) = lax_slope(s.gamma, s.x[i] - s.x[j]) * 2.0 * (s.p[i] - s.p[j]);
  }
  return (ldot + commutator(l, m)).norm_inf();
}

std::array<Complex, 4> appendix_hamiltonians(const PhaseState& s) {
  require_regular(s);
  const std::size_t n = s.size();
  const Complex g = s.gamma;
  ComplexMatrix c(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) {
        const Complex sh = std::sinh(g * (s.x[i] - s.x[j]));
        c(i, j) = -g * g / (sh * sh);
      }

  std::array<Complex, 4> h{};
  for (std::size_t i = 0; i < n; ++i) {
    const Complex p = s.p[i];
    h[0] -= p;
    h[1] += p * p;
    h[2] -= p * p * p;
    h[3] += p * p * p * p;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      h[1] += c(i, j);
      h[2] -= 3.0 * p * c(i, j);
      h[3] += (4.0 * p * p + 2.0 * p * s.p[j]) * c(i, j) + c(i, j) * c(i, j);
      for (std::size_t k = 0; k < n; ++k)
        if (k != i && k != j) h[3] += 2.0 * c(i, j) * c(j, k);
    }
  }
  return h;
}

}  // namespace kpcm
