#pragma once

// Dense complex linear algebra for small matrices (n of order 10).
//
// Everything here is value-semantic and free of shared state, so callers may
// evaluate independent inputs concurrently.

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace kpcm {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;

/// Square n x n complex matrix stored row-major.
class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  explicit ComplexMatrix(std::size_t n);
  ComplexMatrix(std::initializer_list<std::initializer_list<Complex>> rows);

  static ComplexMatrix identity(std::size_t n);
  static ComplexMatrix diagonal(std::span<const Complex> d);

  std::size_t size() const { return n_; }
  Complex& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  const Complex& operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
  std::span<const Complex> data() const { return data_; }

  ComplexMatrix& operator+=(const ComplexMatrix& rhs);
  ComplexMatrix& operator-=(const ComplexMatrix& rhs);
  ComplexMatrix& operator*=(Complex s);

  /// Adds s to every diagonal entry.
  ComplexMatrix& shift(Complex s);

  Complex trace() const;
  ComplexMatrix transpose() const;
  ComplexVector diag() const;
  /// Maximum absolute row sum.
  double norm_inf() const;
  /// Largest entry magnitude.
  double max_abs() const;

 private:
  std::size_t n_ = 0;
  std::vector<Complex> data_;
};

ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b);
ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b);
ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b);
ComplexMatrix operator*(Complex s, ComplexMatrix a);
ComplexVector operator*(const ComplexMatrix& a, std::span<const Complex> v);

ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b);
double norm_inf(std::span<const Complex> v);

/// Polynomial with degree-ascending coefficients; trailing zeros are trimmed
/// on construction so the leading coefficient is nonzero (except for p = 0).
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(ComplexVector coeffs);

  const ComplexVector& coeffs() const { return coeffs_; }
  int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
  Complex operator()(Complex z) const;
  /// Value and first derivative by Horner's rule.
  std::pair<Complex, Complex> eval_with_derivative(Complex z) const;
  /// sum_k |a_k| |z|^k, the natural size of the rounding error in p(z).
  double scale(Complex z) const;

 private:
  ComplexVector coeffs_;
};

/// LU factorisation with partial pivoting, PA = LU.
class LuFactorization {
 public:
  explicit LuFactorization(ComplexMatrix a);

  /// True when some pivot is below rel_tol * ||A||_inf.
  bool singular(double rel_tol = 1e-14) const;
  Complex determinant() const;
  ComplexVector solve(std::span<const Complex> b) const;
  ComplexMatrix solve(const ComplexMatrix& b) const;
  /// Solves x^T A = b^T.
  ComplexVector solve_transposed(std::span<const Complex> b) const;

 private:
  ComplexMatrix lu_;
  std::vector<std::size_t> perm_;
  int sign_ = 1;
  double norm_ = 0.0;
  double min_pivot_ = 0.0;
};

/// Solves Ax = b. Throws SingularLinearSystem when a pivot falls below
/// 1e-14 ||A||_inf.
ComplexVector lu_solve(const ComplexMatrix& a, std::span<const Complex> b);
ComplexMatrix inverse(const ComplexMatrix& a);
Complex det(const ComplexMatrix& a);

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
ComplexMatrix mat_exp(const ComplexMatrix& a, double tol = 1e-15);

/// A^k by repeated squaring.
ComplexMatrix mat_pow(const ComplexMatrix& a, int k);
inline ComplexMatrix mat_poly_apply(const ComplexMatrix& a, int k) { return mat_pow(a, k); }

/// det(wI - A): Householder reduction to Hessenberg form, then La Budde's
/// recurrence over the leading principal submatrices.
Polynomial char_poly(const ComplexMatrix& a);

/// All roots with multiplicity by Aberth-Ehrlich iteration.
ComplexVector poly_roots(const Polynomial& p, double tol = 1e-12, int max_iter = 200);

/// Refines approximate eigenvalues by Newton's method on det(wI - A), using
/// d/dw log det(wI - A) = tr (wI - A)^{-1}.
ComplexVector polish_eigenvalues(const ComplexMatrix& a, ComplexVector approx, int iterations = 3);

/// Eigenvalues of a small dense matrix: characteristic polynomial roots,
/// polished against the matrix itself.
ComplexVector eigenvalues(const ComplexMatrix& a);

}  // namespace kpcm
