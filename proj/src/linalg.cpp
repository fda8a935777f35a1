#include "kpcm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "kpcm/errors.hpp"

namespace kpcm {

ComplexMatrix::ComplexMatrix(std::size_t n) : n_(n), data_(n * n) {}

ComplexMatrix::ComplexMatrix(std::initializer_list<std::initializer_list<Complex>> rows)
    : ComplexMatrix(rows.size()) {
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != n_) {
      throw InvalidArgument("ComplexMatrix: rows must form a square matrix");
    }
    std::copy(row.begin(), row.end(), data_.begin() + static_cast<std::ptrdiff_t>(i * n_));
    ++i;
  }
}

ComplexMatrix ComplexMatrix::identity(std::size_t n) {
  ComplexMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

ComplexMatrix ComplexMatrix::diagonal(std::span<const Complex> d) {
  ComplexMatrix m(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

ComplexMatrix& ComplexMatrix::operator+=(const ComplexMatrix& rhs) {
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += rhs.data_[k];
  return *this;
}

ComplexMatrix& ComplexMatrix::operator-=(const ComplexMatrix& rhs) {
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= rhs.data_[k];
  return *this;
}

ComplexMatrix& ComplexMatrix::operator*=(Complex s) {
  for (auto& v : data_) v *= s;
  return *this;
}

ComplexMatrix& ComplexMatrix::shift(Complex s) {
  for (std::size_t i = 0; i < n_; ++i) (*this)(i, i) += s;
  return *this;
}

Complex ComplexMatrix::trace() const {
  Complex t = 0.0;
  for (std::size_t i = 0; i < n_; ++i) t += (*this)(i, i);
  return t;
}

ComplexMatrix ComplexMatrix::transpose() const {
  ComplexMatrix t(n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

ComplexVector ComplexMatrix::diag() const {
  ComplexVector d(n_);
  for (std::size_t i = 0; i < n_; ++i) d[i] = (*this)(i, i);
  return d;
}

double ComplexMatrix::norm_inf() const {
  double best = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n_; ++j) row += std::abs((*this)(i, j));
    best = std::max(best, row);
  }
  return best;
}

double ComplexMatrix::max_abs() const {
  double best = 0.0;
  for (const auto& v : data_) best = std::max(best, std::abs(v));
  return best;
}

ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
ComplexMatrix operator*(Complex s, ComplexMatrix a) { return a *= s; }

ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
  const std::size_t n = a.size();
  ComplexMatrix c(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const Complex aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

ComplexVector operator*(const ComplexMatrix& a, std::span<const Complex> v) {
  const std::size_t n = a.size();
  ComplexVector out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Complex s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += a(i, j) * v[j];
    out[i] = s;
  }
  return out;
}

ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b) { return a * b - b * a; }

double norm_inf(std::span<const Complex> v) {
  double best = 0.0;
  for (const auto& x : v) best = std::max(best, std::abs(x));
  return best;
}

// ---------------------------------------------------------------------------

Polynomial::Polynomial(ComplexVector coeffs) : coeffs_(std::move(coeffs)) {
  while (coeffs_.size() > 1 && coeffs_.back() == 0.0) coeffs_.pop_back();
}

Complex Polynomial::operator()(Complex z) const {
  Complex acc = 0.0;
  for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * z + *it;
  return acc;
}

std::pair<Complex, Complex> Polynomial::eval_with_derivative(Complex z) const {
  Complex p = 0.0;
  Complex dp = 0.0;
  for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) {
    dp = dp * z + p;
    p = p * z + *it;
  }
  return {p, dp};
}

double Polynomial::scale(Complex z) const {
  const double r = std::abs(z);
  double acc = 0.0;
  for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * r + std::abs(*it);
  return acc;
}

// ---------------------------------------------------------------------------

LuFactorization::LuFactorization(ComplexMatrix a) : lu_(std::move(a)), perm_(lu_.size()) {
  const std::size_t n = lu_.size();
  norm_ = lu_.norm_inf();
  min_pivot_ = n == 0 ? 0.0 : std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) perm_[i] = i;

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::abs(lu_(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(lu_(i, k)) > best) {
        best = std::abs(lu_(i, k));
        piv = i;
      }
    }
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(piv, j));
      std::swap(perm_[k], perm_[piv]);
      sign_ = -sign_;
    }
    min_pivot_ = std::min(min_pivot_, best);
    const Complex pivot = lu_(k, k);
    if (pivot == 0.0) continue;
    for (std::size_t i = k + 1; i < n; ++i) {
      const Complex f = lu_(i, k) / pivot;
      lu_(i, k) = f;
      if (f == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= f * lu_(k, j);
    }
  }
}

bool LuFactorization::singular(double rel_tol) const { return !(min_pivot_ >= rel_tol * norm_) || norm_ == 0.0; }

Complex LuFactorization::determinant() const {
  Complex d = static_cast<double>(sign_);
  for (std::size_t i = 0; i < lu_.size(); ++i) d *= lu_(i, i);
  return d;
}

ComplexVector LuFactorization::solve(std::span<const Complex> b) const {
  const std::size_t n = lu_.size();
  ComplexVector x(n);
  for (std::size_t i = 0; i < n; ++i) {
    Complex s = b[perm_[i]];
    for (std::size_t j = 0; j < i; ++j) s -= lu_(i, j) * x[j];
    x[i] = s;
  }
  for (std::size_t i = n; i-- > 0;) {
    Complex s = x[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= lu_(i, j) * x[j];
    x[i] = s / lu_(i, i);
  }
  return x;
}

ComplexMatrix LuFactorization::solve(const ComplexMatrix& b) const {
  const std::size_t n = lu_.size();
  ComplexMatrix x(n);
  ComplexVector col(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = b(i, j);
    const auto sol = solve(col);
    for (std::size_t i = 0; i < n; ++i) x(i, j) = sol[i];
  }
  return x;
}

ComplexVector LuFactorization::solve_transposed(std::span<const Complex> b) const {
  // A^T = U^T L^T P, so solve U^T y = b, L^T z = y, then x = P^T z.
  const std::size_t n = lu_.size();
  ComplexVector y(n);
  for (std::size_t i = 0; i < n; ++i) {
    Complex s = b[i];
    for (std::size_t j = 0; j < i; ++j) s -= lu_(j, i) * y[j];
    y[i] = s / lu_(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    Complex s = y[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= lu_(j, i) * y[j];
    y[i] = s;
  }
  ComplexVector x(n);
  for (std::size_t i = 0; i < n; ++i) x[perm_[i]] = y[i];
  return x;
}

ComplexVector lu_solve(const ComplexMatrix& a, std::span<const Complex> b) {
  if (b.size() != a.size()) throw InvalidArgument("lu_solve: dimension mismatch");
  LuFactorization lu(a);
  if (lu.singular()) throw SingularLinearSystem("lu_solve: pivot below 1e-14 ||A||");
  return lu.solve(b);
}

ComplexMatrix inverse(const ComplexMatrix& a) {
  LuFactorization lu(a);
  if (lu.singular()) throw SingularLinearSystem("inverse: pivot below 1e-14 ||A||");
  return lu.solve(ComplexMatrix::identity(a.size()));
}

Complex det(const ComplexMatrix& a) { return LuFactorization(a).determinant(); }

// ---------------------------------------------------------------------------

ComplexMatrix mat_exp(const ComplexMatrix& a, double tol) {
  if (!(tol > 0.0)) throw InvalidArgument("mat_exp: tol must be positive");
  constexpr int kMaxTerms = 40;
  const std::size_t n = a.size();
  const double norm = a.norm_inf();
  if (!std::isfinite(norm)) throw ConvergenceFailure("mat_exp: non-finite input");

  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const ComplexMatrix b = std::ldexp(1.0, -squarings) * a;

  ComplexMatrix sum = ComplexMatrix::identity(n);
  ComplexMatrix term = ComplexMatrix::identity(n);
  bool converged = false;
  for (int k = 1; k <= kMaxTerms; ++k) {
    term = (1.0 / k) * (term * b);
    sum += term;
    if (term.norm_inf() <= tol * 1e-2 * sum.norm_inf()) {
      converged = true;
      break;
    }
  }
  if (!converged) throw ConvergenceFailure("mat_exp: Taylor series did not reach tolerance");
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

ComplexMatrix mat_pow(const ComplexMatrix& a, int k) {
  if (k < 0) throw InvalidArgument("mat_pow: negative exponent");
  ComplexMatrix result = ComplexMatrix::identity(a.size());
  ComplexMatrix base = a;
  while (k > 0) {
    if (k & 1) result = result * base;
    k >>= 1;
    if (k > 0) base = base * base;
  }
  return result;
}

namespace {

// Unitary similarity to upper Hessenberg form by Householder reflections.
ComplexMatrix hessenberg(ComplexMatrix h) {
  const std::size_t n = h.size();
  ComplexVector v(n);
  for (std::size_t k = 0; k + 2 < n; ++k) {
    double norm = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) norm += std::norm(h(i, k));
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    const Complex head = h(k + 1, k);
    const Complex phase = std::abs(head) == 0.0 ? Complex(1.0) : head / std::abs(head);
    std::fill(v.begin(), v.end(), Complex(0.0));
    v[k + 1] = head + phase * norm;
    for (std::size_t i = k + 2; i < n; ++i) v[i] = h(i, k);
    double vv = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) vv += std::norm(v[i]);
    if (vv == 0.0) continue;
    // H <- (I - 2 v v^* / v^*v) H (I - 2 v v^* / v^*v)
    for (std::size_t j = 0; j < n; ++j) {
      Complex dot = 0.0;
      for (std::size_t i = k + 1; i < n; ++i) dot += std::conj(v[i]) * h(i, j);
      dot *= 2.0 / vv;
      for (std::size_t i = k + 1; i < n; ++i) h(i, j) -= v[i] * dot;
    }
    for (std::size_t i = 0; i < n; ++i) {
      Complex dot = 0.0;
      for (std::size_t j = k + 1; j < n; ++j) dot += h(i, j) * v[j];
      dot *= 2.0 / vv;
      for (std::size_t j = k + 1; j < n; ++j) h(i, j) -= dot * std::conj(v[j]);
    }
    for (std::size_t i = k + 2; i < n; ++i) h(i, k) = 0.0;
  }
  return h;
}

}  // namespace

Polynomial char_poly(const ComplexMatrix& a) {
  const std::size_t n = a.size();
  const ComplexMatrix h = hessenberg(a);
  // La Budde: p_i = (w - h_ii) p_{i-1} - sum_m h_{i-m,i} (prod_{j=i-m+1..i} h_{j,j-1}) p_{i-m-1}
  std::vector<ComplexVector> p(n + 1);
  p[0] = {Complex(1.0)};
  for (std::size_t i = 1; i <= n; ++i) {
    ComplexVector next(i + 1);
    const ComplexVector& prev = p[i - 1];
    for (std::size_t k = 0; k < prev.size(); ++k) {
      next[k + 1] += prev[k];
      next[k] -= h(i - 1, i - 1) * prev[k];
    }
    Complex sub = 1.0;
    for (std::size_t m = 1; m < i; ++m) {
      sub *= h(i - m, i - m - 1);
      const Complex f = h(i - m - 1, i - 1) * sub;
      const ComplexVector& q = p[i - m - 1];
      for (std::size_t k = 0; k < q.size(); ++k) next[k] -= f * q[k];
    }
    p[i] = std::move(next);
  }
  return Polynomial(std::move(p[n]));
}

ComplexVector poly_roots(const Polynomial& p, double tol, int max_iter) {
  const int deg = p.degree();
  if (deg < 1) throw InvalidArgument("poly_roots: degree must be at least 1");
  const auto& a = p.coeffs();
  const Complex lead = a.back();
  if (deg == 1) return {-a[0] / lead};

  double bound = 0.0;
  for (int k = 0; k < deg; ++k) bound = std::max(bound, std::abs(a[k] / lead));
  const double radius = 1.0 + bound;

  ComplexVector z(deg);
  for (int k = 0; k < deg; ++k) {
    const double theta = 2.0 * std::numbers::pi * k / deg + 0.4;
    z[k] = std::polar(radius, theta);
  }

  std::vector<bool> done(deg, false);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool all_done = true;
    for (int k = 0; k < deg; ++k) {
      const auto [f, df] = p.eval_with_derivative(z[k]);
      if (std::abs(f) <= tol * p.scale(z[k])) {
        done[k] = true;
        continue;
      }
      done[k] = false;
      all_done = false;
      Complex repulsion = 0.0;
      for (int j = 0; j < deg; ++j) {
        if (j != k) repulsion += 1.0 / (z[k] - z[j]);
      }
      const Complex ratio = f / df;
      Complex step = ratio / (1.0 - ratio * repulsion);
      if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) step = ratio;
      z[k] -= step;
    }
    if (all_done) return z;
  }
  for (int k = 0; k < deg; ++k) {
    if (std::abs(p(z[k])) > tol * p.scale(z[k])) {
      throw RootsNotConverged("poly_roots: Aberth-Ehrlich iteration cap reached");
    }
  }
  return z;
}

ComplexVector polish_eigenvalues(const ComplexMatrix& a, ComplexVector w, int iterations) {
  const std::size_t n = a.size();
  const double scale = std::max(a.norm_inf(), std::numeric_limits<double>::min());
  for (int it = 0; it < iterations; ++it) {
    double largest_step = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      ComplexMatrix shifted = -1.0 * a;
      shifted.shift(w[k]);
      LuFactorization lu(shifted);
      if (lu.singular(1e-15)) continue;  // already an eigenvalue to working precision
      const Complex log_derivative = lu.solve(ComplexMatrix::identity(n)).trace();
      if (log_derivative == 0.0) continue;
      const Complex ratio = 1.0 / log_derivative;
      Complex repulsion = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j != k && w[j] != w[k]) repulsion += 1.0 / (w[k] - w[j]);
      }
      Complex step = ratio / (1.0 - ratio * repulsion);
      if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) step = ratio;
      w[k] -= step;
      largest_step = std::max(largest_step, std::abs(step));
    }
    if (largest_step <= 1e-16 * scale) break;
  }
  return w;
}

ComplexVector eigenvalues(const ComplexMatrix& a) {
  if (a.size() == 1) return {a(0, 0)};
  return polish_eigenvalues(a, poly_roots(char_poly(a)));
}

}  // namespace kpcm
