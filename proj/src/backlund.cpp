#include "kpcm/backlund.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kpcm/errors.hpp"

namespace kpcm {

namespace {

Complex coth(Complex z) { return std::cosh(z) / std::sinh(z); }

double solve_scale(const PhaseState& s, Complex mu) {
  return std::abs(mu) + static_cast<double>(s.size()) * std::abs(s.gamma) + norm_inf(s.p);
}

void require_apart(const PhaseState& s, std::span<const Complex> y) {
  const Complex g = s.gamma;
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (const auto x : s.x)
      if (std::abs(std::sinh(g * (x - y[i]))) < s.collision_guard)
        throw PoleCollision("Backlund iterate hit a source particle");
    for (std::size_t k = i + 1; k < y.size(); ++k)
      if (std::abs(std::sinh(g * (y[i] - y[k]))) < s.collision_guard)
        throw PoleCollision("Backlund iterates collide");
  }
}

// r_i = -mu + sg g sum_{k != i} coth(g x_ik) - sg g sum_k coth(g (x_i - u_k)) - p_i
// and its Jacobian in u: J_ik = -sg g^2 / sinh^2(g (x_i - u_k)).
// sg = +1 is the forward equation, sg = -1 the backward one.
ComplexVector residual(const PhaseState& s, std::span<const Complex> u, Complex mu, double sg) {
  const std::size_t n = s.size();
  const Complex g = s.gamma;
  ComplexVector r(n);
  for (std::size_t i = 0; i < n; ++i) {
    Complex acc = -mu - s.p[i];
    for (std::size_t k = 0; k < n; ++k) {
      if (k != i) acc += sg * g * coth(g * (s.x[i] - s.x[k]));
      acc -= sg * g * coth(g * (s.x[i] - u[k]));
    }
    r[i] = acc;
  }
  return r;
}

ComplexMatrix jacobian(const PhaseState& s, std::span<const Complex> u, double sg) {
  const std::size_t n = s.size();
  const Complex g = s.gamma;
  ComplexMatrix j(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      const Complex sh = std::sinh(g * (s.x[i] - u[k]));
      j(i, k) = -sg * g * g / (sh * sh);
    }
  return j;
}

// Momenta attached to the solved positions u:
// pu_i = -mu - sg g sum_{k != i} coth(g u_ik) + sg g sum_k coth(g (u_i - x_k)).
ComplexVector partner_momenta(const PhaseState& s, std::span<const Complex> u, Complex mu, double sg) {
  const std::size_t n = s.size();
  const Complex g = s.gamma;
  ComplexVector out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Complex acc = -mu;
    for (std::size_t k = 0; k < n; ++k) {
      if (k != i) acc -= sg * g * coth(g * (u[i] - u[k]));
      acc += sg * g * coth(g * (u[i] - s.x[k]));
    }
    out[i] = acc;
  }
  return out;
}

BacklundPair newton(const PhaseState& s, Complex mu, ComplexVector u, double sg) {
  require_regular(s);
  if (u.size() != s.size()) throw InvalidArgument("Newton seed has the wrong length");
  require_apart(s, u);
  const double tol = 1e-12 * solve_scale(s, mu);
  ComplexVector r = residual(s, u, mu, sg);
  double norm = norm_inf(r);
  int it = 0;
  while (norm > tol) {
    if (it >= 50) throw NewtonDivergence("Backlund Newton iteration did not converge in 50 steps");
    const LuFactorization lu(jacobian(s, u, sg));
    if (lu.singular()) throw NewtonDivergence("singular Jacobian in Backlund solve");
    const ComplexVector step = lu.solve(r);
    bool accepted = false;
    for (double t = 1.0; t >= 1e-10 && !accepted; t *= 0.5) {
      ComplexVector trial(u);
      for (std::size_t i = 0; i < u.size(); ++i) trial[i] -= t * step[i];
      ComplexVector rt = residual(s, trial, mu, sg);
      const double nt = norm_inf(rt);
      if (std::isfinite(nt) && nt < (1.0 - 1e-4 * t) * norm) {
        u = std::move(trial);
        r = std::move(rt);
        norm = nt;
        accepted = true;
      }
    }
    ++it;
    if (!accepted) {
      // the residual cannot drop further once it sits at rounding level
      if (norm <= 1e3 * tol) break;
      throw NewtonDivergence("line search failed in Backlund solve");
    }
    require_apart(s, u);
  }
  BacklundPair pair;
  pair.source = s;
  pair.target_p = partner_momenta(s, u, mu, sg);
  pair.target_y = std::move(u);
  pair.mu = mu;
  pair.iterations = it;
  pair.residual = norm;
  return pair;
}

}  // namespace

ComplexVector backlund_seed(const PhaseState& s, Complex mu) {
  ComplexVector y(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) y[i] = s.x[i] + 1.0 / mu - s.p[i] / (mu * mu);
  return y;
}

BacklundPair backlund_solve(const PhaseState& s, Complex mu, std::optional<ComplexVector> y_init) {
  if (mu == 0.0) throw InvalidArgument("mu must be nonzero");
  return newton(s, mu, y_init ? *y_init : backlund_seed(s, mu), 1.0);
}

BacklundPair backlund_solve_backward(const PhaseState& s, Complex mu, std::optional<ComplexVector> z_init) {
  if (mu == 0.0) throw InvalidArgument("mu must be nonzero");
  ComplexVector seed(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) seed[i] = s.x[i] - 1.0 / mu + s.p[i] / (mu * mu);
  return newton(s, mu, z_init ? *z_init : seed, -1.0);
}

Complex gen_function(std::span<const Complex> x, std::span<const Complex> y, Complex mu, Complex gamma) {
  if (x.size() != y.size() || x.empty()) throw InvalidArgument("gen_function needs equal nonempty x and y");
  const std::size_t n = x.size();
  Complex f = 0.0;
  auto logsinh = [&](Complex z) {
    const Complex sh = std::sinh(gamma * z);
    if (std::abs(sh) < kDefaultCollisionGuard) throw PoleCollision("gen_function at a singular point");
    return std::log(sh);
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) f += logsinh(x[i] - x[j]) + logsinh(y[i] - y[j]);
    for (std::size_t j = 0; j < n; ++j) f -= logsinh(x[i] - y[j]);
    f -= mu * (x[i] - y[i]);
  }
  return f;
}

std::pair<ComplexVector, ComplexVector> gen_function_gradient(std::span<const Complex> x, std::span<const Complex> y,
                                                              Complex mu, Complex gamma) {
  if (x.size() != y.size() || x.empty()) throw InvalidArgument("gen_function needs equal nonempty x and y");
  const std::size_t n = x.size();
  ComplexVector dx(n), dy(n);
  for (std::size_t i = 0; i < n; ++i) {
    Complex ax = -mu, ay = mu;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) {
        ax += gamma * coth(gamma * (x[i] - x[j]));
        ay += gamma * coth(gamma * (y[i] - y[j]));
      }
      ax -= gamma * coth(gamma * (x[i] - y[j]));
      ay += gamma * coth(gamma * (x[j] - y[i]));
    }
    dx[i] = ax;
    dy[i] = ay;
  }
  return {dx, dy};
}

double canonical_defect(const BacklundPair& pair) {
  const PhaseState& s = pair.source;
  require_apart(s, pair.target_y);
  const auto [dx, dy] = gen_function_gradient(s.x, pair.target_y, pair.mu, s.gamma);
  double out = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    out = std::max({out, std::abs(s.p[i] - dx[i]), std::abs(pair.target_p[i] + dy[i])});
  return out;
}

SchurOperatorTable schur_table(const PhaseState& s0, int order) {
  if (order < 1 || order > 4) throw InvalidArgument("Schur table order must be 1..4");
  require_regular(s0);
  const std::size_t n = s0.size();
  SchurOperatorTable t;
  t.order = order;
  t.forward.push_back(ComplexVector(n, Complex(-1.0)));
  t.backward.push_back(ComplexVector(n, Complex(1.0)));
  if (order >= 2) {
    t.forward.push_back(s0.p);
    ComplexVector minus(n);
    for (std::size_t i = 0; i < n; ++i) minus[i] = -s0.p[i];
    t.backward.push_back(minus);
  }
  if (order >= 3) {
    ComplexVector f = grad_p(s0, 3), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      f[i] /= 3.0;
      b[i] = -f[i];
    }
    t.forward.push_back(f);
    t.backward.push_back(b);
  }
  if (order >= 4) {
    const ComplexVector v4 = grad_p(s0, 4), acc = eom_accel(s0);
    ComplexVector f(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      f[i] = v4[i] / 4.0 + acc[i] / 8.0;
      b[i] = -v4[i] / 4.0 + acc[i] / 8.0;
    }
    t.forward.push_back(f);
    t.backward.push_back(b);
  }
  return t;
}

ComplexVector series_shift(const PhaseState& s, const SchurOperatorTable& table, Complex mu, int K, int sign) {
  if (K < 0 || K > table.order) throw InvalidArgument("series order exceeds the Schur table");
  if (sign != 1 && sign != -1) throw InvalidArgument("sign must be +1 or -1");
  const auto& actions = sign > 0 ? table.forward : table.backward;
  ComplexVector out(s.x);
  Complex power = 1.0;
  for (int k = 1; k <= K; ++k) {
    power /= mu;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += actions[k - 1][i] * power;
  }
  return out;
}

double expansion_defect(const PhaseState& s, Complex mu, int K) {
  const BacklundPair pair = backlund_solve(s, mu);
  const ComplexVector series = series_shift(s, schur_table(s, std::max(K, 1)), mu, K, -1);
  double out = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) out = std::max(out, std::abs(pair.target_y[i] - series[i]));
  return out;
}

double expansion_exponent(const PhaseState& s, int K, std::span<const double> mus) {
  if (mus.size() < 2) throw InvalidArgument("expansion_exponent: need at least two mu values");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const double mu : mus) {
    const double d = expansion_defect(s, mu, K);
    if (!(mu > 0.0) || !(d > 0.0)) throw InvalidArgument("expansion_exponent: mu and defects must be positive");
    const double lx = std::log(mu), ly = std::log(d);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = static_cast<double>(mus.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double subtracted_defect(const PhaseState& s, Complex mu) {
  const ComplexVector y = backlund_solve(s, mu).target_y;
  const ComplexVector z = backlund_solve_backward(s, mu).target_y;
  const Complex g = s.gamma;
  double out = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    Complex acc = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      acc += coth(g * (s.x[i] - y[k])) + coth(g * (s.x[i] - z[k]));
      if (k != i) acc -= 2.0 * coth(g * (s.x[i] - s.x[k]));
    }
    out = std::max(out, std::abs(acc));
  }
  return out;
}

std::pair<double, double> appendix_flow_check(const PhaseState& s) {
  require_regular(s);
  const std::size_t n = s.size();
  const Complex g = s.gamma;
  const ComplexVector v3 = grad_p(s, 3), v4 = grad_p(s, 4);
  double d3 = 0.0, d4 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Complex p = s.p[i];
    Complex t3 = -3.0 * p * p - g * g;
    Complex t4 = 4.0 * p * p * p + 4.0 * g * g * p;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const Complex sh = std::sinh(g * (s.x[i] - s.x[j]));
      const Complex cp = -g * g / (sh * sh);
      t3 -= 3.0 * cp;
      t4 += 4.0 * (2.0 * p + s.p[j]) * cp;
    }
    d3 = std::max(d3, std::abs(t3 - v3[i]));
    d4 = std::max(d4, std::abs(t4 - v4[i]));
  }
  return {d3, d4};
}

}  // namespace kpcm
