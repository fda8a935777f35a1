#include "kpcm/kp_tau.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "kpcm/errors.hpp"

namespace kpcm {

FlowMatrixSet build_flow_matrices(const PhaseState& s0, int k_max) {
  if (k_max < 1) throw InvalidArgument("k_max must be >= 1");
  FlowMatrixSet fm;
  fm.initial = s0;
  fm.lax0 = build_lax(s0);
  fm.w0 = build_w(s0);
  const std::size_t n = s0.size();
  ComplexMatrix plus = fm.lax0, minus = fm.lax0;
  plus.shift(s0.gamma);
  minus.shift(-s0.gamma);
  ComplexMatrix pp = ComplexMatrix::identity(n), pm = ComplexMatrix::identity(n);
  for (int k = 1; k <= k_max; ++k) {
    pp = pp * plus;
    pm = pm * minus;
    fm.generators.push_back(pp - pm);
  }
  return fm;
}

ComplexMatrix evolution_matrix(const FlowMatrixSet& fm, const HierarchyTimes& times) {
  const std::size_t n = fm.initial.size();
  ComplexMatrix sum(n);
  for (const auto& [k, t] : times.entries()) {
    if (k > fm.k_max()) throw InvalidArgument("time index " + std::to_string(k) + " exceeds the generator table");
    if (t == 0.0) continue;
    sum += Complex(t) * fm.generators[k - 1];
  }
  if (sum.norm_inf() > 100.0) throw InvalidArgument("||sum t_k calL_k|| exceeds 100");
  return mat_exp(-1.0 * sum);
}

Complex tau_from_roots(const PhaseState& s, Complex w) {
  validate(s);
  Complex out = 1.0;
  for (const auto x : s.x) out *= w - std::exp(2.0 * s.gamma * x);
  return out;
}

Complex tau_det(const FlowMatrixSet& fm, const HierarchyTimes& times, Complex w) {
  ComplexMatrix a = -1.0 * (evolution_matrix(fm, times) * fm.w0);
  a.shift(w);
  return det(a);
}

ComplexVector pole_weights(const FlowMatrixSet& fm, const HierarchyTimes& times) {
  return eigenvalues(evolution_matrix(fm, times) * fm.w0);
}

namespace {

struct Branch {
  Complex x;
  double distance;
  double runner_up;
};

// Nearest branch log(w)/(2g) + k i pi/g to the reference point.
Branch nearest_branch(Complex w, Complex gamma, Complex ref) {
  if (w == 0.0) throw EvaluationAtPole("zero pole weight has no logarithm");
  const Complex x0 = std::log(w) / (2.0 * gamma);
  const Complex period = Complex(0.0, std::numbers::pi) / gamma;
  const double k0 = std::floor(((ref - x0) / period).real());
  Branch b{x0, std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  for (double k = k0 - 1; k <= k0 + 2; k += 1.0) {
    const Complex cand = x0 + k * period;
    const double d = std::abs(cand - ref);
    if (d < b.distance) {
      b.runner_up = b.distance;
      b.distance = d;
      b.x = cand;
    } else if (d < b.runner_up) {
      b.runner_up = d;
    }
  }
  return b;
}

// Left (row) or right (column) eigenvector of a for the eigenvalue w by two
// steps of inverse iteration at a slightly perturbed shift.
ComplexVector eigenvector(const ComplexMatrix& a, Complex w, bool left) {
  const std::size_t n = a.size();
  ComplexMatrix shifted = -1.0 * a;
  const double nudge = 1e-10 * std::max(1.0, a.norm_inf());
  shifted.shift(w + Complex(nudge, nudge));
  const LuFactorization lu(shifted);
  ComplexVector v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = Complex(1.0, 0.1 * static_cast<double>(i));
  for (int it = 0; it < 3; ++it) {
    v = left ? lu.solve_transposed(v) : lu.solve(v);
    const double nv = norm_inf(v);
    if (!(nv > 0.0) || !std::isfinite(nv)) throw ConvergenceFailure("inverse iteration broke down");
    for (auto& c : v) c /= nv;
  }
  return v;
}

}  // namespace

ComplexVector poles_to_positions(std::span<const Complex> w, Complex gamma, std::span<const Complex> reference) {
  const std::size_t n = w.size();
  if (reference.size() != n) throw InvalidArgument("reference has the wrong length");
  std::vector<std::vector<Branch>> cost(n, std::vector<Branch>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cost[i][j] = nearest_branch(w[j], gamma, reference[i]);

  // assignment: particle i takes root perm[i]
  std::vector<std::size_t> perm(n), best;
  std::iota(perm.begin(), perm.end(), 0);
  if (n <= 8) {
    double best_total = std::numeric_limits<double>::infinity();
    do {
      double total = 0.0;
      for (std::size_t i = 0; i < n && total < best_total; ++i) total += cost[i][perm[i]].distance;
      if (total < best_total) {
        best_total = total;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    std::vector<bool> used(n, false);
    best.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t pick = n;
      for (std::size_t j = 0; j < n; ++j)
        if (!used[j] && (pick == n || cost[i][j].distance < cost[i][pick].distance)) pick = j;
      used[pick] = true;
      best[i] = pick;
    }
  }

  ComplexVector x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Branch& b = cost[i][best[i]];
    if (b.runner_up - b.distance < 1e-9)
      throw BranchAmbiguity("two branches of log(w) are equidistant from the reference for particle " +
                            std::to_string(i));
    x[i] = b.x;
  }
  return x;
}

ComplexVector poles_from_times(const FlowMatrixSet& fm, const HierarchyTimes& times,
                               std::optional<ComplexVector> reference) {
  const ComplexVector ref = reference ? *reference : fm.initial.x;
  return poles_to_positions(pole_weights(fm, times), fm.initial.gamma, ref);
}

namespace {

// Smallest distance between two positions, or between a position and its own
// image, on the cylinder x ~ x + i pi / g.
double label_gap(std::span<const Complex> x, Complex gamma) {
  const Complex period = Complex(0.0, std::numbers::pi) / gamma;
  double gap = std::abs(period);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const Complex d = x[i] - x[j];
      const double k = std::round((d / period).real());
      for (double dk = -1; dk <= 1; dk += 1.0) gap = std::min(gap, std::abs(d - (k + dk) * period));
    }
  return gap;
}

}  // namespace

ComplexVector track_poles(const FlowMatrixSet& fm, const HierarchyTimes& times, int substeps) {
  if (substeps < 1) throw InvalidArgument("substeps must be >= 1");
  auto at = [&](double frac, const ComplexVector& ref) {
    HierarchyTimes partial;
    for (const auto& [k, t] : times.entries()) partial.set(k, t * frac);
    return poles_from_times(fm, partial, ref);
  };
  // A step is kept when no particle moves more than a quarter of the gap to
  // its nearest neighbour; otherwise it is halved.
  const double min_step = 1.0 / (substeps * 1048576.0);
  ComplexVector ref = fm.initial.x;
  double frac = 0.0, step = 1.0 / substeps;
  while (frac < 1.0) {
    step = std::min(step, 1.0 - frac);
    ComplexVector next = at(frac + step, ref);
    double moved = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) moved = std::max(moved, std::abs(next[i] - ref[i]));
    if (moved > 0.25 * label_gap(ref, fm.initial.gamma) && step > min_step) {
      step *= 0.5;
      continue;
    }
    frac = step >= 1.0 - frac ? 1.0 : frac + step;
    ref = std::move(next);
    step = std::min(2.0 * step, 1.0 / substeps);
  }
  return ref;
}

PhaseState state_at_times(const FlowMatrixSet& fm, const HierarchyTimes& times, int substeps) {
  PhaseState s = fm.initial;
  s.x = track_poles(fm, times, substeps);
  const ComplexMatrix a = evolution_matrix(fm, times) * fm.w0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Complex w = std::exp(2.0 * s.gamma * s.x[i]);
    const ComplexVector left = eigenvector(a, w, true);
    const ComplexVector right = eigenvector(a, w, false);
    Complex num = 0.0, den = 0.0;
    const ComplexVector lr = fm.lax0 * right;
    for (std::size_t k = 0; k < s.size(); ++k) {
      num += left[k] * lr[k];
      den += left[k] * right[k];
    }
    s.p[i] = -num / den;
  }
  return s;
}

std::array<Complex, 5> u1_derivatives(const PhaseState& s, Complex xq) {
  validate(s);
  const Complex g = s.gamma;
  const Complex g2 = g * g;
  std::array<Complex, 5> u{};
  for (const auto xi : s.x) {
    const Complex y = g * (xq - xi);
    const Complex sh = std::sinh(y);
    if (std::abs(sh) < 1e-8) throw EvaluationAtPole("u1 evaluated at a pole");
    const Complex ch = std::cosh(y);
    const Complex s2 = sh * sh;
    const Complex inv2 = 1.0 / s2;
    const Complex inv3 = inv2 / sh;
    u[0] += -g2 * inv2;
    u[1] += 2.0 * g2 * g * ch * inv3;
    u[2] += -2.0 * g2 * g2 * (2.0 * s2 + 3.0) * inv2 * inv2;
    u[3] += 8.0 * g2 * g2 * g * ch * (s2 + 3.0) * inv3 * inv2;
    u[4] += -8.0 * g2 * g2 * g2 * (2.0 * s2 * s2 + 15.0 * s2 + 15.0) * inv2 * inv2 * inv2;
  }
  return u;
}

Complex u1_eval(const PhaseState& s, Complex xq) { return u1_derivatives(s, xq)[0]; }

ShiftFactors shift_factors(const PhaseState& s, Complex w, Complex lambda, Complex mu) {
  const ComplexMatrix l = build_lax(s);
  const ComplexVector h = w_half(s);
  const std::size_t n = s.size();
  const Complex g = s.gamma;

  ComplexVector d(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Complex wi = h[i] * h[i];
    if (std::abs(w - wi) < 1e-6 * std::max(1.0, std::abs(wi)))
      throw SingularLinearSystem("evaluation point too close to a pole of tau");
    d[i] = 1.0 / (w - wi);
  }

  auto resolvent = [&](Complex shift) {
    ComplexMatrix r = -1.0 * l;
    r.shift(shift);
    return inverse(r);
  };
  const ComplexMatrix r_l = resolvent(lambda + g);
  const ComplexMatrix r_m = resolvent(mu - g);

  // tr(A Et) with Et = W^{1/2} E W^{1/2} equals h^T A h.
  auto sandwich = [&](const ComplexMatrix& a) {
    Complex acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) acc += h[j] * a(j, i) * h[i];
    return acc;
  };
  auto scale_rows = [&](ComplexMatrix a, int power) {
    for (std::size_t i = 0; i < n; ++i) {
      const Complex f = power == 1 ? d[i] : d[i] * d[i];
      for (std::size_t j = 0; j < n; ++j) a(i, j) *= f;
    }
    return a;
  };
  auto scale_cols = [&](ComplexMatrix a) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) a(i, j) *= d[j];
    return a;
  };

  ShiftFactors f{};
  f.lambda = 1.0 + 2.0 * g * sandwich(scale_cols(r_l));
  f.mu_only = 1.0 - 2.0 * g * sandwich(scale_rows(r_m, 1));
  f.mu = mu;
  const ComplexMatrix rdr = r_l * scale_rows(r_m, 1);
  const ComplexMatrix rddr = r_l * scale_rows(r_m, 2);
  f.both = 1.0 - 2.0 * g * (lambda - mu) * sandwich(rdr);
  f.both_dx = 4.0 * g * g * (lambda - mu) * w * sandwich(rddr);
  return f;
}

Complex tau_shift(const FlowMatrixSet& fm, const HierarchyTimes& times, Complex w, std::optional<Complex> lambda,
                  std::optional<Complex> mu) {
  const Complex tau = tau_det(fm, times, w);
  if (!lambda && !mu) return tau;
  const PhaseState s = times.empty() ? fm.initial : state_at_times(fm, times);
  if (lambda && mu) return tau * shift_factors(s, w, *lambda, *mu).both;
  if (lambda) return tau * shift_factors(s, w, *lambda, *lambda).lambda;
  return tau * shift_factors(s, w, *mu, *mu).mu_only;
}

Complex tau_shift_truncated(const FlowMatrixSet& fm, const HierarchyTimes& times, Complex w,
                            std::optional<Complex> lambda, std::optional<Complex> mu, int terms) {
  if (terms < 1 || terms > fm.k_max()) throw InvalidArgument("shift truncation outside the generator table");
  // the shifted times are complex, so the generator sum is assembled here rather than via HierarchyTimes
  const std::size_t n = fm.initial.size();
  ComplexMatrix sum(n);
  for (const auto& [k, t] : times.entries()) sum += Complex(t) * fm.generators[k - 1];
  for (int k = 1; k <= terms; ++k) {
    Complex dt = 0.0;
    if (lambda) dt += std::pow(*lambda, -k) / static_cast<double>(k);
    if (mu) dt -= std::pow(*mu, -k) / static_cast<double>(k);
    sum += dt * fm.generators[k - 1];
  }
  ComplexMatrix a = -1.0 * (mat_exp(-1.0 * sum) * fm.w0);
  a.shift(w);
  return det(a);
}

BilinearResult bilinear_residual(const PhaseState& s, Complex w, Complex lambda, Complex mu) {
  const ShiftFactors f = shift_factors(s, w, lambda, mu);
  const Complex rhs = (lambda - mu) * (f.both - f.lambda * f.mu_only);
  const double scale = std::abs(f.both_dx) + std::abs(lambda - mu) * (std::abs(f.both) + std::abs(f.lambda * f.mu_only));
  return {f.both_dx - rhs, std::max(scale, std::numeric_limits<double>::min())};
}

BilinearResult bilinear_residual(const FlowMatrixSet& fm, const HierarchyTimes& times, Complex w, Complex lambda,
                                 Complex mu) {
  const PhaseState s = times.empty() ? fm.initial : state_at_times(fm, times);
  return bilinear_residual(s, w, lambda, mu);
}

WaveCoeffs wave_coeffs(const PhaseState& s, Complex z) {
  const ComplexMatrix l = build_lax(s);
  const ComplexVector h = w_half(s);
  ComplexMatrix minus = -1.0 * l, plus = -1.0 * l;
  minus.shift(z - s.gamma);
  plus.shift(z + s.gamma);
  const LuFactorization lm(minus), lp(plus);
  if (lm.singular(1e-10) || lp.singular(1e-10))
    throw SingularLinearSystem("spectral parameter too close to spec(L +- gamma)");
  WaveCoeffs c{z, lm.solve(h), lp.solve_transposed(h)};
  for (auto& v : c.c_tilde) v = -v;
  return c;
}

double wave_evolution_defect(const PhaseState& s, Complex z, double h) {
  if (!(h >= 1e-6 && h <= 1e-3)) throw InvalidArgument("wave_evolution_defect needs h in [1e-6, 1e-3]");
  const double rtol = 1e-13;
  auto coeffs_at = [&](double t) { return wave_coeffs(integrate(s, 2, t, rtol).samples.back().state, z).c_tilde; };
  const ComplexVector p1 = coeffs_at(h), p2 = coeffs_at(2 * h), m1 = coeffs_at(-h), m2 = coeffs_at(-2 * h);
  const ComplexVector c0 = wave_coeffs(s, z).c_tilde;
  const ComplexVector mc = build_m(s) * c0;
  double out = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Complex dc = (-p2[i] + 8.0 * p1[i] - 8.0 * m1[i] + m2[i]) / (12.0 * h);
    out = std::max(out, std::abs(dc - mc[i]));
  }
  return out;
}

double residue_identity_defect(const FlowMatrixSet& fm, int m, double h) {
  if (m < 1 || m > fm.k_max()) throw InvalidArgument("flow index outside the generator table");
  if (!(h > 0.0)) throw InvalidArgument("step must be positive");
  auto poles_at = [&](double t) {
    HierarchyTimes times;
    times.set(m, t);
    return poles_from_times(fm, times);
  };
  const ComplexVector p1 = poles_at(h), p2 = poles_at(2 * h), m1 = poles_at(-h), m2 = poles_at(-2 * h);
  const ComplexVector g = grad_p(fm.initial, m);
  double out = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Complex dx = (-p2[i] + 8.0 * p1[i] - 8.0 * m1[i] + m2[i]) / (12.0 * h);
    out = std::max(out, std::abs(dx - g[i]));
  }
  return out;
}

double contour_min_radius(const PhaseState& s) {
  double r = 0.0;
  for (const auto e : eigenvalues(build_lax(s))) r = std::max(r, std::abs(e));
  return r + std::abs(s.gamma) + 1.0;
}

ComplexVector contour_residue(const PhaseState& s, int m, double radius, int nodes) {
  if (m < 0) throw InvalidArgument("contour_residue needs m >= 0");
  if (nodes < 64) throw InvalidArgument("contour_residue needs at least 64 nodes");
  if (!(radius > contour_min_radius(s))) throw InvalidArgument("contour radius does not enclose the spectrum");
  const std::size_t n = s.size();
  const ComplexVector h = w_half(s);
  ComplexVector acc(n);
  for (int q = 0; q < nodes; ++q) {
    const Complex z = std::polar(radius, 2.0 * std::numbers::pi * (q + 0.5) / nodes);
    const WaveCoeffs c = wave_coeffs(s, z);
    const Complex weight = std::pow(z, m + 1);
    for (std::size_t i = 0; i < n; ++i) acc[i] += weight * c.c_tilde_star[i] * c.c_tilde[i] / (h[i] * h[i]);
  }
  for (auto& v : acc) v /= static_cast<double>(nodes);
  return acc;
}

KpResidual kp_residual(const FlowMatrixSet& fm, const HierarchyTimes& base_times, Complex xq, double h) {
  if (!(h >= 1e-4 && h <= 1e-2)) throw InvalidArgument("kp_residual needs h in [1e-4, 1e-2]");
  const Complex g = fm.initial.gamma;
  auto derivs = [&](double d2, double d3) {
    HierarchyTimes t = base_times;
    t.set(2, base_times.get(2) + d2);
    t.set(3, base_times.get(3) + d3);
    // u is a symmetric, i pi/g periodic function of the poles, so neither the
    // labelling nor the branch of the logarithm matters here
    PhaseState s = fm.initial;
    const ComplexVector w = pole_weights(fm, t);
    for (std::size_t i = 0; i < w.size(); ++i) s.x[i] = std::log(w[i]) / (2.0 * g);
    return u1_derivatives(s, xq);
  };
  const auto c = derivs(0.0, 0.0);
  const auto t2p = derivs(h, 0.0), t2m = derivs(-h, 0.0);
  const auto t3p = derivs(0.0, h), t3m = derivs(0.0, -h);

  const Complex u_t2t2 = (t2p[0] - 2.0 * c[0] + t2m[0]) / (h * h);
  const Complex u_t3x = (t3p[1] - t3m[1]) / (2.0 * h);
  const Complex terms[] = {3.0 * u_t2t2, -4.0 * u_t3x, 12.0 * c[1] * c[1], 12.0 * c[0] * c[2], c[4]};
  KpResidual r{0.0, 0.0};
  for (const auto t : terms) {
    r.residual += t;
    r.scale = std::max(r.scale, std::abs(t));
  }
  return r;
}

double rank_one_defect(const ComplexMatrix& lax, const ComplexMatrix& w, Complex gamma) {
  const std::size_t n = lax.size();
  ComplexMatrix z = lax, y = lax;
  z.shift(-gamma);
  y.shift(gamma);
  const ComplexMatrix c = (-1.0 * w) * z - y * (-1.0 * w);
  const double top = c.max_abs();
  if (top == 0.0 || n < 2) return 0.0;
  double minor = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = i + 1; k < n; ++k)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t l = j + 1; l < n; ++l)
          minor = std::max(minor, std::abs(c(i, j) * c(k, l) - c(i, l) * c(k, j)));
  return minor / top;
}

double rank_one_defect(const PhaseState& s) { return rank_one_defect(build_lax(s), build_w(s), s.gamma); }

}  // namespace kpcm
