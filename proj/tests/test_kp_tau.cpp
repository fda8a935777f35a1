#include <cmath>
#include <numbers>

#include "doctest.h"
#include "kpcm/ensemble.hpp"
#include "kpcm/errors.hpp"
#include "kpcm/kp_tau.hpp"
#include "test_support.hpp"

using namespace kpcm;
using kpcm::testing::matched_distance;
using kpcm::testing::max_diff;

namespace {

PhaseState single(Complex x, Complex p, Complex gamma = 1.0) {
  PhaseState s;
  s.gamma = gamma;
  s.x = {x};
  s.p = {p};
  return s;
}

const Complex kGammas[] = {Complex(1.0, 0.0), Complex(0.5, 0.0), Complex(0.0, 1.0)};

// A point of the w-plane away from every pole weight of s.
Complex off_pole_w(std::mt19937_64& rng, const PhaseState& s) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (;;) {
    const Complex w(u(rng), u(rng));
    bool ok = true;
    for (const auto x : s.x) ok = ok && std::abs(w - std::exp(2.0 * s.gamma * x)) > 0.1;
    if (ok) return w;
  }
}

}  // namespace

TEST_CASE("tau_from_roots examples") {
  CHECK(std::abs(tau_from_roots(single(0.0, 0.0), 2.0) - 1.0) == 0.0);
  PhaseState s;
  s.gamma = 1.0;
  s.x = {0.0, 1.0};
  s.p = {0.0, 0.0};
  CHECK(std::abs(tau_from_roots(s, 0.0) - 7.389056) < 1e-6);
  CHECK(std::abs(tau_from_roots(s, std::exp(2.0))) < 1e-15);
}

TEST_CASE("tau_det examples") {
  std::mt19937_64 rng(1);
  for (const auto g : kGammas) {
    const auto s = random_state(rng, 4, g);
    const auto fm = build_flow_matrices(s);
    CHECK(max_diff(fm.generators[0], 2.0 * g * ComplexMatrix::identity(4)) < 1e-14);
    for (int k = 0; k < 20; ++k) {
      const Complex w = off_pole_w(rng, s);
      const Complex a = tau_det(fm, {}, w), b = tau_from_roots(s, w);
      double scale = 1.0;
      for (const auto x : s.x) scale *= std::abs(w) + std::abs(std::exp(2.0 * g * x));
      CHECK(std::abs(a - b) <= 1e-12 * scale);
    }
  }
  const auto fm1 = build_flow_matrices(single(0.0, 0.0));
  CHECK(std::abs(tau_det(fm1, {{3, 0.1}}, 0.7) - (0.7 - std::exp(-0.2))) < 1e-15);
  for (const double t : {0.1, -0.4, 2.0}) CHECK(std::abs(tau_det(fm1, {{2, t}}, 0.3) - (0.3 - 1.0)) < 1e-15);
  CHECK_THROWS_AS(tau_det(fm1, {{3, 1e3}}, 0.3), InvalidArgument);
}

TEST_CASE("poles_from_times examples") {
  std::mt19937_64 rng(2);
  const auto s = random_state(rng, 3, Complex(0.0, 2.0));
  const auto fm = build_flow_matrices(s);
  CHECK(max_diff(poles_from_times(fm, {}), s.x) < 1e-12);
  const auto shifted = poles_from_times(fm, {{1, 0.3}});
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(shifted[i] - (s.x[i] - 0.3)) < 1e-12);

  const auto fm1 = build_flow_matrices(single(0.0, 0.0));
  CHECK(std::abs(poles_from_times(fm1, {{3, 0.1}})[0] + 0.1) < 1e-15);
}

TEST_CASE("poles_to_positions: labels, branches and ambiguity") {
  const Complex g = 1.0;
  const ComplexVector ref{0.0, Complex(1.0, 0.2)};
  // roots given in swapped order and on shifted branches
  const ComplexVector w{std::exp(2.0 * g * ref[1]), std::exp(2.0 * g * ref[0])};
  const auto x = poles_to_positions(w, g, ref);
  CHECK(max_diff(x, ref) < 1e-14);
  // reference half a period away from the root is ambiguous
  const ComplexVector mid{Complex(0.0, std::numbers::pi / 2)};
  const ComplexVector one{1.0};
  CHECK_THROWS_AS(poles_to_positions(one, g, mid), BranchAmbiguity);
  // a reference one full period away picks the shifted branch
  const ComplexVector far{Complex(0.0, std::numbers::pi)};
  CHECK(std::abs(poles_to_positions(one, g, far)[0] - far[0]) < 1e-15);
}

TEST_CASE("determinant oracle matches the integrated flows") {
  std::mt19937_64 rng(3);
  for (const auto g : kGammas)
    for (int m = 1; m <= 4; ++m) {
      const auto s = random_state(rng, 4, g);
      const double t = m <= 2 ? 0.4 : 0.15;
      const auto fm = build_flow_matrices(s);
      const HierarchyTimes times{{m, t}};
      PhaseState end;
      try {
        end = integrate(s, m, t, 1e-12).samples.back().state;
      } catch (const DynamicsError&) {
        continue;
      }
      const auto poles = track_poles(fm, times);
      CHECK(max_diff(poles, end.x) <= (m == 1 ? 1e-12 : 1e-7));
      const auto oracle = state_at_times(fm, times);
      CHECK(max_diff(oracle.p, end.p) <= 1e-7);
    }
}

TEST_CASE("u1: scalar value, periodicity and the log-tau second derivative") {
  const auto s1 = single(0.0, 0.0);
  CHECK(std::abs(u1_eval(s1, 1.0) + 1.0 / std::pow(std::sinh(1.0), 2)) < 1e-15);
  CHECK(std::abs(u1_eval(s1, 1.0) + 0.724062) < 1e-6);
  CHECK_THROWS_AS(u1_eval(s1, 1e-10), EvaluationAtPole);

  std::mt19937_64 rng(4);
  for (const auto g : kGammas) {
    const auto s = random_state(rng, 3, g);
    const Complex xq = (Complex(0.3, 0.0) + Complex(0.0, std::numbers::pi / 2)) / g;
    const Complex period = Complex(0.0, std::numbers::pi) / g;
    CHECK(std::abs(u1_eval(s, xq + period) - u1_eval(s, xq)) < 1e-12 * (1.0 + std::abs(u1_eval(s, xq))));

    // u = d^2/dx^2 log tau with w = exp(2 g x)
    auto log_tau = [&](Complex x) { return std::log(tau_from_roots(s, std::exp(2.0 * g * x))); };
    const double h = 1e-4;
    const Complex fd = (log_tau(xq + h) - 2.0 * log_tau(xq) + log_tau(xq - h)) / (h * h);
    CHECK(std::abs(fd - u1_eval(s, xq)) < 1e-6 * std::max(1.0, std::abs(u1_eval(s, xq))));

    // closed-form x-derivatives against central differences
    const auto d = u1_derivatives(s, xq);
    const double e = 1e-4;
    for (int k = 0; k < 4; ++k) {
      const Complex fdk = (u1_derivatives(s, xq + e)[k] - u1_derivatives(s, xq - e)[k]) / (2 * e);
      CHECK(std::abs(fdk - d[k + 1]) < 1e-6 * std::max(1.0, std::abs(d[k + 1])));
    }
  }
}

TEST_CASE("shift factors: scalar form and limits") {
  const Complex g = 1.0, p = 0.3, x = 0.2, w = 0.5, lambda = 4.0;
  const auto s = single(x, p, g);
  const Complex w1 = std::exp(2.0 * g * x);
  const auto f = shift_factors(s, w, lambda, 7.0);
  CHECK(std::abs(f.lambda - (1.0 + 2.0 * g * w1 / ((lambda + g + p) * (w - w1)))) < 1e-14);
  CHECK(std::abs(shift_factors(s, w, 1e12, 7.0).lambda - 1.0) < 1e-10);
  CHECK(std::abs(shift_factors(s, w, 3.0, 3.0).both - 1.0) == 0.0);
  CHECK_THROWS_AS(shift_factors(s, w1, lambda, 7.0), SingularLinearSystem);
}

TEST_CASE("shift factors agree with exact determinants at shifted times") {
  // exp(-sum_k lambda^-k calL_k / k) = ((l - g) - L0)((l + g) - L0)^{-1}, so at t = 0 the shifted
  // tau is det(wI - S W0) exactly; the 12-term truncation is checked too.
  std::mt19937_64 rng(5);
  for (const auto g : kGammas) {
    const auto s = random_state(rng, 3, g);
    const auto fm = build_flow_matrices(s);
    const Complex w = off_pole_w(rng, s);
    const Complex lambda(12.0, 3.0), mu(-11.0, 5.0);
    const Complex exact_l = tau_shift(fm, {}, w, lambda, std::nullopt);
    const Complex trunc_l = tau_shift_truncated(fm, {}, w, lambda, std::nullopt, 12);
    CHECK(std::abs(exact_l - trunc_l) <= 1e-6 * std::abs(exact_l));
    auto num = -1.0 * fm.lax0, den = -1.0 * fm.lax0;
    num.shift(lambda - g);
    den.shift(lambda + g);
    auto shifted = -1.0 * (num * inverse(den) * fm.w0);
    shifted.shift(w);
    CHECK(std::abs(exact_l - det(shifted)) <= 1e-12 * std::abs(exact_l));
    const Complex exact_m = tau_shift(fm, {}, w, std::nullopt, mu);
    const Complex trunc_m = tau_shift_truncated(fm, {}, w, std::nullopt, mu, 12);
    CHECK(std::abs(exact_m - trunc_m) <= 1e-6 * std::abs(exact_m));
    const Complex exact_b = tau_shift(fm, {}, w, lambda, mu);
    const Complex trunc_b = tau_shift_truncated(fm, {}, w, lambda, mu, 12);
    CHECK(std::abs(exact_b - trunc_b) <= 1e-6 * std::abs(exact_b));

    // the same at an evolved time, where L and W come from the conjugated state
    const HierarchyTimes t{{2, 0.2}};
    const Complex at_t = tau_shift(fm, t, w, lambda, mu);
    const Complex at_t_trunc = tau_shift_truncated(fm, t, w, lambda, mu, 12);
    CHECK(std::abs(at_t - at_t_trunc) <= 1e-6 * std::abs(at_t));
  }
}

TEST_CASE("bilinear identity") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-6.0, 6.0);
  for (const auto g : kGammas)
    for (std::size_t n = 1; n <= 5; ++n) {
      const auto s = random_state(rng, n, g);
      for (int k = 0; k < 10; ++k) {
        const Complex lambda(u(rng), u(rng)), mu(u(rng), u(rng));
        const Complex w = off_pole_w(rng, s);
        BilinearResult r;
        try {
          r = bilinear_residual(s, w, lambda, mu);
        } catch (const SingularLinearSystem&) {
          continue;
        }
        CHECK(std::abs(r.residual) <= 1e-10 * r.scale);
      }
      const auto same = bilinear_residual(s, off_pole_w(rng, s), 2.5, 2.5);
      CHECK(std::abs(same.residual) <= 1e-10 * std::max(1.0, same.scale));
    }
  const auto s = random_state(rng, 3, 1.0);
  const auto fm = build_flow_matrices(s);
  const auto r = bilinear_residual(fm, {{2, 0.1}, {3, -0.05}}, off_pole_w(rng, s), Complex(3, 1), Complex(-2, 2));
  CHECK(std::abs(r.residual) <= 1e-10 * r.scale);
}

TEST_CASE("wave coefficients") {
  const auto c = wave_coeffs(single(0.0, 0.0), 3.0);
  CHECK(std::abs(c.c_tilde[0] + 0.5) < 1e-15);
  std::mt19937_64 rng(7);
  const auto s = random_state(rng, 4, Complex(0.0, 1.0));
  const Complex z(2.0, 1.5);
  const auto wc = wave_coeffs(s, z);
  auto a = -1.0 * build_lax(s);
  a.shift(z - s.gamma);
  const auto lhs = a * wc.c_tilde;
  const auto h = w_half(s);
  double res = 0.0;
  for (std::size_t i = 0; i < 4; ++i) res = std::max(res, std::abs(lhs[i] + h[i]));
  CHECK(res <= 1e-12);
  const Complex big(1e6, 0.0);
  const auto far = wave_coeffs(s, big);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(far.c_tilde[i] + h[i] / big) < 1e-5 * std::abs(h[i] / big));  // O(1/z) relative remainder

  PhaseState one = single(0.0, 0.5);
  CHECK_THROWS_AS(wave_coeffs(one, 1.0 - 0.5), SingularLinearSystem);
}

TEST_CASE("wave coefficients evolve with M") {
  std::mt19937_64 rng(8);
  CHECK(wave_evolution_defect(single(0.1, 0.4), 2.5, 1e-4) <= 1e-6);
  for (const auto g : kGammas) {
    const auto s = random_state(rng, 3, g);
    CHECK(wave_evolution_defect(s, Complex(2.0, 1.0), 1e-4) <= 1e-6);
  }
}

TEST_CASE("residue identity: pole velocities") {
  const auto fm1 = build_flow_matrices(single(0.0, 0.0));
  CHECK(residue_identity_defect(fm1, 1, 1e-5) < 1e-9);
  CHECK(residue_identity_defect(fm1, 3, 1e-5) < 1e-8);
  std::mt19937_64 rng(9);
  for (const auto g : kGammas)
    for (int m = 1; m <= 4; ++m) {
      const auto s = random_state(rng, 3, g);
      const auto fm = build_flow_matrices(s);
      const double scale = std::max(1.0, norm_inf(grad_p(s, m)));
      CHECK(residue_identity_defect(fm, m, 1e-5) <= 1e-7 * scale);
    }
}

TEST_CASE("contour residue") {
  const auto s1 = single(0.0, 0.3);
  for (int m = 0; m <= 3; ++m) {
    const auto r = contour_residue(s1, m, 4.0, 256);
    const Complex expected = m == 0 ? Complex(0.0) : grad_p(s1, m)[0];
    CHECK(std::abs(r[0] - expected) < 1e-9);
  }
  std::mt19937_64 rng(10);
  for (const auto g : kGammas) {
    const auto s = random_state(rng, 4, g);
    const double r0 = contour_min_radius(s);
    for (int m = 1; m <= 3; ++m) {
      const auto a = contour_residue(s, m, r0 + 0.5, 512);
      const auto b = contour_residue(s, m, 2.0 * r0, 512);
      CHECK(max_diff(a, grad_p(s, m)) < 1e-9);
      CHECK(max_diff(a, b) < 1e-9);
    }
  }
  CHECK_THROWS_AS(contour_residue(s1, 1, 0.5, 256), InvalidArgument);
  CHECK_THROWS_AS(contour_residue(s1, 1, 4.0, 16), InvalidArgument);
}

TEST_CASE("KP equation residual") {
  const auto fm1 = build_flow_matrices(single(0.0, 0.0));
  const Complex xq1(0.4, std::numbers::pi / 2);
  CHECK(std::abs(kp_residual(fm1, {}, xq1, 1e-3).residual) <= 1e-6);

  std::mt19937_64 rng(11);
  for (const Complex g : {Complex(1.0, 0.0), Complex(0.0, 1.0)})
    for (std::size_t n = 1; n <= 3; ++n) {
      const auto s = random_state(rng, n, g);
      const auto fm = build_flow_matrices(s);
      const Complex xq = Complex(0.2, std::numbers::pi / 2) / g;
      const auto r1 = kp_residual(fm, {}, xq, 1e-3);
      const auto r2 = kp_residual(fm, {}, xq, 5e-4);
      CHECK(std::abs(r1.residual) <= 1e-4 * r1.scale);
      CHECK(std::abs(r1.residual) >= 3.0 * std::abs(r2.residual));
    }
}

TEST_CASE("rank one condition") {
  CHECK(rank_one_defect(single(0.0, 1.0)) == 0.0);
  std::mt19937_64 rng(12);
  for (const auto g : kGammas) {
    const auto s = random_state(rng, 4, g);
    CHECK(rank_one_defect(s) <= 1e-12);
    auto l = build_lax(s);
    l(0, 1) += 1.0;
    CHECK(rank_one_defect(l, build_w(s), s.gamma) >= 0.1);
  }
}
