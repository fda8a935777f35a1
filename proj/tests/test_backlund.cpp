#include <cmath>

#include "doctest.h"
#include "kpcm/backlund.hpp"
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

double scale_of(const PhaseState& s, Complex mu) {
  return std::abs(mu) + static_cast<double>(s.size()) * std::abs(s.gamma) + norm_inf(s.p);
}

}  // namespace

TEST_CASE("scalar Backlund solve") {
  const auto s = single(0.0, 0.0);
  const auto pair = backlund_solve(s, -2.0);
  CHECK(std::abs(pair.target_y[0] + 0.5 * std::log(3.0)) < 1e-13);
  CHECK(std::abs(pair.target_y[0] + 0.549306) < 1e-6);
  CHECK(std::abs(pair.target_p[0]) < 1e-12);
  CHECK(pair.residual <= 1e-12);

  // p = 0 single particle: y - x = arccoth(mu / g) / g
  const auto s2 = single(0.3, 0.0, 0.5);
  const Complex mu = 7.0, g = 0.5;
  const auto p2 = backlund_solve(s2, mu);
  CHECK(std::abs(p2.target_y[0] - 0.3 - std::atanh(g / mu) / g) < 1e-13);
  CHECK_THROWS_AS(backlund_solve(s2, 0.0), InvalidArgument);
}

TEST_CASE("Backlund solution re-substitutes into both equation sets") {
  std::mt19937_64 rng(1);
  for (const auto g : kGammas)
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto s = random_state(rng, n, g);
      const Complex mu(9.0, 2.0);
      const auto pair = backlund_solve(s, mu);
      for (std::size_t i = 0; i < n; ++i) {
        Complex r1 = -mu, r2 = -mu;
        for (std::size_t k = 0; k < n; ++k) {
          const auto coth = [](Complex z) { return std::cosh(z) / std::sinh(z); };
          if (k != i) {
            r1 += g * coth(g * (s.x[i] - s.x[k]));
            r2 -= g * coth(g * (pair.target_y[i] - pair.target_y[k]));
          }
          r1 -= g * coth(g * (s.x[i] - pair.target_y[k]));
          r2 += g * coth(g * (pair.target_y[i] - s.x[k]));
        }
        CHECK(std::abs(r1 - s.p[i]) <= 1e-12 * scale_of(s, mu));
        CHECK(std::abs(r2 - pair.target_p[i]) <= 1e-12 * scale_of(s, mu));
      }
    }
}

TEST_CASE("large mu: y is close to x + 1/mu") {
  std::mt19937_64 rng(2);
  const auto s = random_state(rng, 3, 1.0);
  const Complex mu = 200.0;
  const auto pair = backlund_solve(s, mu);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(pair.target_y[i] - s.x[i] - 1.0 / mu) < 1e-4);
}

TEST_CASE("forward and backward solves are the -[1/mu] and +[1/mu] shifts of the poles") {
  // exp(-D(mu)) x are the poles at times t_k = -mu^-k / k, whose evolution matrix is
  // ((mu + g) - L)((mu - g) - L)^{-1}; exp(D(mu)) x use ((mu - g) - L)((mu + g) - L)^{-1}.
  std::mt19937_64 rng(3);
  for (const auto g : kGammas)
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto s = random_state(rng, n, g);
      const Complex mu(8.0, -3.0);
      const auto l = build_lax(s);
      auto a = -1.0 * l, b = -1.0 * l;
      a.shift(mu + g);
      b.shift(mu - g);
      const auto w = build_w(s);
      const auto back_shift = eigenvalues(a * inverse(b) * w);
      const auto fwd_shift = eigenvalues(b * inverse(a) * w);
      const auto y = backlund_solve(s, mu).target_y;
      const auto z = backlund_solve_backward(s, mu).target_y;
      ComplexVector wy(n), wz(n);
      for (std::size_t i = 0; i < n; ++i) {
        wy[i] = std::exp(2.0 * g * y[i]);
        wz[i] = std::exp(2.0 * g * z[i]);
      }
      CHECK(matched_distance(wy, back_shift) < 1e-10 * std::max(1.0, norm_inf(wy)));
      CHECK(matched_distance(wz, fwd_shift) < 1e-10 * std::max(1.0, norm_inf(wz)));
    }
}

TEST_CASE("generating function") {
  const ComplexVector x{0.3}, y{-0.2};
  const Complex mu = 1.7, g = 1.0;
  CHECK(std::abs(gen_function(x, y, mu, g) - (-std::log(std::sinh(0.5)) - mu * 0.5)) < 1e-15);

  const auto s = single(0.0, 0.0);
  const auto pair = backlund_solve(s, -2.0);
  CHECK(std::abs(gen_function_gradient(s.x, pair.target_y, -2.0, 1.0).first[0]) < 1e-12);

  std::mt19937_64 rng(4);
  for (const auto gam : kGammas) {
    const auto r = random_state(rng, 3, gam);
    const auto q = backlund_solve(r, Complex(6.0, 1.0));
    const Complex c(0.37, 0.11);
    ComplexVector xs(r.x), ys(q.target_y);
    for (auto& v : xs) v += c;
    for (auto& v : ys) v += c;
    const Complex f0 = gen_function(r.x, q.target_y, q.mu, gam);
    CHECK(std::abs(std::exp(gen_function(xs, ys, q.mu, gam) - f0) - 1.0) < 1e-12);  // equal up to 2 pi i branches

    const auto [dx, dy] = gen_function_gradient(r.x, q.target_y, q.mu, gam);
    const double h = 1e-6;
    for (std::size_t i = 0; i < 3; ++i) {
      ComplexVector a(r.x), b(r.x);
      a[i] += h;
      b[i] -= h;
      const Complex fdx = (gen_function(a, q.target_y, q.mu, gam) - gen_function(b, q.target_y, q.mu, gam)) / (2 * h);
      CHECK(std::abs(fdx - dx[i]) < 1e-7 * std::max(1.0, std::abs(dx[i])));
      ComplexVector c1(q.target_y), c2(q.target_y);
      c1[i] += h;
      c2[i] -= h;
      const Complex fdy = (gen_function(r.x, c1, q.mu, gam) - gen_function(r.x, c2, q.mu, gam)) / (2 * h);
      CHECK(std::abs(fdy - dy[i]) < 1e-7 * std::max(1.0, std::abs(dy[i])));
    }
  }
}

TEST_CASE("canonical defect") {
  CHECK(canonical_defect(backlund_solve(single(0.0, 0.0), -2.0)) <= 1e-12);
  std::mt19937_64 rng(5);
  for (const auto g : kGammas) {
    const auto s = random_state(rng, 3, g);
    const Complex mu(-7.0, 4.0);
    auto pair = backlund_solve(s, mu);
    CHECK(canonical_defect(pair) <= 1e-10 * scale_of(s, mu));
    pair.target_y[0] += 0.1;
    CHECK(canonical_defect(pair) >= 1e-3);
  }
}

TEST_CASE("Schur table") {
  std::mt19937_64 rng(6);
  const auto s = random_state(rng, 4, Complex(0.0, 1.0));
  const auto t = schur_table(s);
  REQUIRE(t.order == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(t.forward[0][i] == Complex(-1.0));
    CHECK(t.forward[1][i] == s.p[i]);
    CHECK(t.backward[0][i] == Complex(1.0));
    CHECK(t.backward[1][i] == -s.p[i]);
  }
  const auto t1 = schur_table(single(0.0, 0.0));
  CHECK(std::abs(t1.forward[2][0] + 1.0 / 3.0) < 1e-15);
  CHECK(std::abs(t1.forward[3][0]) < 1e-15);
  CHECK_THROWS_AS(schur_table(s, 5), InvalidArgument);
}

TEST_CASE("Backlund shift matches the Schur series order by order") {
  // dilute states, skipping draws whose leading remainder coefficient h_{K+1}x is degenerate
  std::mt19937_64 rng(7);
  const double mus[] = {10.0, 20.0, 40.0};
  EnsembleOptions opts;
  opts.spacing = 1.6;
  int fitted = 0;
  for (const auto g : kGammas)
    for (std::size_t n = 1; n <= 4; ++n)
      for (int draw = 0; draw < 3; ++draw) {
        const auto s = random_state(rng, n, g, opts);
        const auto table = schur_table(s);
        for (int K = 1; K <= 3; ++K) {
          if (norm_inf(table.forward[K]) < 0.25 * std::pow(std::abs(g), K)) continue;
          ++fitted;
          CHECK(std::abs(expansion_exponent(s, K, mus) + (K + 1)) <= 0.3);
        }
        CHECK(expansion_defect(s, 20.0, 4) < expansion_defect(s, 20.0, 3));
      }
  CHECK(fitted >= 60);
  // single particle at rest: only odd orders survive, the K = 3 series is good to O(mu^-5)
  const auto s1 = single(0.0, 0.0);
  const double a = expansion_defect(s1, 20.0, 3), b = expansion_defect(s1, 40.0, 3);
  CHECK(std::log(a / b) / std::log(2.0) > 4.7);
}

TEST_CASE("subtracted equation") {
  std::mt19937_64 rng(8);
  for (const auto g : kGammas)
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto s = random_state(rng, n, g);
      const Complex mu(12.0, 5.0);
      CHECK(subtracted_defect(s, mu) <= 1e-8 * scale_of(s, mu));
    }
}

TEST_CASE("appendix t3 and t4 velocities") {
  const auto [a3, a4] = appendix_flow_check(single(0.0, 1.0));
  CHECK(a3 < 1e-14);
  CHECK(a4 < 1e-14);
  CHECK(std::abs(grad_p(single(0.0, 1.0), 4)[0] - 8.0) < 1e-14);
  std::mt19937_64 rng(9);
  for (const auto g : kGammas) {
    const auto s = random_state(rng, 4, g);
    const auto [d3, d4] = appendix_flow_check(s);
    const double scale = std::max(1.0, norm_inf(grad_p(s, 4)));
    CHECK(d3 <= 1e-10 * scale);
    CHECK(d4 <= 1e-10 * scale);
  }
}
