#include "kpcm/suite.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "kpcm/backlund.hpp"
#include "kpcm/ensemble.hpp"
#include "kpcm/errors.hpp"
#include "kpcm/flows.hpp"
#include "kpcm/kp_tau.hpp"

namespace kpcm {

double CheckParams::get(const std::string& key, double fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

int CheckParams::get_int(const std::string& key, int fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : static_cast<int>(std::lround(it->second));
}

namespace {

using Rng = std::mt19937_64;

struct Tally {
  double defect = 0.0;
  int samples = 0;
  int skipped = 0;

  void add(double d) {
    defect = std::max(defect, std::isnan(d) ? std::numeric_limits<double>::infinity() : d);
    ++samples;
  }
};

const Complex kWide[] = {Complex(1.0, 0.0), Complex(0.5, 0.0), Complex(0.0, 2.0)};
const Complex kGammas[] = {Complex(1.0, 0.0), Complex(0.5, 0.0), Complex(0.0, 1.0)};

Complex pick(std::span<const Complex> gammas, int k) { return gammas[static_cast<std::size_t>(k) % gammas.size()]; }

double max_diff(std::span<const Complex> a, std::span<const Complex> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

// Smallest max |a_i - b_sigma(i)| over permutations sigma.
double matched_distance(std::span<const Complex> a, std::span<const Complex> b) {
  std::vector<std::size_t> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size() && d < best; ++i) d = std::max(d, std::abs(a[i] - b[perm[i]]));
    best = std::min(best, d);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Distance between two states as unlabelled particles: positions compared modulo
// the period i pi / g. Paths around complex-time singularities may permute labels.
double unlabelled_distance(const PhaseState& a, const PhaseState& b) {
  const Complex period = Complex(0.0, std::acos(-1.0)) / a.gamma;
  auto branch = [&](Complex d) {
    const double k = std::round((d / period).real());
    return std::abs(d - k * period);
  };
  std::vector<std::size_t> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
      d = std::max({d, branch(a.x[i] - b.x[perm[i]]), std::abs(a.p[i] - b.p[perm[i]])});
    best = std::min(best, d);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double max_abs_h(const PhaseState& s, int k_max) {
  double out = 0.0;
  for (int k = 1; k <= k_max; ++k) out = std::max(out, std::abs(hamiltonian_h(s, k)));
  return out;
}

Complex off_pole_w(Rng& rng, const PhaseState& s) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (;;) {
    const Complex w(u(rng), u(rng));
    bool ok = true;
    for (const auto x : s.x) ok = ok && std::abs(w - std::exp(2.0 * s.gamma * x)) > 0.1;
    if (ok) return w;
  }
}

double backlund_scale(const PhaseState& s, Complex mu) {
  return std::abs(mu) + static_cast<double>(s.size()) * std::abs(s.gamma) + norm_inf(s.p);
}

Complex random_mu(Rng& rng) {
  std::uniform_real_distribution<double> r(8.0, 16.0), th(0.0, 2.0 * std::acos(-1.0));
  return std::polar(r(rng), th(rng));
}

// ---- Lax structure

Tally check_comm(Rng& rng, const CheckParams& p) {
  Tally t;
  const int n_states = p.get_int("samples", 200);
  for (int k = 0; k < n_states; ++k) {
    const auto s = random_state(rng, 2 + static_cast<std::size_t>(k % 7), pick(kWide, k / 7));
    t.add(comm_defect(s).norm_inf() / (build_lax(s).norm_inf() * build_w(s).norm_inf()));
  }
  return t;
}

Tally check_lax(Rng& rng, const CheckParams& p) {
  Tally t;
  const int n_states = p.get_int("samples", 200);
  for (int k = 0; k < n_states; ++k) {
    const auto s = random_state(rng, 2 + static_cast<std::size_t>(k % 7), pick(kWide, k / 7));
    t.add(lax_defect(s) / (build_lax(s).norm_inf() * build_m(s).norm_inf()));
  }
  return t;
}

Tally check_rank_one(Rng& rng, const CheckParams& p) {
  Tally t;
  const int n_states = p.get_int("samples", 60);
  for (int k = 0; k < n_states; ++k) t.add(rank_one_defect(random_state(rng, 1 + k % 8, pick(kWide, k / 8))));
  return t;
}

// ---- Hamiltonians

Tally check_decomposition(Rng& rng, const CheckParams& p) {
  Tally t;
  const int n_states = p.get_int("samples", 60);
  for (int k = 0; k < n_states; ++k) {
    const auto s = random_state(rng, 1 + k % 6, pick(kWide, k / 6));
    const double n = static_cast<double>(s.size());
    const Complex g2 = s.gamma * s.gamma;
    const Complex h1 = hamiltonian_h(s, 1), h2 = hamiltonian_h(s, 2), h3 = hamiltonian_h(s, 3),
                  h4 = hamiltonian_h(s, 4);
    const double scale = 1.0 + std::abs(h4) + std::abs(g2 * g2) * n + std::abs(g2 * h2);
    const double d2 = std::abs(hamiltonian_cal(s, 2) - h2 - n * g2 / 3.0);
    const double d3 = std::abs(hamiltonian_cal(s, 3) - h3 - g2 * h1);
    const double d4 = std::abs(hamiltonian_cal(s, 4) - h4 - 2.0 * g2 * h2 - n * g2 * g2 / 5.0);
    t.add(std::max({d2, d3, d4}) / scale);
  }
  return t;
}

Tally check_gradients(Rng& rng, const CheckParams& p) {
  Tally t;
  const int n_states = p.get_int("samples", 24);
  const double h = p.get("step", 1e-6);
  for (int k = 0; k < n_states; ++k) {
    const auto s = random_state(rng, 1 + k % 4, pick(kGammas, k / 4));
    for (int m = 1; m <= 5; ++m) {
      const auto g = hamiltonian_gradient(s, m);
      double scale = 1.0;
      for (std::size_t i = 0; i < s.size(); ++i) scale = std::max({scale, std::abs(g.dp[i]), std::abs(g.dx[i])});
      double worst = 0.0;
      for (std::size_t i = 0; i < s.size(); ++i) {
        PhaseState a = s, b = s;
        a.p[i] += h;
        b.p[i] -= h;
        const Complex fd_p = (hamiltonian_cal(a, m) - hamiltonian_cal(b, m)) / (2 * h);
        a = s;
        b = s;
        a.x[i] += h;
        b.x[i] -= h;
        const Complex fd_x = (hamiltonian_cal(a, m) - hamiltonian_cal(b, m)) / (2 * h);
        worst = std::max(worst, std::abs(fd_p - g.dp[i]) / std::max(std::abs(g.dp[i]), 1e-2 * scale));
        worst = std::max(worst, std::abs(fd_x - g.dx[i]) / std::max(std::abs(g.dx[i]), 1e-2 * scale));
      }
      t.add(worst);
    }
  }
  return t;
}

Tally check_appendix_traces(Rng& rng, const CheckParams& p) {
  Tally t;
  const int n_states = p.get_int("samples", 36);
  for (int k = 0; k < n_states; ++k) {
    const auto s = random_state(rng, 1 + k % 6, pick(kWide, k / 6));
    const auto h = appendix_hamiltonians(s);
    for (int j = 1; j <= 4; ++j) {
      const Complex tr = hamiltonian_h(s, j);
      t.add(std::abs(h[j - 1] - tr) / std::max(1.0, std::abs(tr)));
    }
  }
  return t;
}

Tally check_rational_limit(Rng& rng, const CheckParams& p) {
  Tally t;
  EnsembleOptions opts;
  opts.scale_by_gamma = false;
  const int n_states = p.get_int("samples", 6);
  const double g1 = p.get("gamma_hi", 1e-2), g2 = p.get("gamma_lo", 1e-3);
  for (int k = 0; k < n_states; ++k) {
    auto s = random_state(rng, 2 + k % 3, 1.0, opts);
    for (int m = 2; m <= 4; ++m) {
      s.gamma = g1;
      const double d1 = std::abs(hamiltonian_cal(s, m) - hamiltonian_h(s, m));
      s.gamma = g2;
      const double d2 = std::abs(hamiltonian_cal(s, m) - hamiltonian_h(s, m));
      t.add(std::abs(std::log(d1 / d2) / std::log(g1 / g2) - 2.0));
    }
  }
  return t;
}

// ---- flows

Tally check_isospectral(Rng& rng, const CheckParams& p, bool spectrum) {
  Tally t;
  const double rtol = p.get("rtol", 1e-10);
  const int n_states = p.get_int("samples", 4);
  for (int k = 0; k < n_states; ++k)
    for (int m = 2; m <= 4; ++m) {
      const auto s = random_state(rng, 2 + static_cast<std::size_t>(k % 4), pick(kGammas, k));
      Trajectory traj;
      try {
        integrate(s, m, m == 2 ? 1.0 : 0.3, rtol, traj);
      } catch (const DynamicsError&) {
        ++t.skipped;
        continue;
      }
      const int n = static_cast<int>(s.size());
      if (spectrum)
        t.add(matched_distance(eigenvalues(build_lax(s)), eigenvalues(build_lax(traj.samples.back().state))));
      else
        t.add(conserved_drift(traj, n) / max_abs_h(s, n));
    }
  return t;
}

Tally check_time_reversal(Rng& rng, const CheckParams& p) {
  Tally t;
  const double rtol = p.get("rtol", 1e-10);
  for (int k = 0; k < p.get_int("samples", 6); ++k) {
    const auto s = random_state(rng, 2 + k % 3, pick(kGammas, k));
    try {
      const auto there = integrate(s, 2, 0.5, rtol).samples.back().state;
      const auto back = integrate(there, 2, -0.5, rtol).samples.back().state;
      const double scale = std::max(1.0, std::max(norm_inf(s.x), norm_inf(s.p)));
      t.add(std::max(max_diff(back.x, s.x), max_diff(back.p, s.p)) / (rtol * scale));
    } catch (const DynamicsError&) {
      ++t.skipped;
    }
  }
  return t;
}

Tally check_flow_commutativity(Rng& rng, const CheckParams& p) {
  Tally t;
  const int fwd[] = {2, 3};
  const int rev[] = {3, 2};
  for (int k = 0; k < p.get_int("samples", 6); ++k) {
    const auto s = random_state(rng, 2 + k % 3, pick(kGammas, k));
    const HierarchyTimes times{{2, 0.1}, {3, 0.05}};
    try {
      const auto a = evolve_multi(s, times, 1e-11, fwd);
      const auto b = evolve_multi(s, times, 1e-11, rev);
      t.add(unlabelled_distance(a, b));
    } catch (const DynamicsError&) {
      ++t.skipped;
    }
  }
  return t;
}

// ---- tau function

Tally check_oracle(Rng& rng, const CheckParams& p, bool shift_only) {
  Tally t;
  const int n_states = p.get_int("samples", 6);
  for (int k = 0; k < n_states; ++k)
    for (int m = shift_only ? 1 : 2; m <= (shift_only ? 1 : 4); ++m) {
      const auto s = random_state(rng, 1 + static_cast<std::size_t>(k % 6), pick(kGammas, k + m));
      const double tm = m <= 2 ? 0.4 : 0.15;
      PhaseState end;
      try {
        end = integrate(s, m, tm, 1e-12).samples.back().state;
      } catch (const DynamicsError&) {
        ++t.skipped;
        continue;
      }
      const auto fm = build_flow_matrices(s);
      const HierarchyTimes times{{m, tm}};
      const auto oracle = state_at_times(fm, times);
      t.add(std::max(max_diff(track_poles(fm, times), end.x), max_diff(oracle.p, end.p)));
    }
  return t;
}

Tally check_tau_roots(Rng& rng, const CheckParams& p) {
  Tally t;
  for (int k = 0; k < p.get_int("samples", 24); ++k) {
    const auto s = random_state(rng, 1 + k % 6, pick(kWide, k));
    const auto fm = build_flow_matrices(s, 4);
    const Complex w = off_pole_w(rng, s);
    double scale = 1.0;
    for (const auto x : s.x) scale *= std::abs(w) + std::abs(std::exp(2.0 * s.gamma * x));
    t.add(std::abs(tau_det(fm, {}, w) - tau_from_roots(s, w)) / scale);
  }
  return t;
}

Tally check_bilinear(Rng& rng, const CheckParams& p) {
  Tally t;
  std::uniform_real_distribution<double> u(-6.0, 6.0);
  const int draws = p.get_int("draws", 100);
  for (std::size_t n = 1; n <= 5; ++n)
    for (int k = 0; k < draws; ++k) {
      const auto s = random_state(rng, n, pick(kGammas, k));
      const Complex lambda(u(rng), u(rng)), mu(u(rng), u(rng));
      const Complex w = off_pole_w(rng, s);
      try {
        const auto r = bilinear_residual(s, w, lambda, mu);
        t.add(std::abs(r.residual) / std::max(1.0, r.scale));
      } catch (const SingularLinearSystem&) {
        ++t.skipped;
      }
    }
  return t;
}

Tally check_contour(Rng& rng, const CheckParams& p) {
  Tally t;
  const int nodes = p.get_int("nodes", 512);
  for (int k = 0; k < p.get_int("samples", 12); ++k) {
    const auto s = random_state(rng, 1 + k % 4, pick(kGammas, k / 4));
    const double r0 = contour_min_radius(s);
    for (int m = 1; m <= 3; ++m) {
      const auto exact = grad_p(s, m);
      t.add(max_diff(contour_residue(s, m, r0 + 0.5, nodes), exact));
      t.add(max_diff(contour_residue(s, m, 2.0 * r0, nodes), exact));
    }
  }
  return t;
}

Tally check_residue(Rng& rng, const CheckParams& p) {
  Tally t;
  const double h = p.get("step", 1e-5);
  for (int k = 0; k < p.get_int("samples", 15); ++k) {
    const auto s = random_state(rng, 1 + k % 5, pick(kGammas, k / 5));
    const auto fm = build_flow_matrices(s);
    for (int m = 1; m <= 4; ++m) t.add(residue_identity_defect(fm, m, h) / std::max(1.0, norm_inf(grad_p(s, m))));
  }
  return t;
}

Tally check_wave_evolution(Rng& rng, const CheckParams& p) {
  Tally t;
  for (int k = 0; k < p.get_int("samples", 12); ++k) {
    const auto s = random_state(rng, 1 + k % 4, pick(kGammas, k));
    t.add(wave_evolution_defect(s, Complex(2.0, 1.0), p.get("step", 1e-4)));
  }
  return t;
}

Tally check_kp(Rng& rng, const CheckParams& p, bool convergence) {
  Tally t;
  const double h = p.get("step", 1e-3);
  const Complex gammas[] = {Complex(1.0, 0.0), Complex(0.0, 1.0)};
  for (int k = 0; k < p.get_int("samples", 6); ++k) {
    const auto s = random_state(rng, 1 + k % 3, pick(gammas, k / 3));
    const auto fm = build_flow_matrices(s);
    const Complex xq = Complex(0.2, std::acos(-1.0) / 2) / s.gamma;
    const auto r1 = kp_residual(fm, {}, xq, h);
    if (!convergence) {
      t.add(std::abs(r1.residual) / r1.scale);
    } else {
      const auto r2 = kp_residual(fm, {}, xq, h / 2);
      t.add(std::abs(r2.residual) / std::abs(r1.residual));
    }
  }
  return t;
}

// ---- Backlund

Tally check_backlund_canonical(Rng& rng, const CheckParams& p) {
  Tally t;
  const int pairs = p.get_int("samples", 50);
  for (int k = 0; t.samples < pairs && k < 4 * pairs; ++k) {
    const auto s = random_state(rng, 1 + k % 5, pick(kGammas, k / 5));
    const Complex mu = random_mu(rng);
    try {
      t.add(canonical_defect(backlund_solve(s, mu)) / backlund_scale(s, mu));
    } catch (const Error&) {
      ++t.skipped;
    }
  }
  if (t.samples < pairs) t.samples = 0;
  return t;
}

Tally check_backlund_expansion(Rng& rng, const CheckParams& p) {
  Tally t;
  EnsembleOptions opts;
  opts.spacing = p.get("spacing", 1.6);
  const double degenerate = p.get("degenerate", 0.25);
  const double mus[] = {10.0, 20.0, 40.0};
  for (int k = 0; k < p.get_int("samples", 24); ++k) {
    const auto s = random_state(rng, 1 + k % 4, pick(kGammas, k / 4), opts);
    const auto table = schur_table(s);
    for (int K = 1; K <= 3; ++K) {
      // the fit only sees order K + 1 when its coefficient is not accidentally small
      if (norm_inf(table.forward[K]) < degenerate * std::pow(std::abs(s.gamma), K)) continue;
      try {
        t.add(std::abs(expansion_exponent(s, K, mus) + (K + 1)));
      } catch (const Error&) {
        ++t.skipped;
      }
    }
  }
  return t;
}

Tally check_backlund_b6(Rng& rng, const CheckParams& p) {
  Tally t;
  for (int k = 0; k < p.get_int("samples", 30); ++k) {
    const auto s = random_state(rng, 1 + k % 5, pick(kGammas, k / 5));
    const Complex mu = random_mu(rng);
    try {
      t.add(subtracted_defect(s, mu) / backlund_scale(s, mu));
    } catch (const Error&) {
      ++t.skipped;
    }
  }
  return t;
}

Tally check_appendix_flow(Rng& rng, const CheckParams& p) {
  Tally t;
  for (int k = 0; k < p.get_int("samples", 30); ++k) {
    const auto s = random_state(rng, 1 + k % 5, pick(kGammas, k / 5));
    const auto [d3, d4] = appendix_flow_check(s);
    t.add(std::max(d3 / std::max(1.0, norm_inf(grad_p(s, 3))), d4 / std::max(1.0, norm_inf(grad_p(s, 4)))));
  }
  return t;
}

Tally check_schur_actions(Rng& rng, const CheckParams& p) {
  Tally t;
  for (int k = 0; k < p.get_int("samples", 30); ++k) {
    const auto s = random_state(rng, 1 + k % 5, pick(kGammas, k / 5));
    const auto table = schur_table(s);
    double d = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      d = std::max(d, std::abs(table.forward[0][i] + 1.0));
      d = std::max(d, std::abs(table.backward[0][i] - 1.0));
      d = std::max(d, std::abs(table.forward[1][i] - s.p[i]));
      d = std::max(d, std::abs(table.backward[1][i] + s.p[i]));
    }
    t.add(d);
  }
  return t;
}

using CheckFn = Tally (*)(Rng&, const CheckParams&);

struct Entry {
  CheckInfo info;
  CheckFn fn;
};

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> e = {
        {{"appendix_flow", "explicit t3/t4 velocities vs grad_p, relative", 1e-10}, check_appendix_flow},
        {{"appendix_traces", "explicit H_1..H_4 sums vs tr L^k, relative", 1e-10}, check_appendix_traces},
        {{"backlund_b6", "subtracted Backlund equation, relative to |mu| + N|g| + max|p|", 1e-8}, check_backlund_b6},
        {{"backlund_canonical", "generating-function derivatives vs momenta on 50 pairs", 1e-10},
         check_backlund_canonical},
        {{"backlund_expansion", "|fitted exponent of the truncated series remainder + (K+1)|", 0.3},
         check_backlund_expansion},
        {{"bilinear", "bilinear identity for shifted tau functions, relative", 1e-10}, check_bilinear},
        {{"comm_defect", "[L,W] identity relative to |L||W|", 1e-12}, check_comm},
        {{"contour", "trapezoid contour residue vs grad_p, absolute", 1e-9}, check_contour},
        {{"decomposition", "flow Hamiltonians vs trace combinations, relative", 1e-11}, check_decomposition},
        {{"flow_commutativity", "t2 then t3 vs t3 then t2 as unlabelled particles, absolute", 1e-7}, check_flow_commutativity},
        {{"gradients", "closed-form gradients vs central differences, relative", 1e-5}, check_gradients},
        {{"isospectral", "drift of H_1..H_N relative to max|H_k|; tolerance factor * rtol", 1e-8},
         [](Rng& r, const CheckParams& p) { return check_isospectral(r, p, false); }},
        {{"kp_convergence", "KP residual ratio r(h/2) / r(h)", 1.0 / 3.0},
         [](Rng& r, const CheckParams& p) { return check_kp(r, p, true); }},
        {{"kp_residual", "KP equation residual relative to its largest term", 1e-4},
         [](Rng& r, const CheckParams& p) { return check_kp(r, p, false); }},
        {{"lax_defect", "Lax equation relative to |L||M|", 1e-10}, check_lax},
        {{"oracle", "determinant poles and momenta vs integrated flows m = 2..4", 1e-7},
         [](Rng& r, const CheckParams& p) { return check_oracle(r, p, false); }},
        {{"oracle_shift", "determinant poles vs integrated t1 flow", 1e-12},
         [](Rng& r, const CheckParams& p) { return check_oracle(r, p, true); }},
        {{"rank_one", "rank of L W - W L + 2g W", 1e-12}, check_rank_one},
        {{"rational_limit", "|fitted slope of |cal H_m - H_m| in gamma - 2|", 0.2}, check_rational_limit},
        {{"residue", "residue formula vs pole velocities, relative", 1e-7}, check_residue},
        {{"schur_actions", "h_1 = -1 and h_2 = p, exact", 0.0}, check_schur_actions},
        {{"spectrum", "eigenvalues of L before and after the flow", 1e-7},
         [](Rng& r, const CheckParams& p) { return check_isospectral(r, p, true); }},
        {{"tau_det", "determinant vs product form of tau, relative", 1e-12}, check_tau_roots},
        {{"time_reversal", "forward then backward t2 flow, in units of rtol", 10.0}, check_time_reversal},
        {{"wave_evolution", "t2 evolution of the wave coefficients", 1e-6}, check_wave_evolution},
    };
    std::sort(e.begin(), e.end(), [](const Entry& a, const Entry& b) { return a.info.name < b.info.name; });
    return e;
  }();
  return table;
}

const Entry* find_entry(std::string_view name) {
  for (const auto& e : entries())
    if (e.info.name == name) return &e;
  return nullptr;
}

}  // namespace

const std::vector<CheckInfo>& check_registry() {
  static const std::vector<CheckInfo> infos = [] {
    std::vector<CheckInfo> out;
    for (const auto& e : entries()) out.push_back(e.info);
    return out;
  }();
  return infos;
}

bool is_registered_check(std::string_view name) { return find_entry(name) != nullptr; }

CheckOutcome run_check(std::string_view name, std::uint64_t seed, const CheckParams& params) {
  const Entry* e = find_entry(name);
  if (!e) throw InvalidArgument("unknown check: " + std::string(name));
  const auto start = std::chrono::steady_clock::now();
  Rng rng(derive_seed(seed, name));
  const Tally t = e->fn(rng, params);

  CheckOutcome out;
  out.name = e->info.name;
  if (out.name == "isospectral")
    out.tolerance = params.get("factor", 100.0) * params.get("rtol", 1e-10);
  else
    out.tolerance = params.get("tol", e->info.default_tolerance);
  out.samples = t.samples;
  out.skipped = t.skipped;
  out.defect = t.samples > 0 ? t.defect : std::numeric_limits<double>::infinity();
  out.pass = out.defect <= out.tolerance;
  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace kpcm
