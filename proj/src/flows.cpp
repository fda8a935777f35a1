#include "kpcm/flows.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "kpcm/errors.hpp"

namespace kpcm {

HierarchyTimes::HierarchyTimes(std::initializer_list<std::pair<const int, double>> entries) {
  for (const auto& [m, t] : entries) set(m, t);
}

void HierarchyTimes::set(int m, double t) {
  if (m < 1) throw InvalidArgument("flow index must be >= 1");
  if (!std::isfinite(t)) throw InvalidArgument("flow time must be finite");
  if (!entries_.count(m) && entries_.size() >= kMaxEntries)
    throw InvalidArgument("too many hierarchical times (max " + std::to_string(kMaxEntries) + ")");
  entries_[m] = t;
}

double HierarchyTimes::get(int m) const {
  const auto it = entries_.find(m);
  return it == entries_.end() ? 0.0 : it->second;
}

FlowDerivative flow_derivative(const PhaseState& s, int m) {
  auto g = hamiltonian_gradient(s, m);
  for (auto& v : g.dx) v = -v;
  return {std::move(g.dp), std::move(g.dx)};
}

namespace {

constexpr double kRoundoffFloor = 32.0 * std::numeric_limits<double>::epsilon();

using State = ComplexVector;  // x followed by p

State pack(const PhaseState& s) {
  State y(s.x);
  y.insert(y.end(), s.p.begin(), s.p.end());
  return y;
}

PhaseState unpack(const PhaseState& like, const State& y) {
  PhaseState s = like;
  const std::size_t n = like.size();
  std::copy(y.begin(), y.begin() + n, s.x.begin());
  std::copy(y.begin() + n, y.end(), s.p.begin());
  return s;
}

State rhs(const PhaseState& like, const State& y, int m) {
  const auto d = flow_derivative(unpack(like, y), m);
  State out(d.dx);
  out.insert(out.end(), d.dp.begin(), d.dp.end());
  return out;
}

State axpy(const State& y, double h, const State& k) {
  State out(y);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += h * k[i];
  return out;
}

State rk4(const PhaseState& like, const State& y, const State& k1, double h, int m) {
  const State k2 = rhs(like, axpy(y, h / 2, k1), m);
  const State k3 = rhs(like, axpy(y, h / 2, k2), m);
  const State k4 = rhs(like, axpy(y, h, k3), m);
  State out(y);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += h / 6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

}  // namespace

void integrate(const PhaseState& s0, int m, double t_end, double rtol, Trajectory& out) {
  if (m < 1) throw InvalidArgument("flow index must be >= 1");
  if (!(rtol >= 1e-13 && rtol <= 1e-6)) throw InvalidArgument("rtol must lie in [1e-13, 1e-6]");
  if (!std::isfinite(t_end)) throw InvalidArgument("t_end must be finite");
  require_regular(s0);
  out.m = m;
  out.samples.push_back({0.0, s0});
  if (t_end == 0.0) return;

  const double dir = t_end > 0 ? 1.0 : -1.0;
  double t = 0.0;
  double h = dir * std::min(std::abs(t_end), 0.05);
  State y = pack(s0);
  while (dir * (t_end - t) > 0) {
    if (dir * (t + h - t_end) > 0) h = t_end - t;
    State full, two;
    bool overflow = false;
    try {
      const State k1 = rhs(s0, y, m);
      full = rk4(s0, y, k1, h, m);
      const State mid = rk4(s0, y, k1, h / 2, m);
      two = rk4(s0, mid, rhs(s0, mid, m), h / 2, m);
    } catch (const PoleCollision& e) {
      throw PoleCollision(e.what(), t);
    } catch (const InvalidArgument&) {
      overflow = true;  // a stage left the finite range; retry with a smaller step
    }
    double err = overflow ? std::numeric_limits<double>::infinity() : 0.0;
    for (std::size_t i = 0; i < y.size() && !overflow; ++i) err = std::max(err, std::abs(two[i] - full[i]) / 15.0);
    // per-step target, floored at round-off so tiny steps can still be accepted
    const double tol = std::max(rtol * std::abs(h), kRoundoffFloor) * std::max(1.0, overflow ? 0.0 : norm_inf(two));
    if (std::isfinite(err) && err <= tol) {
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = two[i] + (two[i] - full[i]) / 15.0;
      // land exactly on t_end when this was the final step
      t = (std::abs(t_end - (t + h)) <= 1e-14 * std::max(1.0, std::abs(t_end))) ? t_end : t + h;
      PhaseState s = unpack(s0, y);
      try {
        require_regular(s);
      } catch (const PoleCollision& e) {
        throw PoleCollision(e.what(), t);
      }
      out.samples.push_back({t, std::move(s)});
    }
    const double factor = (err == 0.0 || !std::isfinite(err)) ? (std::isfinite(err) ? 4.0 : 0.1)
                                                              : 0.9 * std::pow(tol / err, 0.25);
    h *= std::clamp(factor, 0.1, 4.0);
    if (std::abs(h) < 1e-12 && dir * (t_end - t) > 1e-12)
      throw StepUnderflow("step size underflow in flow " + std::to_string(m), t);
  }
}

Trajectory integrate(const PhaseState& s0, int m, double t_end, double rtol) {
  Trajectory traj;
  integrate(s0, m, t_end, rtol, traj);
  return traj;
}

PhaseState evolve_multi(const PhaseState& s0, const HierarchyTimes& times, double rtol,
                        std::span<const int> order) {
  PhaseState s = s0;
  for (const int m : order) {
    if (!times.entries().count(m)) throw InvalidArgument("flow order names an unset time");
    const double t = times.get(m);
    if (t == 0.0) continue;
    s = integrate(s, m, t, rtol).samples.back().state;
  }
  return s;
}

PhaseState evolve_multi(const PhaseState& s0, const HierarchyTimes& times, double rtol) {
  std::vector<int> order;
  for (const auto& [m, t] : times.entries()) order.push_back(m);
  return evolve_multi(s0, times, rtol, order);
}

double conserved_drift(const Trajectory& traj, int k_max) {
  if (traj.samples.empty()) throw InvalidArgument("empty trajectory");
  double drift = 0.0;
  const PhaseState& first = traj.samples.front().state;
  for (int k = 1; k <= k_max; ++k) {
    const Complex h0 = hamiltonian_h(first, k);
    for (const auto& sample : traj.samples) drift = std::max(drift, std::abs(hamiltonian_h(sample.state, k) - h0));
  }
  return drift;
}

}  // namespace kpcm
