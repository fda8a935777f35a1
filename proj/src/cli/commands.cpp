#include "cli/commands.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <span>
#include <thread>

#include "json.hpp"
#include "kpcm/backlund.hpp"
#include "kpcm/errors.hpp"
#include "kpcm/flows.hpp"
#include "kpcm/kp_tau.hpp"

namespace kpcm::cli {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& digest) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_ << "# config-digest: " << digest << '\n';
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

void write_report(const std::filesystem::path& path, json report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << report.dump(2) << '\n';
}

json report_head(const std::string& command, const RunConfig& cfg) {
  return {{"command", command}, {"config_digest", cfg.digest}, {"seed", cfg.seed}};
}

std::filesystem::path prepare_dir(const std::string& out_dir) {
  std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) body(i);
    });
  for (auto& t : pool) t.join();
}

void push_complex(std::vector<std::string>& row, std::span<const Complex> v) {
  for (const auto z : v) {
    row.push_back(num(z.real()));
    row.push_back(num(z.imag()));
  }
}

void push_complex_header(std::vector<std::string>& row, const std::string& name, std::size_t n) {
  for (std::size_t i = 1; i <= n; ++i) {
    row.push_back("re_" + name + std::to_string(i));
    row.push_back("im_" + name + std::to_string(i));
  }
}

std::string error_kind(const DynamicsError& e) {
  return dynamic_cast<const PoleCollision*>(&e) ? "PoleCollision" : "StepUnderflow";
}

}  // namespace

void configure_logging() {
  auto logger = spdlog::get("kpcm");
  if (!logger) logger = spdlog::stderr_color_mt("kpcm");
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("KPCM_LOG");
  const std::string level = env ? env : "off";
  if (level == "debug")
    spdlog::set_level(spdlog::level::debug);
  else if (level == "info")
    spdlog::set_level(spdlog::level::info);
  else if (level == "warn")
    spdlog::set_level(spdlog::level::warn);
  else if (level == "error")
    spdlog::set_level(spdlog::level::err);
  else
    spdlog::set_level(spdlog::level::off);
}

int cmd_simulate(const RunConfig& cfg, const std::string& out_dir, int /*jobs*/) {
  const auto start = Clock::now();
  if (cfg.flows.empty()) throw ConfigError("simulate needs at least one flow");
  const PhaseState s0 = cfg.initial_state();
  require_regular(s0);
  const std::size_t n = s0.size();
  const auto dir = prepare_dir(out_dir);

  std::vector<Complex> h0(n);
  for (std::size_t k = 1; k <= n; ++k) h0[k - 1] = hamiltonian_h(s0, static_cast<int>(k));

  CsvWriter csv(dir / "simulate.csv", cfg.digest);
  std::vector<std::string> header = {"m", "t", "status"};
  push_complex_header(header, "x", n);
  push_complex_header(header, "p", n);
  header.insert(header.end(), {"re_com", "im_com"});
  for (std::size_t k = 1; k <= n; ++k) header.push_back("drift_H" + std::to_string(k));
  csv.row(header);

  json flows = json::array();
  int code = kExitOk;
  for (const auto& f : cfg.flows) {
    spdlog::info("simulate: flow m={} to t={} (rtol {})", f.m, f.t, f.rtol);
    Trajectory traj;
    std::string failure;
    double failure_t = 0.0;
    try {
      integrate(s0, f.m, f.t, f.rtol, traj);
    } catch (const DynamicsError& e) {
      failure = error_kind(e);
      failure_t = e.time().value_or(traj.samples.empty() ? 0.0 : traj.samples.back().t);
      spdlog::warn("simulate: flow m={} stopped at t={}: {}", f.m, failure_t, e.what());
    }
    double max_drift = 0.0;
    for (const auto& sample : traj.samples) {
      std::vector<std::string> row = {std::to_string(f.m), num(sample.t), "ok"};
      push_complex(row, sample.state.x);
      push_complex(row, sample.state.p);
      Complex com = 0.0;
      for (const auto x : sample.state.x) com += x;
      com /= static_cast<double>(n);
      row.push_back(num(com.real()));
      row.push_back(num(com.imag()));
      for (std::size_t k = 1; k <= n; ++k) {
        const double d = std::abs(hamiltonian_h(sample.state, static_cast<int>(k)) - h0[k - 1]);
        max_drift = std::max(max_drift, d);
        row.push_back(num(d));
      }
      csv.row(row);
    }
    if (!failure.empty()) {
      std::vector<std::string> row = {std::to_string(f.m), num(failure_t), failure};
      row.resize(header.size(), "");
      csv.row(row);
      code = kExitSingular;
    }
    flows.push_back({{"m", f.m},
                     {"t_end", f.t},
                     {"rtol", f.rtol},
                     {"samples", traj.samples.size()},
                     {"max_drift", max_drift},
                     {"status", failure.empty() ? "ok" : failure}});
    if (!failure.empty()) break;
  }

  json report = report_head("simulate", cfg);
  report["flows"] = flows;
  report["exit_code"] = code;
  report["wall_time"] = seconds_since(start);
  write_report(dir / "simulate.json", report);
  return code;
}

int cmd_verify(const RunConfig& cfg, const std::string& out_dir, int jobs) {
  const auto start = Clock::now();
  std::vector<CheckSpec> checks = cfg.checks;
  if (checks.empty())
    for (const auto& info : check_registry()) checks.push_back({info.name, {}});
  const auto dir = prepare_dir(out_dir);

  struct Row {
    std::size_t index;
    CheckOutcome outcome;
    std::string error;
  };
  std::vector<Row> rows(checks.size());
  parallel_for(checks.size(), jobs, [&](std::size_t i) {
    rows[i].index = i;
    rows[i].outcome.name = checks[i].name;
    try {
      rows[i].outcome = run_check(checks[i].name, cfg.seed, checks[i].params);
    } catch (const std::exception& e) {
      rows[i].outcome.defect = std::numeric_limits<double>::infinity();
      rows[i].outcome.pass = false;
      rows[i].error = e.what();
    }
  });
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return a.outcome.name != b.outcome.name ? a.outcome.name < b.outcome.name : a.index < b.index;
  });

  CsvWriter csv(dir / "verify.csv", cfg.digest);
  csv.row({"check", "status", "defect", "tolerance", "samples", "skipped"});
  json list = json::array();
  bool all_pass = true;
  for (const auto& r : rows) {
    const auto& o = r.outcome;
    all_pass = all_pass && o.pass;
    csv.row({o.name, o.pass ? "pass" : "fail", num(o.defect), num(o.tolerance), std::to_string(o.samples),
             std::to_string(o.skipped)});
    json entry = {{"name", o.name},
                  {"status", o.pass ? "pass" : "fail"},
                  {"defect", std::isfinite(o.defect) ? json(o.defect) : json(nullptr)},
                  {"tolerance", o.tolerance},
                  {"samples", o.samples},
                  {"skipped", o.skipped},
                  {"wall_time", o.wall_time},
                  {"provenance", cfg.digest}};
    if (!r.error.empty()) entry["error"] = r.error;
    list.push_back(entry);
    spdlog::info("verify: {} {} defect={} tol={}", o.name, o.pass ? "pass" : "fail", o.defect, o.tolerance);
  }
  const int code = all_pass ? kExitOk : kExitCheckFailed;
  json report = report_head("verify", cfg);
  report["checks"] = list;
  report["exit_code"] = code;
  report["wall_time"] = seconds_since(start);
  write_report(dir / "verify.json", report);
  return code;
}

int cmd_tau_compare(const RunConfig& cfg, const std::string& out_dir, int /*jobs*/) {
  const auto start = Clock::now();
  if (cfg.flows.empty()) throw ConfigError("tau-compare needs at least one flow");
  const PhaseState s0 = cfg.initial_state();
  require_regular(s0);
  const std::size_t n = s0.size();
  const auto dir = prepare_dir(out_dir);
  const FlowMatrixSet fm = build_flow_matrices(s0);

  CsvWriter csv(dir / "tau_compare.csv", cfg.digest);
  std::vector<std::string> header = {"m", "t", "status", "deviation"};
  push_complex_header(header, "x_flow", n);
  push_complex_header(header, "x_tau", n);
  csv.row(header);

  auto emit = [&](const std::string& label, double t, const HierarchyTimes& times, const ComplexVector& x_flow) {
    const ComplexVector w = pole_weights(fm, times);
    const ComplexVector x_tau = poles_to_positions(w, s0.gamma, x_flow);
    double dev = 0.0;
    for (std::size_t i = 0; i < n; ++i) dev = std::max(dev, std::abs(x_tau[i] - x_flow[i]));
    std::vector<std::string> row = {label, num(t), "ok", num(dev)};
    push_complex(row, x_flow);
    push_complex(row, x_tau);
    csv.row(row);
    return dev;
  };

  json flows = json::array();
  int code = kExitOk;
  for (const auto& f : cfg.flows) {
    PhaseState s = s0;
    double t_prev = 0.0, worst = 0.0;
    try {
      for (int j = 0; j < cfg.tau_rows; ++j) {
        const double t = f.t * j / (cfg.tau_rows - 1);
        if (j > 0) s = integrate(s, f.m, t - t_prev, f.rtol).samples.back().state;
        t_prev = t;
        HierarchyTimes times;
        times.set(f.m, t);
        worst = std::max(worst, emit(std::to_string(f.m), t, times, s.x));
      }
    } catch (const DynamicsError& e) {
      const double t_fail = t_prev + e.time().value_or(0.0);
      spdlog::warn("tau-compare: flow m={} stopped at t={}: {}", f.m, t_fail, e.what());
      std::vector<std::string> row = {std::to_string(f.m), num(t_fail), error_kind(e)};
      row.resize(header.size(), "");
      csv.row(row);
      flows.push_back({{"m", f.m}, {"t_end", f.t}, {"status", error_kind(e)}});
      code = kExitSingular;
      break;
    }
    flows.push_back({{"m", f.m}, {"t_end", f.t}, {"max_deviation", worst}, {"status", "ok"}});
  }
  if (code == kExitOk && cfg.flows.size() > 1) {
    // all flows at once: m = 0 labels the combined row
    HierarchyTimes times;
    double rtol = 1e-6;
    for (const auto& f : cfg.flows) {
      times.set(f.m, f.t);
      rtol = std::min(rtol, f.rtol);
    }
    const double dev = emit("0", 0.0, times, evolve_multi(s0, times, rtol).x);
    flows.push_back({{"m", 0}, {"max_deviation", dev}});
  }

  json report = report_head("tau-compare", cfg);
  report["flows"] = flows;
  report["exit_code"] = code;
  report["wall_time"] = seconds_since(start);
  write_report(dir / "tau_compare.json", report);
  return code;
}

int cmd_backlund(const RunConfig& cfg, const std::string& out_dir, int jobs) {
  const auto start = Clock::now();
  if (cfg.mus.empty()) throw ConfigError("backlund needs a non-empty mus list");
  const PhaseState s0 = cfg.initial_state();
  require_regular(s0);
  const std::size_t n = s0.size();
  const auto dir = prepare_dir(out_dir);

  struct Row {
    std::string status = "ok";
    BacklundPair pair;
    double canonical = 0.0, scale = 0.0;
    double expansion[3] = {0.0, 0.0, 0.0};
  };
  std::vector<Row> rows(cfg.mus.size());
  parallel_for(rows.size(), jobs, [&](std::size_t i) {
    const Complex mu = cfg.mus[i];
    Row& r = rows[i];
    r.scale = std::abs(mu) + static_cast<double>(n) * std::abs(s0.gamma) + norm_inf(s0.p);
    try {
      r.pair = backlund_solve(s0, mu);
      r.canonical = canonical_defect(r.pair);
      for (int K = 1; K <= 3; ++K) r.expansion[K - 1] = expansion_defect(s0, mu, K);
      if (!(r.canonical <= cfg.backlund_tol * r.scale)) r.status = "fail";
    } catch (const NewtonDivergence&) {
      r.status = "NewtonDivergence";
    } catch (const PoleCollision&) {
      r.status = "PoleCollision";
    }
  });

  CsvWriter csv(dir / "backlund.csv", cfg.digest);
  std::vector<std::string> header = {"re_mu", "im_mu", "status", "iterations", "residual", "canonical_defect",
                                     "expansion_K1", "expansion_K2", "expansion_K3"};
  push_complex_header(header, "y", n);
  push_complex_header(header, "pt", n);
  csv.row(header);
  json list = json::array();
  bool all_ok = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& r = rows[i];
    const bool ok = r.status == "ok";
    all_ok = all_ok && ok;
    std::vector<std::string> row = {num(cfg.mus[i].real()), num(cfg.mus[i].imag()), r.status};
    if (r.pair.target_y.empty()) {
      row.resize(header.size(), "");
    } else {
      row.insert(row.end(), {std::to_string(r.pair.iterations), num(r.pair.residual), num(r.canonical),
                             num(r.expansion[0]), num(r.expansion[1]), num(r.expansion[2])});
      push_complex(row, r.pair.target_y);
      push_complex(row, r.pair.target_p);
    }
    csv.row(row);
    list.push_back({{"mu", json::array({cfg.mus[i].real(), cfg.mus[i].imag()})},
                    {"status", r.status},
                    {"canonical_defect", r.canonical},
                    {"tolerance", cfg.backlund_tol * r.scale}});
  }
  const int code = all_ok ? kExitOk : kExitCheckFailed;
  json report = report_head("backlund", cfg);
  report["rows"] = list;
  report["exit_code"] = code;
  report["wall_time"] = seconds_since(start);
  write_report(dir / "backlund.json", report);
  return code;
}

int run_command(const std::string& command, const CommandOptions& opts) {
  try {
    RunConfig cfg = load_config(opts.config_path);
    if (opts.seed) override_seed(cfg, *opts.seed);
    const std::string out = opts.out_dir.value_or(cfg.output_dir);
    const int jobs = std::max(1, opts.jobs);
    spdlog::info("{}: config digest {}", command, cfg.digest);
    if (command == "simulate") return cmd_simulate(cfg, out, jobs);
    if (command == "verify") return cmd_verify(cfg, out, jobs);
    if (command == "tau-compare") return cmd_tau_compare(cfg, out, jobs);
    if (command == "backlund") return cmd_backlund(cfg, out, jobs);
    throw ConfigError("unknown command " + command);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kExitConfig;
  } catch (const DynamicsError& e) {
    if (e.time())
      std::fprintf(stderr, "%s at t=%.17g: %s\n", error_kind(e).c_str(), *e.time(), e.what());
    else
      std::fprintf(stderr, "%s: %s\n", error_kind(e).c_str(), e.what());
    return kExitSingular;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitCheckFailed;
  }
}

}  // namespace kpcm::cli
