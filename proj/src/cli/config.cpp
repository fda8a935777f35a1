#include "cli/config.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace kpcm::cli {

namespace {

using nlohmann::json;

Complex to_complex(const json& j, const std::string& what) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return {j[0].get<double>(), j[1].get<double>()};
  throw ConfigError(what + ": expected a number or [re, im]");
}

ComplexVector to_complex_list(const json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + ": expected a list");
  ComplexVector out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(to_complex(j[i], what + "[" + std::to_string(i) + "]"));
  return out;
}

json from_complex(Complex z) { return json::array({z.real(), z.imag()}); }

json from_complex_list(const ComplexVector& v) {
  json out = json::array();
  for (const auto z : v) out.push_back(from_complex(z));
  return out;
}

double finite(const json& j, const std::string& what) {
  if (!j.is_number()) throw ConfigError(what + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(what + ": not finite");
  return v;
}

json canonical(const RunConfig& c) {
  json flows = json::array();
  for (const auto& f : c.flows) flows.push_back({{"m", f.m}, {"t", f.t}, {"rtol", f.rtol}});
  json checks = json::array();
  for (const auto& ch : c.checks) checks.push_back({{"name", ch.name}, {"params", ch.params.values}});
  return {{"gamma", from_complex(c.gamma)},
          {"x0", from_complex_list(c.x0)},
          {"p0", from_complex_list(c.p0)},
          {"flows", flows},
          {"checks", checks},
          {"seed", c.seed},
          {"mus", from_complex_list(c.mus)},
          {"tau_rows", c.tau_rows},
          {"backlund_tol", c.backlund_tol}};
}

void refresh_digest(RunConfig& c) { c.digest = sha256_hex(canonical(c).dump()); }

}  // namespace

PhaseState RunConfig::initial_state() const {
  PhaseState s;
  s.gamma = gamma;
  s.x = x0;
  s.p = p0;
  return s;
}

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

RunConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known = {"gamma", "x0",  "p0",       "flows",        "checks", "seed",
                                              "mus",   "output_dir", "tau_rows", "backlund_tol"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("unknown config key: " + key);

  RunConfig c;
  if (!j.contains("gamma") || !j.contains("x0") || !j.contains("p0"))
    throw ConfigError("config needs gamma, x0 and p0");
  c.gamma = to_complex(j["gamma"], "gamma");
  if (c.gamma == Complex(0.0) || !std::isfinite(std::abs(c.gamma))) throw ConfigError("gamma must be finite and nonzero");
  c.x0 = to_complex_list(j["x0"], "x0");
  c.p0 = to_complex_list(j["p0"], "p0");
  if (c.x0.empty() || c.x0.size() != c.p0.size()) throw ConfigError("x0 and p0 must be non-empty and of equal length");
  for (std::size_t i = 0; i < c.x0.size(); ++i)
    if (!std::isfinite(std::abs(c.x0[i])) || !std::isfinite(std::abs(c.p0[i])))
      throw ConfigError("x0 and p0 must be finite");

  if (j.contains("flows")) {
    if (!j["flows"].is_array()) throw ConfigError("flows: expected a list");
    std::set<int> seen;
    for (const auto& f : j["flows"]) {
      if (!f.is_object() || !f.contains("m") || !f.contains("t")) throw ConfigError("flows: each entry needs m and t");
      if (!f["m"].is_number_integer()) throw ConfigError("flows: m must be an integer");
      FlowSpec spec;
      spec.m = f["m"].get<int>();
      spec.t = finite(f["t"], "flows.t");
      if (f.contains("rtol")) spec.rtol = finite(f["rtol"], "flows.rtol");
      if (spec.m < 1 || spec.m > 16) throw ConfigError("flows: m must lie in 1..16");
      if (!(spec.rtol >= 1e-13 && spec.rtol <= 1e-6)) throw ConfigError("flows: rtol must lie in [1e-13, 1e-6]");
      if (!seen.insert(spec.m).second) throw ConfigError("flows: indices must be distinct");
      c.flows.push_back(spec);
    }
  }

  if (j.contains("checks")) {
    if (!j["checks"].is_array()) throw ConfigError("checks: expected a list");
    for (const auto& ch : j["checks"]) {
      CheckSpec spec;
      if (ch.is_string()) {
        spec.name = ch.get<std::string>();
      } else if (ch.is_object() && ch.contains("name") && ch["name"].is_string()) {
        spec.name = ch["name"].get<std::string>();
        if (ch.contains("params")) {
          if (!ch["params"].is_object()) throw ConfigError("checks.params: expected an object");
          for (const auto& [key, v] : ch["params"].items()) spec.params.values[key] = finite(v, "checks.params." + key);
        }
      } else {
        throw ConfigError("checks: entries are names or {name, params}");
      }
      if (!is_registered_check(spec.name)) throw ConfigError("checks: unknown check " + spec.name);
      c.checks.push_back(std::move(spec));
    }
  }

  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ConfigError("seed must be a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("output_dir")) {
    if (!j["output_dir"].is_string()) throw ConfigError("output_dir must be a string");
    c.output_dir = j["output_dir"].get<std::string>();
  }
  if (j.contains("mus")) {
    c.mus = to_complex_list(j["mus"], "mus");
    for (const auto mu : c.mus)
      if (mu == Complex(0.0) || !std::isfinite(std::abs(mu))) throw ConfigError("mus must be finite and nonzero");
  }
  if (j.contains("tau_rows")) {
    if (!j["tau_rows"].is_number_integer() || j["tau_rows"].get<int>() < 2) throw ConfigError("tau_rows must be >= 2");
    c.tau_rows = j["tau_rows"].get<int>();
  }
  if (j.contains("backlund_tol")) c.backlund_tol = finite(j["backlund_tol"], "backlund_tol");
  refresh_digest(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void override_seed(RunConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  refresh_digest(cfg);
}

}  // namespace kpcm::cli
