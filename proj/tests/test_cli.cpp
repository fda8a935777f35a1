#include <cmath>
#include <string>
#include <vector>

#include "cli/config.hpp"
#include "cli_support.hpp"
#include "doctest.h"
#include "kpcm/suite.hpp"

using namespace kpcm;
using namespace kpcm::cli;
using namespace kpcm::testing;

namespace {

using Table = std::vector<std::vector<std::string>>;

/// Rows of a CSV file, header first, comment lines dropped.
Table read_csv(const fs::path& path) {
  Table rows;
  std::istringstream in(read_text(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

std::size_t column(const Table& t, const std::string& name) {
  for (std::size_t i = 0; i < t.at(0).size(); ++i)
    if (t[0][i] == name) return i;
  FAIL("missing column " << name);
  return 0;
}

double cell(const Table& t, std::size_t row, const std::string& name) { return std::stod(t.at(row).at(column(t, name))); }

std::string first_line(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::getline(in, line);
  return line;
}

const std::string kThree = kThreeBody;

}  // namespace

TEST_CASE("config parsing accepts both complex forms") {
  const RunConfig c = parse_config(R"({"gamma": [0.0, 1.0], "x0": [0.5, [1.0, -0.25]], "p0": [0, 0],
                                       "flows": [{"m": 3, "t": -0.2}], "checks": ["bilinear",
                                       {"name": "contour", "params": {"nodes": 256}}], "seed": 9,
                                       "mus": [4.0, [1, 2]], "tau_rows": 3, "backlund_tol": 1e-9})");
  CHECK(c.gamma == Complex(0.0, 1.0));
  REQUIRE(c.x0.size() == 2);
  CHECK(c.x0[1] == Complex(1.0, -0.25));
  REQUIRE(c.flows.size() == 1);
  CHECK(c.flows[0].m == 3);
  CHECK(c.flows[0].t == -0.2);
  CHECK(c.flows[0].rtol == 1e-10);
  REQUIRE(c.checks.size() == 2);
  CHECK(c.checks[1].params.get_int("nodes", 0) == 256);
  CHECK(c.seed == 9);
  CHECK(c.mus[1] == Complex(1.0, 2.0));
  CHECK(c.tau_rows == 3);
  CHECK(c.digest.size() == 64);
}

TEST_CASE("config validation rejects bad input") {
  const char* bad[] = {
      "not json",
      "[1, 2]",
      R"({"x0": [0], "p0": [0]})",
      R"({"gamma": 0, "x0": [0], "p0": [0]})",
      R"({"gamma": [0, 0], "x0": [0], "p0": [0]})",
      R"({"gamma": 1, "x0": [0, 1], "p0": [0]})",
      R"({"gamma": 1, "x0": [], "p0": []})",
      R"({"gamma": 1, "x0": [0], "p0": [0], "extra": 1})",
      R"({"gamma": 1, "x0": [0], "p0": [0], "flows": [{"m": 0, "t": 1}]})",
      R"({"gamma": 1, "x0": [0], "p0": [0], "flows": [{"m": 17, "t": 1}]})",
      R"({"gamma": 1, "x0": [0], "p0": [0], "flows": [{"m": 2, "t": 1}, {"m": 2, "t": 2}]})",
      R"({"gamma": 1, "x0": [0], "p0": [0], "flows": [{"m": 2, "t": 1, "rtol": 1e-15}]})",
      R"({"gamma": 1, "x0": [0], "p0": [0], "flows": [{"m": 2, "t": 1, "rtol": 1e-3}]})",
      R"({"gamma": 1, "x0": [0], "p0": [0], "flows": [{"m": 2.5, "t": 1}]})",
      R"({"gamma": 1, "x0": [0], "p0": [0], "checks": ["no_such_check"]})",
      R"({"gamma": 1, "x0": [0], "p0": [0], "seed": -1})",
      R"({"gamma": 1, "x0": [0], "p0": [0], "mus": [0]})",
      R"({"gamma": 1, "x0": [0], "p0": [0], "tau_rows": 1})",
      R"({"gamma": 1, "x0": [[0, 1, 2]], "p0": [0]})",
  };
  for (const char* text : bad) {
    CAPTURE(text);
    CHECK_THROWS_AS(parse_config(text), ConfigError);
  }
}

TEST_CASE("config digest is canonical") {
  const RunConfig a = parse_config(R"({"gamma": 1, "x0": [0.5], "p0": [0.1], "seed": 3, "output_dir": "one"})");
  const RunConfig b =
      parse_config("{ \"output_dir\": \"two\",\n \"p0\": [[0.1, 0]], \"seed\": 3, \"x0\": [0.5], \"gamma\": [1, 0] }");
  CHECK(a.digest == b.digest);
  RunConfig c = a;
  override_seed(c, 4);
  CHECK(c.digest != a.digest);
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("exit code 2 for configuration problems") {
  const fs::path dir = scratch_dir("cli-config");
  CHECK(run_config(dir, "gamma0", "simulate", R"({"gamma": 0.0, "x0": [0.0], "p0": [0.0]})") == 2);
  CHECK(run_config(dir, "noflows", "simulate", R"({"gamma": 1.0, "x0": [0.0], "p0": [0.0]})") == 2);
  CHECK(run_config(dir, "json", "verify", "{") == 2);
  CHECK(run_cli("simulate --config \"" + (dir / "missing.json").string() + "\"") == 2);
  CHECK(run_cli("verify") == 2);
  CHECK(run_cli("bogus --config x") == 2);
  CHECK(run_config(dir, "jobs", "verify", R"({"gamma": 1.0, "x0": [0.0], "p0": [0.0]})", "a", "--jobs 0") == 2);
  fs::remove_all(dir);
}

TEST_CASE("exit code 3 on collision with a diagnostic row") {
  const fs::path dir = scratch_dir("cli-collide");
  CHECK(run_config(dir, "mid", "simulate", kCollision) == 3);
  const Table t = read_csv(dir / "mid-a" / "simulate.csv");
  REQUIRE(t.size() > 2);
  const auto& last = t.back();
  CHECK((last[2] == "PoleCollision" || last[2] == "StepUnderflow"));
  const double t_fail = std::stod(last[1]);
  CHECK(t_fail > 0.0);
  CHECK(t_fail < 1.0);
  CHECK(std::stod(t[t.size() - 2][1]) <= t_fail);

  CHECK(run_config(dir, "start", "simulate",
                   R"({"gamma": 1.0, "x0": [0.0, 1e-9], "p0": [0.0, 0.0], "flows": [{"m": 2, "t": 1}]})") == 3);
  CHECK(run_config(dir, "tau", "tau-compare",
                   R"({"gamma": 1.0, "x0": [[0, 0], [0, 0.5]], "p0": [0, 0], "flows": [{"m": 2, "t": 1}]})") == 3);
  fs::remove_all(dir);
}

TEST_CASE("exit code 1 when a check fails") {
  const fs::path dir = scratch_dir("cli-fail");
  CHECK(run_config(dir, "verify", "verify",
                   "{" + kThree + R"(, "checks": [{"name": "comm_defect", "params": {"tol": 0}}, "tau_det"]})") == 1);
  const Table t = read_csv(dir / "verify-a" / "verify.csv");
  REQUIRE(t.size() == 3);
  CHECK(t[1][0] == "comm_defect");
  CHECK(t[1][1] == "fail");
  CHECK(t[2][0] == "tau_det");
  CHECK(t[2][1] == "pass");
  fs::remove_all(dir);
}

TEST_CASE("runs are byte-identical and carry the config digest") {
  const fs::path dir = scratch_dir("cli-determinism");
  const std::string cfg = "{" + kThree + R"(, "flows": [{"m": 2, "t": 0.3}, {"m": 4, "t": 0.05}], "seed": 11})";
  REQUIRE(run_config(dir, "sim", "simulate", cfg, "a") == 0);
  REQUIRE(run_config(dir, "sim", "simulate", cfg, "b", "--jobs 3") == 0);
  const std::string a = read_text(dir / "sim-a" / "simulate.csv");
  CHECK(!a.empty());
  CHECK(a == read_text(dir / "sim-b" / "simulate.csv"));
  const std::string digest = parse_config(cfg).digest;
  CHECK(first_line(dir / "sim-a" / "simulate.csv") == "# config-digest: " + digest);

  REQUIRE(run_config(dir, "sim", "simulate", cfg, "c", "--seed 12") == 0);
  CHECK(first_line(dir / "sim-c" / "simulate.csv") != "# config-digest: " + digest);

  const std::string ver = "{" + kThree + R"(, "checks": ["bilinear", "rank_one", "lax_defect"], "seed": 2})";
  REQUIRE(run_config(dir, "ver", "verify", ver, "a") == 0);
  REQUIRE(run_config(dir, "ver", "verify", ver, "b", "--jobs 3") == 0);
  CHECK(read_text(dir / "ver-a" / "verify.csv") == read_text(dir / "ver-b" / "verify.csv"));
  CHECK(fs::exists(dir / "ver-a" / "verify.json"));
  fs::remove_all(dir);
}

TEST_CASE("simulate: free particle and centre of mass") {
  const fs::path dir = scratch_dir("cli-simulate");
  REQUIRE(run_config(dir, "free", "simulate",
                     R"({"gamma": 1.0, "x0": [0.3], "p0": [0.7], "flows": [{"m": 2, "t": 0.5}]})") == 0);
  Table t = read_csv(dir / "free-a" / "simulate.csv");
  REQUIRE(t.size() > 2);
  for (std::size_t r = 1; r < t.size(); ++r) {
    const double time = cell(t, r, "t");
    CHECK(cell(t, r, "re_x1") == doctest::Approx(0.3 + 1.4 * time).epsilon(1e-12));
    CHECK(std::abs(cell(t, r, "re_p1") - 0.7) < 1e-14);
  }
  CHECK(cell(t, t.size() - 1, "t") == 0.5);

  // dx_i/dt_2 = 2 p_i + interaction terms that cancel in the sum.
  REQUIRE(run_config(dir, "com", "simulate", "{" + kThree + R"(, "flows": [{"m": 2, "t": 0.5}]})") == 0);
  t = read_csv(dir / "com-a" / "simulate.csv");
  const Complex p_mean = (Complex(0.3, 0.05) + Complex(-0.1, 0.0) + Complex(-0.25, -0.05)) / 3.0;
  const Complex com0(0.1 / 3.0, 0.05 / 3.0);
  for (std::size_t r = 1; r < t.size(); ++r) {
    const Complex com(cell(t, r, "re_com"), cell(t, r, "im_com"));
    CHECK(std::abs(com - (com0 + 2.0 * p_mean * cell(t, r, "t"))) < 1e-9);
    CHECK(cell(t, r, "drift_H1") < 1e-12);
    CHECK(cell(t, r, "drift_H2") < 1e-8);
  }
  fs::remove_all(dir);
}

TEST_CASE("tau-compare: exact at t = 0 and for the shift flow") {
  const fs::path dir = scratch_dir("cli-tau");
  const std::string cfg =
      "{" + kThree + R"(, "flows": [{"m": 1, "t": 0.5, "rtol": 1e-12}, {"m": 2, "t": 0.5, "rtol": 1e-12}], "tau_rows": 6})";
  REQUIRE(run_config(dir, "tau", "tau-compare", cfg) == 0);
  const Table t = read_csv(dir / "tau-a" / "tau_compare.csv");
  int combined = 0;
  for (std::size_t r = 1; r < t.size(); ++r) {
    CAPTURE(r);
    CHECK(t[r][2] == "ok");
    const int m = std::stoi(t[r][0]);
    const double dev = cell(t, r, "deviation");
    if (m == 0) ++combined;
    if (cell(t, r, "t") == 0.0 || m == 1)
      CHECK(dev <= 1e-12);
    else
      CHECK(dev <= 1e-7);
  }
  CHECK(combined == 1);
  CHECK(t.size() == 1 + 6 + 6 + 1);
  fs::remove_all(dir);
}

TEST_CASE("backlund: scalar case and row statuses") {
  const fs::path dir = scratch_dir("cli-backlund");
  REQUIRE(run_config(dir, "one", "backlund", R"({"gamma": 1.0, "x0": [0.0], "p0": [0.0], "mus": [-2.0, 20.0]})") ==
          0);
  const Table t = read_csv(dir / "one-a" / "backlund.csv");
  REQUIRE(t.size() == 3);
  CHECK(t[1][2] == "ok");
  CHECK(cell(t, 1, "re_y1") == doctest::Approx(-0.5 * std::log(3.0)).epsilon(1e-12));
  CHECK(std::abs(cell(t, 1, "im_y1")) < 1e-14);
  CHECK(cell(t, 2, "re_y1") == doctest::Approx(std::atanh(1.0 / 20.0)).epsilon(1e-12));
  CHECK(cell(t, 2, "canonical_defect") < 1e-10 * 21.0);

  REQUIRE(run_config(dir, "three", "backlund", "{" + kThree + R"(, "mus": [20.0, 40.0]})") == 0);
  const Table u = read_csv(dir / "three-a" / "backlund.csv");
  REQUIRE(u.size() == 3);
  // the K = 1 remainder falls off like mu^-2
  const double r = cell(u, 1, "expansion_K1") / cell(u, 2, "expansion_K1");
  CHECK(std::log2(r) == doctest::Approx(2.0).epsilon(0.15));
  fs::remove_all(dir);
}
