#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "spinstar/cli/benchmark.hpp"
#include "spinstar/cli/config.hpp"
#include "spinstar/cli/run.hpp"
#include "spinstar/cli/verify.hpp"

using namespace spinstar;
using namespace spinstar::cli;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

namespace fs = std::filesystem;
constexpr double pi = std::numbers::pi;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("spinstar_test_" + name);
  fs::remove_all(dir);
  return dir;
}

json make_config(const fs::path& dir) {
  json j = json::parse(R"({
    "model": {"N": 4, "omega": 0.9, "omega0": 0.2, "couplings": [0.5, 1.2, 0.8, 1.9]},
    "initial": {"up_sites": [3]},
    "grid": {"t_max": 8.0, "num_points": 81},
    "paths": ["closed_form", "oracle"]
  })");
  j["outputs"] = {{"directory", dir.string()}, {"formats", {"csv"}}};
  return j;
}

std::vector<std::string> diagnostics_of(const json& j) {
  try {
    parse_config(j);
  } catch (const validation_error& e) {
    return e.diagnostics();
  }
  return {};
}

bool any_contains(const std::vector<std::string>& items, const std::string& needle) {
  for (const auto& s : items) {
    if (s.find(needle) != std::string::npos) return true;
  }
  return false;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Numeric rows of a CSV file with one header line.
std::vector<std::vector<double>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

RunReport run(const json& j) {
  std::ostringstream log;
  return execute(parse_config(j), ResourceLimits{}, log);
}

}  // namespace

TEST_CASE("config parsing fills defaults", "[cli]") {
  json j = make_config("x");
  j.erase("grid");
  j.erase("paths");
  j.erase("outputs");
  const RunConfig cfg = parse_config(j);
  CHECK(cfg.n == 4);
  CHECK(cfg.up_sites == std::vector<site_t>{3});
  CHECK(cfg.paths == std::vector<PathKind>{PathKind::closed_form});
  CHECK(cfg.formats == std::vector<OutputFormat>{OutputFormat::csv});
  CHECK(cfg.frame == Frame::rotating);
  const Grid g = cfg.resolved_grid();
  CHECK(g.num_points == 1001);
  CHECK(g.t_max == Approx(4 * pi / effective_frequency(cfg.model())));
  CHECK(cfg.times().back() == g.t_max);

  json still = make_config("x");
  still.erase("grid");
  still["model"] = {{"N", 2}, {"omega", 0.5}, {"omega0", 0.5}, {"couplings", {0.0, 0.0}}};
  still["initial"]["up_sites"] = json::array();
  CHECK(parse_config(still).resolved_grid().t_max == Approx(2 * pi));
}

TEST_CASE("coupling specifications", "[cli]") {
  json j = make_config("x");
  j["model"]["couplings"] = {{"uniform", 0.7}};
  CHECK(parse_config(j).couplings == std::vector<double>(4, 0.7));
  j["model"]["couplings"] = {{"random", {{"low", 0.1}, {"high", 2.0}, {"seed", 9}}}};
  const auto a = parse_config(j).couplings;
  CHECK(a == ModelParams::random(4, 0.0, 0.0, 0.1, 2.0, 9).couplings());
  CHECK(parse_config(j).coupling_source == "random");
}

TEST_CASE("config errors name every offending field", "[cli]") {
  json j = make_config("x");
  j["colour"] = "blue";
  j["model"]["omgea"] = 1.0;
  j["grid"]["num_points"] = 1;
  j["grid"]["t_max"] = 0.0;
  j["paths"] = {"closed_form", "magic", "closed_form"};
  j["frame"] = "sideways";
  const auto d = diagnostics_of(j);
  CHECK(any_contains(d, "colour: unknown key"));
  CHECK(any_contains(d, "model.omgea: unknown key"));
  CHECK(any_contains(d, "grid.num_points: must be >= 2"));
  CHECK(any_contains(d, "grid.t_max: must be > 0"));
  CHECK(any_contains(d, "paths[1]: unknown value 'magic'"));
  CHECK(any_contains(d, "paths[2]: duplicate value"));
  CHECK(any_contains(d, "frame:"));

  json k = make_config("x");
  k["model"]["N"] = 2.5;
  k["initial"]["up_sites"] = {3, 9};
  CHECK(any_contains(diagnostics_of(k), "model.N: expected an integer"));

  json m = make_config("x");
  m["model"]["couplings"] = {1.0, 2.0};
  m["initial"]["up_sites"] = {1, 1};
  const auto dm = diagnostics_of(m);
  CHECK(any_contains(dm, "couplings"));
  CHECK(any_contains(dm, "initial.up_sites: sites must be distinct"));

  json n = make_config("x");
  n["initial"]["up_sites"] = {5};
  n["paths"] = {"analytic_p0"};
  n["outputs"]["formats"] = {"oracle_state"};
  const auto dn = diagnostics_of(n);
  CHECK(any_contains(dn, "initial.up_sites[0]: site 5 outside [1, N]"));
  CHECK(any_contains(dn, "analytic_p0 applies only to p = 0"));
  CHECK(any_contains(dn, "oracle_state requires the oracle path"));

  json missing = json::object();
  const auto dmiss = diagnostics_of(missing);
  CHECK(any_contains(dmiss, "model: missing required field"));
  CHECK(any_contains(dmiss, "initial: missing required field"));

  CHECK_THROWS_WITH(parse_config_text("{ not json"), ContainsSubstring("not valid JSON"));
}

TEST_CASE("config hash ignores key order and formatting", "[cli]") {
  const json j = make_config("x");
  const auto a = parse_config_text(j.dump());
  const auto b = parse_config_text(j.dump(4));
  CHECK(a.hash == b.hash);
  json changed = j;
  changed["model"]["omega"] = 0.91;
  CHECK(parse_config(changed).hash != a.hash);
}

TEST_CASE("analytic run gives cos^2 return probability", "[cli]") {
  const auto dir = scratch("analytic");
  json j = json::parse(R"({
    "model": {"N": 1, "omega": 1.0, "omega0": 1.0, "couplings": [1.0]},
    "initial": {"up_sites": []},
    "grid": {"t_max": 6.283185307179586, "num_points": 101},
    "paths": ["analytic_p0"]
  })");
  j["outputs"] = {{"directory", dir.string()}};
  const auto report = run(j);
  CHECK(report.status == exit_code::ok);
  const auto rows = read_csv(dir / "analytic_p0.csv");
  REQUIRE(rows.size() == 101);
  for (const auto& r : rows) CHECK(r[4] == Approx(std::pow(std::cos(r[0]), 2)).margin(1e-14));
}

TEST_CASE("closed form and oracle agree in the manifest", "[cli]") {
  const auto dir = scratch("agreement");
  json j = make_config(dir);
  j["paths"] = {"closed_form", "oracle", "first_order", "series"};
  j["grid"] = {{"t_max", 1.0}, {"num_points", 11}};
  const auto report = run(j);
  CHECK(report.status == exit_code::ok);
  const json manifest = json::parse(slurp(dir / "manifest.json"));
  REQUIRE(manifest["path_agreement"].size() == 6);
  for (const auto& entry : manifest["path_agreement"]) {
    CHECK(entry["max_amplitude_deviation"].get<double>() < 1e-8);
  }
  double sum = manifest["model"]["detuning"].get<double>() * manifest["model"]["detuning"].get<double>();
  for (double a : manifest["model"]["couplings"]) sum += a * a;
  CHECK(manifest["model"]["alpha_eff"].get<double>() == Approx(std::sqrt(sum)).epsilon(1e-15));
  CHECK(manifest["sector"]["dim_a"] == 4);
  CHECK(manifest["sector"]["dim_b"] == 6);
  CHECK(manifest["version"] == SPINSTAR_VERSION);
  CHECK(manifest["config_hash"] == hex(parse_config(j).hash));

  for (const char* path : {"closed_form", "oracle", "first_order", "series"}) {
    for (const auto& r : read_csv(dir / (std::string(path) + ".csv"))) {
      for (std::size_t c : {1u, 2u, 4u}) {
        CHECK(r[c] >= -1e-10);
        CHECK(r[c] <= 1 + 1e-10);
      }
      for (std::size_t c = 3; c < r.size(); c += (c == 3 ? 2 : 1)) {
        CHECK(r[c] >= -0.5 - 1e-10);
        CHECK(r[c] <= 0.5 + 1e-10);
      }
    }
  }
}

TEST_CASE("reruns are bitwise identical", "[cli]") {
  const auto d1 = scratch("rerun1");
  const auto d2 = scratch("rerun2");
  json j = make_config(d1);
  j["model"]["couplings"] = {{"random", {{"low", 0.1}, {"high", 2.0}, {"seed", 3}}}};
  j["outputs"]["formats"] = {"csv", "amplitudes"};
  j["frame"] = "lab";
  run(j);
  j["outputs"]["directory"] = d2.string();
  run(j);
  for (const char* f : {"closed_form.csv", "oracle.csv", "amplitudes_closed_form.csv"}) {
    const std::string a = slurp(d1 / f);
    CHECK(!a.empty());
    CHECK(a == slurp(d2 / f));
  }
}

TEST_CASE("fully polarized bath warns and stays constant", "[cli]") {
  const auto dir = scratch("polarized");
  json j = make_config(dir);
  j["initial"]["up_sites"] = {1, 2, 3, 4};
  std::ostringstream log;
  const auto report = execute(parse_config(j), ResourceLimits{}, log);
  CHECK(report.status == exit_code::ok);
  CHECK(any_contains(report.warnings, "p=N eigenstate"));
  CHECK_THAT(log.str(), ContainsSubstring("p=N eigenstate"));
  const auto rows = read_csv(dir / "closed_form.csv");
  for (const auto& r : rows) {
    for (std::size_t c = 1; c < r.size(); ++c) CHECK(r[c] == Approx(rows[0][c]).margin(1e-14));
  }
}

TEST_CASE("series path outside its validity bound is rejected", "[cli]") {
  const auto dir = scratch("series");
  json j = make_config(dir);
  j["paths"] = {"series"};
  j["grid"]["t_max"] = 20.0;
  CHECK_THROWS_WITH(run(j), ContainsSubstring("series requires"));
}

TEST_CASE("exit codes", "[cli]") {
  const auto dir = scratch("codes");
  const fs::path cfg = dir / "config.json";
  fs::create_directories(dir);
  auto write = [&](const json& j) { std::ofstream(cfg) << j.dump(); };
  std::ostringstream out, err;

  json good = make_config(dir / "out");
  write(good);
  CHECK(run_command(cfg.string(), out, err, ResourceLimits{}) == exit_code::ok);

  json bad = good;
  bad["grid"]["num_points"] = 0;
  write(bad);
  CHECK(run_command(cfg.string(), out, err, ResourceLimits{}) == exit_code::invalid);
  CHECK_THAT(err.str(), ContainsSubstring("grid.num_points"));

  ResourceLimits tight;
  tight.max_sector_dim = 5;
  write(good);
  err.str("");
  CHECK(run_command(cfg.string(), out, err, tight) == exit_code::resource_limit);
  CHECK_THAT(err.str(), ContainsSubstring("sector too large") && ContainsSubstring("C(N,p)=4") &&
                            ContainsSubstring("C(N,p+1)=6"));

  json big = good;
  big["model"] = {{"N", 13}, {"omega", 1.0}, {"omega0", 1.0}, {"couplings", {{"uniform", 0.5}}}};
  big["initial"]["up_sites"] = {1};
  write(big);
  CHECK(run_command(cfg.string(), out, err, ResourceLimits{}) == exit_code::resource_limit);

  CHECK(run_command((dir / "absent.json").string(), out, err, ResourceLimits{}) == exit_code::invalid);
}

TEST_CASE("verify passes on the quick scope and reports a mutated companion", "[cli]") {
  const auto report = run_verify(VerifyOptions::quick());
  CHECK(report.passed());
  for (const auto& r : report.invariants) {
    INFO(r.name);
    CHECK(r.max_deviation < 1e-8);
    CHECK(r.checks > 0);
  }

  VerifyOptions mutated{3, 2, 0, flip_first_off_diagonal};
  const auto broken = run_verify(mutated);
  CHECK_FALSE(broken.passed());
  CHECK_FALSE(broken.find("decoupling").passed());
  CHECK(broken.find("combinatorics").passed());

  std::ostringstream out, err;
  CHECK(verify_command(mutated, out, err) == exit_code::invariant_failure);
  CHECK_THAT(out.str(), ContainsSubstring("decoupling,FAIL"));
  CHECK_THAT(err.str(), ContainsSubstring("verify failure: decoupling"));

  VerifyOptions none{0, 5, 0, {}};
  CHECK_THROWS_AS(run_verify(none), validation_error);
  CHECK(verify_command(none, out, err) == exit_code::invalid);
}

TEST_CASE("benchmark spec parsing", "[cli]") {
  const auto spec = parse_benchmark_spec(json::parse(R"({"cases": [{"N": 10, "p": 2}]})"));
  CHECK(spec.cases.size() == 1);
  CHECK(spec.seed == 1);
  CHECK(spec.num_times == 101);
  CHECK_THROWS_AS(parse_benchmark_spec(json::parse(R"({"cases": [{"N": 3, "p": 4}]})")),
                  validation_error);
  CHECK_THROWS_AS(parse_benchmark_spec(json::parse(R"({"cases": [], "extra": 1})")),
                  validation_error);
}

TEST_CASE("benchmark gates infeasible sectors", "[cli]") {
  BenchmarkSpec spec;
  spec.cases = {{100, 0}, {20, 10}, {12, 3}};
  spec.num_times = 11;
  std::ostringstream progress;
  const auto rows = run_benchmark(spec, ResourceLimits{}, progress);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].status == "ok");
  CHECK(rows[0].dim_a == 1);
  CHECK(rows[0].dim_b == 100);
  CHECK(rows[0].max_norm_drift < 1e-10);
  CHECK(rows[1].status == "skipped");
  CHECK(rows[1].dim_a == 184756);
  CHECK(rows[1].dim_b == 167960);
  CHECK_THAT(rows[1].reason, ContainsSubstring("memory guard"));
  CHECK(rows[2].status == "ok");

  ResourceLimits tight;
  tight.max_sector_dim = 100;
  const auto capped = benchmark_case({12, 3}, spec, tight);
  CHECK(capped.status == "skipped");
  CHECK_THAT(capped.reason, ContainsSubstring("sector too large"));

  std::ostringstream csv;
  write_benchmark_header(csv);
  write_benchmark_row(csv, rows[1]);
  CHECK_THAT(csv.str(), ContainsSubstring("20,10,184756,167960,skipped,"));
  CHECK_THAT(csv.str(), ContainsSubstring("\"memory guard"));
}
