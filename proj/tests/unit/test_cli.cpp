#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ldplab/cli.hpp"
#include "ldplab/config.hpp"
#include "ldplab/field.hpp"
#include "ldplab/kernel_operator.hpp"

using namespace ldplab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("ldplab_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_quiet(CliOptions o, std::string* err_text = nullptr) {
  std::ostringstream log, err;
  const int code = run(o, log, err);
  if (err_text) *err_text = err.str();
  return code;
}

}  // namespace

TEST_CASE("verify-kernel on the default grid reports lambda near one") {
  CliOptions o;
  o.subcommand = "verify-kernel";
  o.out = scratch("kernel");
  REQUIRE(run_quiet(o) == kExitOk);
  const auto rep = read_json(o.out / "kernel_report.json");
  CHECK(rep["lambda_p"].get<double>() == doctest::Approx(1.0).epsilon(0.05));
  CHECK(fs::exists(o.out / "eigen.csv"));
  CHECK(read_text(o.out / "eigen.csv").rfind("index,eigenvalue\n1,", 0) == 0);
  const auto m = read_json(o.out / "manifest.json");
  CHECK(m["status"] == "ok");
  CHECK(m["config_hash"].get<std::string>().size() == 64);
}

TEST_CASE("noise-free simulate without drift or flux writes the heat flow") {
  CliOptions o;
  o.subcommand = "simulate";
  o.out = scratch("heat");
  o.overrides = {"noise.eps=0", "grid.resolution=16", "time.T=0.25", "time.dt=0.015625"};
  REQUIRE(run_quiet(o) == kExitOk);
  const auto cfg = load_config_tree(read_json(o.out / "manifest.json")["config"]);
  const Grid g = make_grid(cfg);
  const auto op = assemble_operator(g, EllipticCoefficients::identity());
  const auto times = make_times(cfg);
  SpaceTimeField heat(g, times, cfg.rho);
  const auto xi = make_field(cfg.initial, g);
  for (std::size_t m = 0; m <= times.steps(); ++m) {
    const auto v = op.apply(times.times[m], xi);
    std::copy(v.begin(), v.end(), heat.at(m).begin());
  }
  // stepping by dt and applying G_t directly agree up to roundoff
  const auto snap = read_snapshot(o.out / "field.bin");
  CHECK(sup_distance(snap, heat, INFINITY) <= 1e-12);
  std::ostringstream expect;
  write_field_csv(heat, expect);
  const auto text = read_text(o.out / "field.csv"), ref = expect.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == std::count(ref.begin(), ref.end(), '\n'));
}

TEST_CASE("missing rho without a declared nu exits with a config error") {
  const auto dir = scratch("rho");
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "run.toml");
    cfg << "[coefficients]\npreset = \"custom\"\nsigma = [[1.0]]\n";
  }
  CliOptions o;
  o.subcommand = "simulate";
  o.config = dir / "run.toml";
  o.out = dir / "out";
  std::string err;
  CHECK(run_quiet(o, &err) == kExitConfig);
  CHECK(err.find("rho") != std::string::npos);
  const auto diag = read_json(o.out / "diagnostics.json");
  CHECK(diag["field"] == "rho");
  CHECK(diag["exit_code"] == 2);
}

TEST_CASE("numerical failures exit with code 3 and a diagnostics file") {
  CliOptions o;
  o.subcommand = "simulate";
  o.out = scratch("guard");
  o.overrides = {"coefficients.preset=\"burgers\"", "time.dt=0.25", "noise.eps=0"};
  CHECK(run_quiet(o) == kExitNumerical);
  const auto diag = read_json(o.out / "diagnostics.json");
  CHECK(diag["kind"] == "step_guard");
  CHECK(read_json(o.out / "manifest.json")["status"] == "error");
}

TEST_CASE("a manifest reruns to identical artifacts") {
  CliOptions o;
  o.subcommand = "simulate";
  o.out = scratch("rerun_a");
  o.seed = 1234;
  o.workers = 3;
  o.overrides = {"paths=40", "grid.resolution=16", "time.T=0.125", "time.dt=0.015625", "coefficients.preset=\"burgers\""};
  REQUIRE(run_quiet(o) == kExitOk);
  CliOptions r;
  r.subcommand = "simulate";
  r.config = o.out / "manifest.json";
  r.out = scratch("rerun_b");
  r.workers = 1;
  REQUIRE(run_quiet(r) == kExitOk);
  CHECK(read_json(o.out / "manifest.json")["config_hash"] == read_json(r.out / "manifest.json")["config_hash"]);
  CHECK(read_text(o.out / "field.csv") == read_text(r.out / "field.csv"));
  CHECK(read_text(o.out / "paths.csv") == read_text(r.out / "paths.csv"));
}

TEST_CASE("every subcommand runs on a small config") {
  const std::vector<std::string> small = {"grid.resolution=8",  "time.T=0.125", "time.dt=0.015625",
                                          "paths=1000",         "noise.eps=0.2", "noise.eps_grid=[0.4, 0.2, 0.1]",
                                          "event.level=0.3",    "initial.kind=\"zero\"", "kernel.gaussian_samples=50"};
  for (const auto& name : subcommand_names()) {
    CAPTURE(name);
    CliOptions o;
    o.subcommand = name;
    o.out = scratch("all_" + name);
    o.overrides = small;
    o.workers = 2;
    CHECK(run_quiet(o) == kExitOk);
    const auto m = read_json(o.out / "manifest.json");
    CHECK(m["status"] == "ok");
    CHECK(m["subcommand"] == name);
    for (const auto& a : m["artifacts"]) CHECK(fs::exists(o.out / a.get<std::string>()));
  }
}

TEST_CASE("command line binary") {
  const auto out = scratch("binary");
  const std::string cmd = std::string(LDPLAB_CLI_PATH) + " validate-coeffs --out " + out.string() +
                          " --seed 5 --override coefficients.preset=\\\"burgers\\\" > /dev/null";
  CHECK(std::system(cmd.c_str()) == 0);
  const auto v = read_json(out / "validation.json");
  CHECK(v["validated_nu"] == 2.0);
  CHECK(read_json(out / "manifest.json")["seed"] == 5);
  const std::string bad = std::string(LDPLAB_CLI_PATH) + " simulate --out " + out.string() +
                          " --override grid.dim=7 > /dev/null 2>&1";
  const int status = std::system(bad.c_str());
  CHECK(WEXITSTATUS(status) == 2);
}
