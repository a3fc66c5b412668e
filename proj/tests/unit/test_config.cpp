#include <doctest.h>

#include <string>

#include "ldplab/config.hpp"
#include "ldplab/error.hpp"

using namespace ldplab;

namespace {

const char* kBase = R"(
seed = 7
paths = 200

[grid]
dim = 1
resolution = 32

[coefficients]
preset = "burgers"
k = 2

[time]
T = 0.5
dt = 0.0078125

[noise]
eps = 0.05
)";

// Same content with sections and keys in a different order.
const char* kReordered = R"(
paths = 200
seed = 7

[noise]
eps = 0.05

[time]
dt = 0.0078125
T = 0.5

[coefficients]
k = 2
preset = "burgers"

[grid]
resolution = 32
dim = 1
)";

std::string field_of(const std::string& text, const std::vector<Override>& o = {}) {
  try {
    load_config(text, o);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST_CASE("configs load with defaults filled in") {
  const auto c = load_config(kBase);
  CHECK(c.seed == 7);
  CHECK(c.paths == 200);
  CHECK(c.grid.resolution == 32);
  CHECK(c.coefficients.preset == "burgers");
  CHECK(c.coefficients.preset_options.k == 2);
  CHECK(c.rho == 5.0);  // max(2 nu, d + 1) + 1 with nu = 2
  CHECK(c.event.rho == 5.0);
  CHECK(make_times(c).steps() == 64);
  CHECK(make_grid(c).size() == 31);
  const auto d = load_config("");
  CHECK(d.coefficients.preset == "linear_gaussian");
  CHECK(d.rho == 3.0);
}

TEST_CASE("config hash is canonical") {
  const auto a = load_config(kBase), b = load_config(kBase), r = load_config(kReordered);
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) == config_hash(r));
  CHECK(config_hash(a).size() == 64);
  const auto s = load_config(kBase, {{"seed", "8"}});
  CHECK(config_hash(s) != config_hash(a));
  // spelling out a default does not change the hash
  const auto explicit_default = load_config(std::string(kBase) + "\n[output]\nsvg = true\n");
  CHECK(config_hash(explicit_default) == config_hash(a));
}

TEST_CASE("manifest echo reloads to the same config") {
  const auto a = load_config(kBase, {{"control.kind", "\"constant\""}, {"control.values", "[0.5, -0.5]"},
                                     {"event.kind", "\"tube_exit\""}, {"evolver.blowup_threshold", "inf"}});
  const auto echo = config_to_json(a);
  const auto b = load_config_tree(echo);
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_to_json(b) == echo);
}

TEST_CASE("overrides use TOML values and dotted keys") {
  CHECK(parse_override("time.T = 2").first == "time.T");
  CHECK(parse_override("time.T = 2").second == "2");
  CHECK_THROWS_AS(parse_override("novalue"), ConfigError);
  const auto c = load_config(kBase, {{"time.T", "1.0"}, {"noise.eps_grid", "[0.3, 0.2, 0.1]"},
                                     {"estimator.method", "plain"}, {"event.x0", "[0.25]"}});
  CHECK(c.time.T == 1.0);
  CHECK(c.noise.eps_grid.size() == 3);
  CHECK(c.estimator.method == "plain");
  CHECK(c.event.x0[0] == 0.25);
}

TEST_CASE("invalid configs name the offending field") {
  CHECK(field_of(kBase, {{"grid.dim", "3"}}) == "grid.dim");
  CHECK(field_of(kBase, {{"time.dt", "0.3"}}) == "time.dt");
  CHECK(field_of(kBase, {{"time.T", "-1"}}) == "time.T");
  CHECK(field_of(kBase, {{"noise.eps", "-0.1"}}) == "noise.eps");
  CHECK(field_of(kBase, {{"rho", "0.5"}}) == "rho");
  CHECK(field_of(kBase, {{"grid.colour", "1"}}) == "grid.colour");
  CHECK(field_of(kBase, {{"coefficients.preset", "\"heat\""}}) == "coefficients.preset");
  CHECK(field_of(kBase, {{"control.kind", "\"constant\""}, {"control.values", "[1.0]"}}) == "control.values");
  CHECK(field_of(kBase, {{"coefficients.nu", "2"}}) == "coefficients.nu");
  CHECK(field_of(kBase, {{"grid.resolution", "\"many\""}}) == "grid.resolution");
}

TEST_CASE("rho without a declared growth exponent is an error naming rho") {
  const std::string custom = R"(
[coefficients]
preset = "custom"
sigma = [[1.0]]
)";
  CHECK(field_of(custom) == "rho");
  const auto ok = load_config("rho = 4\n" + custom);
  CHECK(ok.rho == 4.0);
  const auto declared = load_config(std::string("[coefficients]\npreset = \"custom\"\nnu = 1.5\nsigma = [[1.0]]\n"));
  CHECK(declared.rho == 4.0);
}

TEST_CASE("parse errors report line and column") {
  try {
    load_config("seed = 1\n[grid\nresolution = 3\n");
    FAIL("expected a parse error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(msg.find("column") != std::string::npos);
  }
}

TEST_CASE("objects built from a config") {
  auto c = load_config(kBase, {{"initial.kind", "\"gaussian\""}, {"initial.width", "0.05"}, {"initial.amplitude", "2"}});
  const Grid g = make_grid(c);
  const auto xi = make_field(c.initial, g);
  const std::size_t mid = g.nearest_interior({0.5, 0.0});
  CHECK(xi[mid] == doctest::Approx(2.0));
  const auto coeffs = make_coefficients(c);
  CHECK(coeffs.k == 2);
  CHECK(coeffs.nu == 2.0);
  const auto ev = make_event(c, g);
  CHECK(ev.kind == TargetKind::terminal_functional_threshold);
  CHECK(make_control(c.control, make_times(c), 2).is_zero());
  c.op.kind = "constant";
  c.op.b = {{{2.0, 0.5}, {0.5, 1.0}}};
  c.grid.dim = 2;
  c.grid.resolution = 6;
  CHECK_NOTHROW(assemble_operator(make_grid(c), make_elliptic(c)));
  c.op.b = {{{1.0, 2.0}, {2.0, 1.0}}};
  CHECK_THROWS_AS(make_elliptic(c), ConfigError);
}
