#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ldplab/action.hpp"
#include "ldplab/coefficients.hpp"
#include "ldplab/evolvers.hpp"
#include "ldplab/kernel_operator.hpp"
#include "ldplab/stochastics.hpp"

namespace ldplab {

struct GridConfig {
  int dim = 1;
  double lo = 0.0;
  double hi = 1.0;
  int resolution = 64;
};

// laplacian: b = I; constant: fixed symmetric b; isotropic: b = (1 + amplitude sin(pi x)) I.
struct OperatorConfig {
  std::string kind = "laplacian";
  Matrix2 b{{{1.0, 0.0}, {0.0, 1.0}}};
  double amplitude = 0.0;
};

// zero, constant, sine (amplitude prod sin(pi x)), gaussian (amplitude exp(-|x-c|^2 / 2 width^2)).
struct FieldConfig {
  std::string kind = "sine";
  double amplitude = 1.0;
  Point center{0.5, 0.5};
  double width = 0.1;
};

struct CoefficientConfig {
  std::string preset = "linear_gaussian";  // or "custom"
  PresetOptions preset_options;
  CustomCoefficients custom;
  bool custom_nu_declared = true;
  double truncation = 0.0;
};

struct TimeConfig {
  double T = 1.0;
  double dt = 1.0 / 64.0;
};

struct NoiseConfig {
  double eps = 0.1;
  std::vector<double> eps_grid{0.4, 0.2, 0.1, 0.05};
};

struct EventConfig {
  std::string kind = "point_exceedance";  // point_exceedance, mean_exceedance, ball_exit, tube_exit, terminal_field
  Point x0{0.5, 0.5};
  double level = 1.0;
  double rho = 0.0;  // <= 0: the run's rho
  FieldConfig target{"sine", 0.5, {0.5, 0.5}, 0.1};
};

// zero, constant (values), csv (path), optimal (minimizer of the event's action).
struct ControlConfig {
  std::string kind = "zero";
  std::vector<double> values;
  std::string path;
  std::optional<double> bound;
};

struct EstimatorConfig {
  std::string method = "importance";
};

struct KernelConfig {
  double p = 1.0;
  std::size_t time_samples = 12;
  std::size_t gaussian_samples = 1000;
};

struct ConvergenceConfig {
  FieldConfig eta{"zero", 0.0, {0.5, 0.5}, 0.1};
  std::vector<double> chi;  // constant perturbation of the control; empty: zero
  std::string gamma = "identity";
};

struct TightnessConfig {
  std::vector<double> C{0.5, 1.0, 2.0, 4.0};
};

struct OutputConfig {
  bool svg = true;
  bool snapshot = true;
};

struct RunConfig {
  GridConfig grid;
  OperatorConfig op;
  CoefficientConfig coefficients;
  FieldConfig initial;
  TimeConfig time;
  NoiseConfig noise;
  double rho = 0.0;  // resolved: always > d after load
  std::uint64_t seed = 1;
  std::size_t paths = 1000;
  EventConfig event;
  ActionOptions optimizer;
  ControlConfig control;
  EstimatorConfig estimator;
  EvolverOptions evolver;
  KernelConfig kernel;
  ConvergenceConfig convergence;
  TightnessConfig tightness;
  OutputConfig output;
};

// "key.path=value" with the value parsed as a TOML value (bare words fall back to strings).
using Override = std::pair<std::string, std::string>;
Override parse_override(const std::string& text);

// Throws ConfigError naming the offending field; parse failures report line and column.
RunConfig load_config(const std::string& toml_text, const std::vector<Override>& overrides = {},
                      const std::string& source = "config");
// Same rules applied to an already parsed tree (JSON configs and manifest echoes).
RunConfig load_config_tree(nlohmann::json root, const std::vector<Override>& overrides = {});
// .json files are read as JSON (a manifest's "config" echo included), anything else as TOML.
RunConfig load_config_file(const std::filesystem::path& path, const std::vector<Override>& overrides = {});

// Canonical JSON echo of the fully resolved config (sorted keys, defaults filled in).
nlohmann::json config_to_json(const RunConfig& c);
// SHA-256 hex digest of the canonical echo. Key order and omitted defaults do not matter.
std::string config_hash(const RunConfig& c);

// Objects built from a config.
Grid make_grid(const RunConfig& c);
EllipticCoefficients make_elliptic(const RunConfig& c);
CoefficientSet make_coefficients(const RunConfig& c);
TimeGrid make_times(const RunConfig& c);
std::vector<double> make_field(const FieldConfig& f, const Grid& grid);
Control make_control(const ControlConfig& c, const TimeGrid& grid, int k);
TargetSpec make_event(const RunConfig& c, const Grid& grid);
EvolverOptions evolver_options(const RunConfig& c);

}  // namespace ldplab
