#include "ldplab/cli.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ldplab/action.hpp"
#include "ldplab/config.hpp"
#include "ldplab/error.hpp"
#include "ldplab/evolvers.hpp"
#include "ldplab/field.hpp"
#include "ldplab/kernel_estimates.hpp"
#include "ldplab/ldp_lab.hpp"
#include "ldplab/parallel.hpp"
#include "ldplab/rng.hpp"
#include "ldplab/simd/kernels.hpp"
#include "ldplab/svg_plot.hpp"

namespace ldplab {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::uint64_t kSimulateTag = 0x10;
constexpr std::uint64_t kControlledTag = 0x11;
constexpr std::uint64_t kEstimateTag = 0x20;
constexpr std::uint64_t kConvergeTag = 0x40;

json number_or_string(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

// Everything a subcommand needs, built once from the resolved config.
struct Context {
  RunConfig cfg;
  Grid grid;
  KernelOperator op;
  CoefficientSet coeffs;
  TimeGrid times;
  std::vector<double> xi;
  EvolverOptions evolver;
  ActionOptions optimizer;
  fs::path out;
  int workers = 1;
  std::ostream* log = nullptr;
  std::vector<std::string> artifacts;
  json summary = json::object();

  std::ofstream open(const std::string& name) {
    std::ofstream f(out / name);
    if (!f) throw ConfigError("out", "cannot write " + (out / name).string());
    f.precision(17);
    artifacts.push_back(name);
    *log << "  wrote " << (out / name).string() << '\n';
    return f;
  }

  void write_json(const std::string& name, const json& j) { open(name) << j.dump(2) << '\n'; }

  void svg(const std::string& name, const PlotSpec& spec, const std::vector<PlotSeries>& series) {
    if (!cfg.output.svg) return;
    auto f = open(name);
    write_svg_plot(spec, series, f);
  }

  void field(const std::string& stem, const SpaceTimeField& f) {
    auto csv = open(stem + ".csv");
    write_field_csv(f, csv);
    if (cfg.output.snapshot) {
      write_snapshot(f, out / (stem + ".bin"));
      artifacts.push_back(stem + ".bin");
    }
  }

  void control(const std::string& name, const Control& c) {
    auto f = open(name);
    write_control_csv(c, f);
  }

  MonteCarloOptions monte_carlo(std::uint64_t tag) const {
    MonteCarloOptions mc;
    mc.n = cfg.paths;
    mc.seed = cfg.seed;
    mc.stream_tag = tag;
    mc.workers = workers;
    mc.evolver = evolver;
    return mc;
  }

  // Minimizer of the event's action; its value and trace are written alongside.
  Control optimal_control() {
    const TargetSpec target = make_event(cfg, grid);
    const ActionValue v = minimize_action(op, coeffs, xi, target, times, optimizer);
    summary["optimal_control"] = v.to_json();
    if (!v.feasible) throw NumericalFailure("optimal control: the event is unreachable (infinite action)");
    return v.beta;
  }

  // The configured control; `optimal_when_zero` treats kind = "zero" as the minimizer.
  Control control_from_config(bool optimal_when_zero = false) {
    const auto& kind = cfg.control.kind;
    if (kind == "optimal" || (optimal_when_zero && kind == "zero")) {
      Control c = optimal_control();
      c.bound = cfg.control.bound;
      return c;
    }
    return make_control(cfg.control, times, coeffs.k);
  }
};

void simulate(Context& ctx) {
  const double eps = ctx.cfg.noise.eps;
  const std::size_t n = eps > 0.0 ? ctx.cfg.paths : 1;
  const int k = ctx.coeffs.k;
  const NoisePath path0 = sample_brownian(k, ctx.times, ctx.cfg.seed, stream_id(kSimulateTag, 0));
  const Trajectory run = integrate_spde(ctx.op, ctx.coeffs, ctx.xi, eps, path0, ctx.evolver);
  ctx.field("field", run.field);
  ctx.summary["path0"] = run.diagnostics.to_json();
  ctx.summary["path0"]["sup_rho_norm"] = run.field.sup_rho_norm();

  if (n > 1) {
    struct Worker {
      MildStepper stepper;
      std::vector<double> dB;
    };
    std::vector<PathSummary> rows(n);
    const std::size_t M = ctx.times.steps();
    parallel_for(
        n, ctx.workers,
        [&] {
          return Worker{MildStepper(ctx.op, ctx.coeffs, ctx.times, ctx.evolver),
                        std::vector<double>(M * static_cast<std::size_t>(k))};
        },
        [&](Worker& w, std::size_t i) {
          fill_brownian(k, ctx.times, ctx.cfg.seed, stream_id(kSimulateTag, i), w.dB);
          rows[i] = run_path(w.stepper, ctx.xi, eps, w.dB, nullptr, ctx.cfg.rho);
        });
    auto csv = ctx.open("paths.csv");
    csv << "path,sup_rho_norm,terminal_rho_norm,blow_up,blow_up_time\n";
    std::size_t blow_ups = 0;
    double mean_sup = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& r = rows[i];
      const double term = r.blow_up ? INFINITY : lp_norm(r.terminal, ctx.cfg.rho, ctx.grid.cell_volume());
      csv << i << ',' << r.sup_rho_norm << ',' << term << ',' << (r.blow_up ? 1 : 0) << ',' << r.blow_up_time
          << '\n';
      blow_ups += r.blow_up ? 1 : 0;
      mean_sup += r.sup_rho_norm / static_cast<double>(n);
    }
    ctx.summary["paths"] = n;
    ctx.summary["blow_ups"] = blow_ups;
    ctx.summary["mean_sup_rho_norm"] = number_or_string(mean_sup);
  }

  if (ctx.grid.dim() == 1) {
    PlotSeries init{"t = 0", {}, {}, false}, fin{"t = T", {}, {}, false};
    for (std::size_t i = 0; i < ctx.grid.size(); ++i) {
      const double x = ctx.grid.interior_position(i)[0];
      init.x.push_back(x);
      init.y.push_back(run.field.at(0)[i]);
      fin.x.push_back(x);
      fin.y.push_back(run.field.terminal()[i]);
    }
    ctx.svg("field.svg", {"path 0", "x", "u"}, {init, fin});
  }
}

void skeleton(Context& ctx) {
  const Control phi = ctx.control_from_config();
  const Trajectory run = solve_skeleton(ctx.op, ctx.coeffs, ctx.xi, phi, ctx.evolver);
  ctx.field("field", run.field);
  ctx.control("control.csv", phi);
  ctx.summary["diagnostics"] = run.diagnostics.to_json();
  ctx.summary["action"] = action_of(phi);
  ctx.summary["sup_rho_norm"] = run.field.sup_rho_norm();
}

void controlled(Context& ctx) {
  const Control phi = ctx.control_from_config();
  const double eps = ctx.cfg.noise.eps;
  const NoisePath path = sample_brownian(ctx.coeffs.k, ctx.times, ctx.cfg.seed, stream_id(kControlledTag, 0));
  const Trajectory run = integrate_controlled(ctx.op, ctx.coeffs, ctx.xi, eps, path, phi, ctx.evolver);
  ctx.field("field", run.field);
  ctx.control("control.csv", phi);
  ctx.summary["diagnostics"] = run.diagnostics.to_json();
  ctx.summary["action"] = action_of(phi);
  ctx.summary["log_weight"] = eps > 0.0 ? number_or_string(girsanov_log_weight(phi, path, eps)) : json(nullptr);
  ctx.summary["sup_rho_norm"] = run.field.sup_rho_norm();
}

void write_action(Context& ctx, const ActionValue& v) {
  ctx.summary["action"] = v.to_json();
  {
    auto f = ctx.open("trace.csv");
    write_trace_csv(v, f);
  }
  ctx.control("control.csv", v.beta);
  if (v.psi.nodes() > 0) ctx.field("field", v.psi);
  PlotSeries act{"action", {}, {}, false}, res{"residual", {}, {}, false};
  for (std::size_t i = 0; i < v.trace.size(); ++i) {
    act.x.push_back(static_cast<double>(i));
    act.y.push_back(v.trace[i].action);
    res.x.push_back(static_cast<double>(i));
    res.y.push_back(v.trace[i].residual);
  }
  ctx.svg("trace.svg", {"minimizer trace", "record", "value", false, true}, {act, res});
}

void minimize(Context& ctx) {
  const TargetSpec target = make_event(ctx.cfg, ctx.grid);
  ctx.summary["event"] = target.to_json();
  try {
    write_action(ctx, minimize_action(ctx.op, ctx.coeffs, ctx.xi, target, ctx.times, ctx.optimizer));
  } catch (const OptimizerError& e) {
    write_action(ctx, e.best());
    throw;
  }
}

EstimatorMethod estimator_method(const Context& ctx) {
  return ctx.cfg.estimator.method == "plain" ? EstimatorMethod::plain : EstimatorMethod::importance;
}

void write_estimates(Context& ctx, const std::vector<ProbabilityEstimate>& est, const RateFit* fit) {
  auto csv = ctx.open(fit ? "rate.csv" : "estimates.csv");
  csv << "eps,p_hat,stderr,n,ess,hits,blow_ups" << (fit ? ",minus_eps_log_p,residual" : "") << '\n';
  for (std::size_t i = 0; i < est.size(); ++i) {
    const auto& e = est[i];
    csv << e.eps << ',' << e.p_hat << ',' << e.std_error << ',' << e.n << ',' << e.ess << ',' << e.hits << ','
        << e.blow_ups;
    if (fit) csv << ',' << fit->minus_eps_log_p[i] << ',' << fit->residuals[i];
    csv << '\n';
  }
}

void mc_estimate(Context& ctx) {
  const EstimatorMethod method = estimator_method(ctx);
  const TargetSpec event = make_event(ctx.cfg, ctx.grid);
  std::optional<Control> bias;
  if (method == EstimatorMethod::importance) {
    bias = ctx.control_from_config(true);
    ctx.control("bias.csv", *bias);
  }
  const auto est = estimate_event(ctx.op, ctx.coeffs, ctx.xi, ctx.cfg.noise.eps, event, ctx.times, method,
                                  bias ? &*bias : nullptr, ctx.monte_carlo(kEstimateTag));
  ctx.summary["estimate"] = est.to_json();
  write_estimates(ctx, {est}, nullptr);
}

void fit_rate_cmd(Context& ctx) {
  const EstimatorMethod method = estimator_method(ctx);
  const TargetSpec event = make_event(ctx.cfg, ctx.grid);
  std::optional<Control> bias;
  if (method == EstimatorMethod::importance) {
    bias = ctx.control_from_config(true);
    ctx.control("bias.csv", *bias);
  }
  const ActionValue action = minimize_action(ctx.op, ctx.coeffs, ctx.xi, event, ctx.times, ctx.optimizer);
  ctx.summary["action"] = action.to_json();
  std::vector<ProbabilityEstimate> est;
  for (std::size_t i = 0; i < ctx.cfg.noise.eps_grid.size(); ++i) {
    est.push_back(estimate_event(ctx.op, ctx.coeffs, ctx.xi, ctx.cfg.noise.eps_grid[i], event, ctx.times, method,
                                 bias ? &*bias : nullptr, ctx.monte_carlo(kEstimateTag + 1 + i)));
  }
  json estimates = json::array();
  for (const auto& e : est) estimates.push_back(e.to_json());
  ctx.summary["estimates"] = estimates;
  const RateFit fit = fit_rate(est);
  write_estimates(ctx, est, &fit);
  ctx.summary["fit"] = fit.to_json();
  if (action.feasible && action.value > 0.0) {
    ctx.summary["relative_gap"] = std::abs(fit.rate - action.value) / action.value;
  }
  PlotSeries data{"-eps log p", fit.eps, fit.minus_eps_log_p};
  PlotSeries line{"fit", {}, {}, false};
  PlotSeries level{"min action", {}, {}, false};
  double lo = 0.0, hi = 0.0;
  for (double e : fit.eps) hi = std::max(hi, e);
  for (double e : {lo, hi}) {
    line.x.push_back(e);
    line.y.push_back(fit.rate + fit.slope * e);
    level.x.push_back(e);
    level.y.push_back(action.value);
  }
  ctx.svg("rate.svg", {"rate fit", "eps", "-eps log p"}, {data, line, level});
}

void converge(Context& ctx) {
  ConvergenceFamily fam;
  fam.xi = ctx.xi;
  fam.eta = make_field(ctx.cfg.convergence.eta, ctx.grid);
  fam.phi = ctx.control_from_config();
  if (!ctx.cfg.convergence.chi.empty()) {
    fam.chi = std::make_shared<Control>(Control::constant(ctx.times, ctx.cfg.convergence.chi));
  }
  fam.gamma = ctx.cfg.convergence.gamma == "identity" ? NoiseScaling::identity : NoiseScaling::zero;
  const auto table = convergence_experiment(ctx.op, ctx.coeffs, fam, ctx.cfg.noise.eps_grid, ctx.times,
                                            ctx.cfg.rho, ctx.monte_carlo(kConvergeTag));
  ctx.summary["convergence"] = table.to_json();
  auto csv = ctx.open("convergence.csv");
  csv << "eps,mean_distance,stderr,n,blow_ups\n";
  PlotSeries s{"mean sup distance", {}, {}};
  for (const auto& r : table.rows) {
    csv << r.eps << ',' << r.mean_distance << ',' << r.std_error << ',' << r.n << ',' << r.blow_ups << '\n';
    s.x.push_back(r.eps);
    s.y.push_back(r.mean_distance);
  }
  ctx.svg("convergence.svg", {"distance to the limit", "eps", "E sup |v - v0|", true, true}, {s});
}

void tightness(Context& ctx) {
  std::optional<Control> phi;
  if (ctx.cfg.control.kind != "zero") phi = ctx.control_from_config();
  const auto t = tightness_probe(ctx.op, ctx.coeffs, ctx.xi, ctx.cfg.noise.eps_grid, ctx.cfg.tightness.C, ctx.times,
                                 ctx.cfg.rho, phi ? &*phi : nullptr, ctx.monte_carlo(0));
  ctx.summary["tightness"] = t.to_json();
  auto csv = ctx.open("tightness.csv");
  csv << "C";
  for (double e : t.eps) csv << ",eps=" << e;
  csv << ",sup\n";
  for (std::size_t j = 0; j < t.C.size(); ++j) {
    csv << t.C[j];
    for (std::size_t e = 0; e < t.eps.size(); ++e) csv << ',' << t.exceedance[e][j];
    csv << ',' << t.sup_over_eps[j] << '\n';
  }
  ctx.svg("tightness.svg", {"exceedance", "C", "sup_eps P(sup |v| >= C)"}, {{"sup over eps", t.C, t.sup_over_eps}});
}

void verify_kernel(Context& ctx) {
  {
    auto f = ctx.open("eigen.csv");
    write_eigen_csv(ctx.op, f);
  }
  KernelEstimateOptions opts;
  opts.gaussian_samples = ctx.cfg.kernel.gaussian_samples;
  opts.seed = ctx.cfg.seed;
  const auto times = default_time_samples(ctx.grid, ctx.cfg.kernel.time_samples);
  const auto report = fit_kernel_estimates(ctx.op, ctx.cfg.kernel.p, times, opts);
  ctx.write_json("kernel_report.json", report.to_json());
  ctx.summary["pass"] = report.pass();
  ctx.summary["lambda_p"] = report.lambda_p;
  auto csv = ctx.open("kernel_norms.csv");
  csv << "t,kernel_norm,gradient_norm,time_derivative_norm\n";
  for (std::size_t i = 0; i < report.times.size(); ++i) {
    csv << report.times[i] << ',' << report.kernel_norm[i] << ',' << report.gradient_norm[i] << ','
        << report.time_derivative_norm[i] << '\n';
  }
  ctx.svg("kernel_norms.svg", {"kernel norms", "t", "max_x norm", true, true},
          {{"kernel", report.times, report.kernel_norm},
           {"gradient", report.times, report.gradient_norm},
           {"time derivative", report.times, report.time_derivative_norm}});
}

void validate_coeffs(Context& ctx) {
  const auto report = validate_assumptions(ctx.coeffs, ctx.grid, ctx.cfg.time.T);
  json j = report.to_json();
  j["coefficients"] = to_json(ctx.coeffs);
  ctx.write_json("validation.json", j);
  ctx.summary["pass"] = report.pass();
  ctx.summary["validated_nu"] = number_or_string(report.validated_nu);
  ctx.summary["declared_nu"] = ctx.coeffs.nu;
}

const std::map<std::string, std::function<void(Context&)>>& commands() {
  static const std::map<std::string, std::function<void(Context&)>> table = {
      {"simulate", simulate},
      {"skeleton", skeleton},
      {"controlled", controlled},
      {"minimize-action", minimize},
      {"mc-estimate", mc_estimate},
      {"fit-rate", fit_rate_cmd},
      {"converge", converge},
      {"tightness", tightness},
      {"verify-kernel", verify_kernel},
      {"validate-coeffs", validate_coeffs},
  };
  return table;
}

void write_file(const fs::path& path, const json& j) {
  std::ofstream f(path);
  f << j.dump(2) << '\n';
}

}  // namespace

const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names = {"simulate",    "skeleton",  "controlled",    "minimize-action",
                                                 "mc-estimate", "fit-rate",  "converge",      "tightness",
                                                 "verify-kernel", "validate-coeffs"};
  return names;
}

int run(const CliOptions& options, std::ostream& log, std::ostream& err) {
  const auto cmd = commands().find(options.subcommand);
  if (cmd == commands().end()) {
    err << "unknown subcommand '" << options.subcommand << "'\n";
    return kExitUsage;
  }
  std::error_code ec;
  fs::create_directories(options.out, ec);
  if (ec || !fs::is_directory(options.out)) {
    err << "out: cannot create output directory " << options.out.string() << '\n';
    return kExitConfig;
  }

  json manifest = {{"tool", "ldplab"}, {"subcommand", options.subcommand}, {"workers", options.workers},
                   {"simd", std::string(simd::active().name)}};
  auto fail = [&](int code, const std::string& kind, const std::string& message, json extra) {
    err << message << '\n';
    extra["exit_code"] = code;
    extra["kind"] = kind;
    extra["message"] = message;
    write_file(options.out / "diagnostics.json", extra);
    manifest["status"] = "error";
    manifest["exit_code"] = code;
    write_file(options.out / "manifest.json", manifest);
    return code;
  };

  Context ctx;
  try {
    std::vector<Override> overrides;
    for (const auto& o : options.overrides) overrides.push_back(parse_override(o));
    ctx.cfg = options.config ? load_config_file(*options.config, overrides) : load_config_tree(json::object(), overrides);
    if (options.seed) ctx.cfg.seed = *options.seed;
    if (options.workers < 1) throw ConfigError("workers", "must be at least 1");
  } catch (const ConfigError& e) {
    return fail(kExitConfig, "config", e.what(), {{"field", e.field()}});
  }
  manifest["config"] = config_to_json(ctx.cfg);
  manifest["config_hash"] = config_hash(ctx.cfg);
  manifest["seed"] = ctx.cfg.seed;
  if (options.config) manifest["config_path"] = options.config->string();

  ctx.out = options.out;
  ctx.workers = options.workers;
  ctx.log = &log;
  log << options.subcommand << " (config " << manifest["config_hash"].get<std::string>().substr(0, 12) << ", seed "
      << ctx.cfg.seed << ")\n";
  try {
    ctx.grid = make_grid(ctx.cfg);
    ctx.coeffs = make_coefficients(ctx.cfg);
    ctx.times = make_times(ctx.cfg);
    ctx.xi = make_field(ctx.cfg.initial, ctx.grid);
    ctx.evolver = evolver_options(ctx.cfg);
    ctx.optimizer = ctx.cfg.optimizer;
    ctx.optimizer.evolver = ctx.evolver;
    if (options.subcommand != "validate-coeffs") ctx.op = assemble_operator(ctx.grid, make_elliptic(ctx.cfg));
    cmd->second(ctx);
  } catch (const ConfigError& e) {
    return fail(kExitConfig, "config", e.what(), {{"field", e.field()}, {"summary", ctx.summary}});
  } catch (const DomainError& e) {
    return fail(kExitConfig, "domain", e.what(), {{"summary", ctx.summary}});
  } catch (const BlowUp& e) {
    return fail(kExitNumerical, "blow_up", e.what(),
                {{"time", e.time()}, {"magnitude", number_or_string(e.magnitude())}, {"summary", ctx.summary}});
  } catch (const StepGuardViolation& e) {
    return fail(kExitNumerical, "step_guard", e.what(),
                {{"time", e.time()}, {"ratio", e.ratio()}, {"summary", ctx.summary}});
  } catch (const ConvergenceError& e) {
    return fail(kExitNumerical, "convergence", e.what(),
                {{"sweeps", e.sweeps()}, {"last_increment", e.last_increment()}, {"summary", ctx.summary}});
  } catch (const OptimizerError& e) {
    return fail(kExitNumerical, "optimizer", e.what(), {{"best", e.best().to_json()}, {"summary", ctx.summary}});
  } catch (const InsufficientData& e) {
    return fail(kExitNumerical, "insufficient_data", e.what(), {{"eps", e.eps()}, {"summary", ctx.summary}});
  } catch (const NumericalFailure& e) {
    return fail(kExitNumerical, "numerical", e.what(), {{"summary", ctx.summary}});
  } catch (const std::exception& e) {
    return fail(kExitNumerical, "internal", e.what(), {{"summary", ctx.summary}});
  }
  ctx.write_json("summary.json", ctx.summary);
  manifest["artifacts"] = ctx.artifacts;
  manifest["status"] = "ok";
  manifest["exit_code"] = kExitOk;
  write_file(options.out / "manifest.json", manifest);
  log << "  wrote " << (options.out / "manifest.json").string() << '\n';
  return kExitOk;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Small-noise large deviation laboratory for parabolic SPDEs on a box"};
  app.require_subcommand(1, 1);
  CliOptions options;
  std::string config, out = "out";
  std::uint64_t seed = 0;
  int workers = 1;
  std::vector<std::string> overrides;
  const std::map<std::string, std::string> help = {
      {"simulate", "sample SPDE paths driven by sqrt(eps) B"},
      {"skeleton", "solve the noise-free controlled equation"},
      {"controlled", "run the controlled process with its likelihood weight"},
      {"minimize-action", "minimize the action over controls reaching the event"},
      {"mc-estimate", "estimate the event probability at noise.eps"},
      {"fit-rate", "fit -eps log p against eps over noise.eps_grid"},
      {"converge", "distance of controlled runs to the skeleton as eps shrinks"},
      {"tightness", "exceedance probabilities of the sup norm per C and eps"},
      {"verify-kernel", "spectrum and estimate fits for the heat kernel"},
      {"validate-coeffs", "sample the growth and Lipschitz bounds of the coefficients"}};
  for (const auto& name : subcommand_names()) {
    auto* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--config", config, "TOML config file (or a manifest.json to rerun)");
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--out", out, "artifact directory")->capture_default_str();
    sub->add_option("--workers", workers, "worker threads")->capture_default_str();
    sub->add_option("--override", overrides, "key.path=value, value in TOML syntax");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }
  auto* sub = app.get_subcommands().front();
  options.subcommand = sub->get_name();
  if (!config.empty()) options.config = config;
  if (sub->count("--seed")) options.seed = seed;
  options.out = out;
  options.workers = workers;
  options.overrides = overrides;
  return run(options, std::cout, std::cerr);
}

}  // namespace ldplab
