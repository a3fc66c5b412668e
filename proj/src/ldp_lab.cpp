#include "ldplab/ldp_lab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <tuple>

#include "ldplab/error.hpp"
#include "ldplab/parallel.hpp"
#include "ldplab/rng.hpp"

namespace ldplab {
namespace {

struct Worker {
  MildStepper stepper;
  std::vector<double> dB;
};

struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
};

LineFit least_squares(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  return f;
}

// Sample mean and standard error of per-path values, reduced in index order.
std::pair<double, double> mean_and_error(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += x;
  const double mean = s / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double var = v.size() > 1 ? ss / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n)};
}

const char* method_name(EstimatorMethod m) { return m == EstimatorMethod::plain ? "plain" : "importance"; }

constexpr std::uint64_t kTightnessTag = 0x71;

}  // namespace

nlohmann::json ProbabilityEstimate::to_json() const {
  return {{"p_hat", p_hat},   {"stderr", std_error}, {"n", n},         {"method", method_name(method)},
          {"eps", eps},       {"ess", ess},          {"hits", hits},   {"blow_ups", blow_ups},
          {"event", event}};
}

ProbabilityEstimate estimate_event(const KernelOperator& op, const CoefficientSet& c, std::span<const double> xi,
                                   double eps, const TargetSpec& event_in, const TimeGrid& grid,
                                   EstimatorMethod method, const Control* bias,
                                   const MonteCarloOptions& options) {
  if (options.n < 100) throw DomainError("estimate_event: need n >= 100 samples");
  if (!(eps > 0.0)) throw DomainError("estimate_event: eps must be positive");
  if (method == EstimatorMethod::importance && !bias) {
    throw DomainError("estimate_event: importance sampling needs a bias control");
  }
  if (bias && (!(bias->grid == grid) || bias->k != c.k)) {
    throw DomainError("estimate_event: bias control does not match the solver grid");
  }
  if (xi.size() != op.size()) throw DomainError("estimate_event: initial field size mismatch");
  const TargetSpec event = prepare_target(event_in, op, c, xi, grid, options.evolver);
  const std::size_t n = options.n;
  const std::size_t M = grid.steps();
  const std::size_t k = static_cast<std::size_t>(c.k);
  const bool tube = event.kind == TargetKind::tube_exit;
  const Control* phi = method == EstimatorMethod::importance ? bias : nullptr;
  const double phi_energy = phi ? control_l2_norm(*phi) : 0.0;
  const double rho = event.rho;

  std::vector<double> value(n), weight(n);
  std::vector<char> blew(n, 0), hit_flags(n, 0);
  parallel_for(
      n, options.workers,
      [&] { return Worker{MildStepper(op, c, grid, options.evolver), std::vector<double>(M * k)}; },
      [&](Worker& w, std::size_t i) {
        fill_brownian(c.k, grid, options.seed, stream_id(options.stream_tag, i), w.dB);
        const auto s = run_path(w.stepper, xi, eps, w.dB, phi, rho, tube ? event.reference.get() : nullptr);
        blew[i] = s.blow_up;
        double margin = s.blow_up && event.kind != TargetKind::terminal_functional_threshold
                            ? std::numeric_limits<double>::infinity()
                            : event_margin(event, op.grid(), s.terminal, s.sup_rho_norm);
        const bool hit = margin >= 0.0;
        double lw = 0.0;
        if (phi) {
          double stoch = 0.0;
          for (std::size_t p = 0; p < M * k; ++p) stoch += phi->values[p] * w.dB[p];
          lw = -stoch / std::sqrt(eps) - phi_energy / (2.0 * eps);
        }
        weight[i] = std::exp(lw);
        hit_flags[i] = hit;
        value[i] = hit ? weight[i] : 0.0;
      });

  ProbabilityEstimate est;
  est.n = n;
  est.method = method;
  est.eps = eps;
  est.event = event.to_json();
  for (std::size_t i = 0; i < n; ++i) {
    est.hits += hit_flags[i] ? 1 : 0;
    est.blow_ups += blew[i] ? 1 : 0;
  }
  const auto [mean, err] = mean_and_error(value);
  // ESS of the weights the estimator averages: all of them for plain sampling, the hits for
  // importance sampling (a tilted measure spreads the weights of the misses, which never count).
  double sw = 0.0, sw2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (method == EstimatorMethod::importance && !hit_flags[i]) continue;
    sw += weight[i];
    sw2 += weight[i] * weight[i];
  }
  est.ess = sw2 > 0.0 ? sw * sw / sw2 : 0.0;
  const bool collapsed = est.hits > 0 && !(est.ess >= 1.0 - 1e-9);
  if (!std::isfinite(mean) || !std::isfinite(est.ess) || collapsed) {
    throw DegenerateEstimate("estimate_event: likelihood weights collapsed (ess " + std::to_string(est.ess) + ")");
  }
  est.p_hat = std::clamp(mean, 0.0, 1.0);
  est.std_error = err;
  return est;
}

nlohmann::json RateFit::to_json() const {
  return {{"eps", eps}, {"minus_eps_log_p", minus_eps_log_p}, {"rate", rate}, {"slope", slope},
          {"residuals", residuals}};
}

RateFit fit_rate(std::span<const ProbabilityEstimate> estimates) {
  RateFit fit;
  std::set<double> distinct;
  for (const auto& e : estimates) {
    if (!(e.p_hat > 0.0)) {
      throw InsufficientData("fit_rate: zero probability estimate at eps=" + std::to_string(e.eps), e.eps);
    }
    distinct.insert(e.eps);
    fit.eps.push_back(e.eps);
    fit.minus_eps_log_p.push_back(-e.eps * std::log(e.p_hat));
  }
  if (distinct.size() < 3) {
    throw InsufficientData("fit_rate: need at least three distinct eps values",
                           estimates.empty() ? 0.0 : estimates.front().eps);
  }
  const auto lf = least_squares(fit.eps, fit.minus_eps_log_p);
  fit.rate = lf.intercept;
  fit.slope = lf.slope;
  for (std::size_t i = 0; i < fit.eps.size(); ++i) {
    fit.residuals.push_back(fit.minus_eps_log_p[i] - (fit.rate + fit.slope * fit.eps[i]));
  }
  return fit;
}

nlohmann::json ConvergenceTable::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"eps", r.eps},
                         {"mean_distance", r.mean_distance},
                         {"stderr", r.std_error},
                         {"n", r.n},
                         {"blow_ups", r.blow_ups}});
  }
  return {{"rows", rows_json}, {"slope", slope}, {"strictly_decreasing", strictly_decreasing}};
}

ConvergenceTable convergence_experiment(const KernelOperator& op, const CoefficientSet& c,
                                        const ConvergenceFamily& family, std::span<const double> eps_grid,
                                        const TimeGrid& grid, double rho, const MonteCarloOptions& options) {
  const std::size_t N = op.size();
  if (family.xi.size() != N || (!family.eta.empty() && family.eta.size() != N)) {
    throw DomainError("convergence_experiment: initial field family has the wrong size");
  }
  if (!(family.phi.grid == grid) || family.phi.k != c.k ||
      (family.chi && (!(family.chi->grid == grid) || family.chi->k != c.k))) {
    throw DomainError("convergence_experiment: control family does not match the solver grid");
  }
  const Trajectory limit = solve_skeleton(op, c, family.xi, family.phi, options.evolver);
  const std::size_t M = grid.steps();
  const std::size_t k = static_cast<std::size_t>(c.k);

  ConvergenceTable table;
  for (std::size_t e = 0; e < eps_grid.size(); ++e) {
    const double eps = eps_grid[e];
    if (!(eps >= 0.0)) throw DomainError("convergence_experiment: eps must be >= 0");
    std::vector<double> xi_eps(family.xi);
    if (!family.eta.empty()) {
      for (std::size_t i = 0; i < N; ++i) xi_eps[i] += eps * family.eta[i];
    }
    Control phi_eps = family.phi;
    if (family.chi) {
      for (std::size_t p = 0; p < phi_eps.values.size(); ++p) phi_eps.values[p] += eps * family.chi->values[p];
    }
    const double noise = family.gamma == NoiseScaling::identity ? eps : 0.0;
    // Without noise every path is the same deterministic run.
    const std::size_t n = noise > 0.0 ? options.n : 1;
    std::vector<double> dist(n);
    std::vector<char> blew(n, 0);
    try {
      parallel_for(
          n, options.workers,
          [&] { return Worker{MildStepper(op, c, grid, options.evolver), std::vector<double>(M * k, 0.0)}; },
          [&](Worker& w, std::size_t i) {
            if (noise > 0.0) {
              fill_brownian(c.k, grid, options.seed, stream_id(options.stream_tag + 16 * (e + 1), i), w.dB);
            }
            const auto s = run_path(w.stepper, xi_eps, noise, w.dB, &phi_eps, rho, &limit.field);
            dist[i] = s.sup_rho_norm;
            blew[i] = s.blow_up;
          });
    } catch (const NumericalFailure& err) {
      throw NumericalFailure(std::string(err.what()) + " (eps=" + std::to_string(eps) + ")");
    }
    ConvergenceRow row;
    row.eps = eps;
    row.n = n;
    for (char b : blew) row.blow_ups += b ? 1 : 0;
    std::tie(row.mean_distance, row.std_error) = mean_and_error(dist);
    table.rows.push_back(row);
  }

  std::vector<ConvergenceRow> sorted = table.rows;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.eps > b.eps; });
  table.strictly_decreasing = true;
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (!(sorted[i].mean_distance < sorted[i - 1].mean_distance)) table.strictly_decreasing = false;
  }
  std::vector<double> lx, ly;
  for (const auto& r : table.rows) {
    if (r.eps > 0.0 && r.mean_distance > 0.0) {
      lx.push_back(std::log(r.eps));
      ly.push_back(std::log(r.mean_distance));
    }
  }
  if (lx.size() >= 2) table.slope = least_squares(lx, ly).slope;
  return table;
}

bool TightnessTable::nonincreasing() const noexcept {
  for (std::size_t i = 1; i < sup_over_eps.size(); ++i) {
    if (C[i] >= C[i - 1] && sup_over_eps[i] > sup_over_eps[i - 1]) return false;
  }
  return true;
}

nlohmann::json TightnessTable::to_json() const {
  return {{"eps", eps},
          {"C", C},
          {"exceedance", exceedance},
          {"sup_over_eps", sup_over_eps},
          {"blow_ups", blow_ups},
          {"nonincreasing", nonincreasing()}};
}

TightnessTable tightness_probe(const KernelOperator& op, const CoefficientSet& c, std::span<const double> xi,
                               std::span<const double> eps_grid, std::span<const double> C_grid,
                               const TimeGrid& grid, double rho, const Control* phi,
                               const MonteCarloOptions& options) {
  if (options.n < 1000) throw DomainError("tightness_probe: need n >= 1000 samples");
  if (phi && (!(phi->grid == grid) || phi->k != c.k)) {
    throw DomainError("tightness_probe: control does not match the solver grid");
  }
  const std::size_t M = grid.steps();
  const std::size_t k = static_cast<std::size_t>(c.k);
  TightnessTable t;
  t.eps.assign(eps_grid.begin(), eps_grid.end());
  t.C.assign(C_grid.begin(), C_grid.end());
  std::sort(t.C.begin(), t.C.end());
  t.sup_over_eps.assign(t.C.size(), 0.0);
  for (std::size_t e = 0; e < t.eps.size(); ++e) {
    const double eps = t.eps[e];
    std::vector<double> sup(options.n);
    std::vector<char> blew(options.n, 0);
    parallel_for(
        options.n, options.workers,
        [&] { return Worker{MildStepper(op, c, grid, options.evolver), std::vector<double>(M * k)}; },
        [&](Worker& w, std::size_t i) {
          fill_brownian(c.k, grid, options.seed, stream_id(kTightnessTag + 16 * (e + 1), i), w.dB);
          const auto s = run_path(w.stepper, xi, eps, w.dB, phi, rho);
          sup[i] = s.sup_rho_norm;
          blew[i] = s.blow_up;
        });
    for (char b : blew) t.blow_ups += b ? 1 : 0;
    std::vector<double> row;
    for (std::size_t j = 0; j < t.C.size(); ++j) {
      std::size_t count = 0;
      for (double s : sup) count += s >= t.C[j] ? 1 : 0;
      row.push_back(static_cast<double>(count) / static_cast<double>(options.n));
      t.sup_over_eps[j] = std::max(t.sup_over_eps[j], row.back());
    }
    t.exceedance.push_back(std::move(row));
  }
  return t;
}

}  // namespace ldplab
