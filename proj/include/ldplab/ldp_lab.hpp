#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ldplab/action.hpp"
#include "ldplab/coefficients.hpp"
#include "ldplab/evolvers.hpp"
#include "ldplab/kernel_operator.hpp"
#include "ldplab/stochastics.hpp"

namespace ldplab {

enum class EstimatorMethod { plain, importance };

struct ProbabilityEstimate {
  double p_hat = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
  EstimatorMethod method = EstimatorMethod::plain;
  double eps = 0.0;
  double ess = 0.0;  // effective sample size of the weights of hits (n for plain)
  std::size_t hits = 0;
  std::size_t blow_ups = 0;
  nlohmann::json event;

  double relative_error() const noexcept { return p_hat > 0.0 ? std_error / p_hat : 0.0; }
  nlohmann::json to_json() const;
};

struct MonteCarloOptions {
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  std::uint64_t stream_tag = 1;  // separates experiments that share a seed
  int workers = 1;
  EvolverOptions evolver;
};

// Plain: frequency of the event under the SPDE. Importance: mean of indicator times the
// likelihood ratio under the controlled process with the bias control. Throws DomainError
// for n < 100 or a missing bias control and DegenerateEstimate when the weights collapse.
ProbabilityEstimate estimate_event(const KernelOperator& op, const CoefficientSet& c, std::span<const double> xi,
                                   double eps, const TargetSpec& event, const TimeGrid& grid,
                                   EstimatorMethod method, const Control* bias,
                                   const MonteCarloOptions& options);

struct RateFit {
  std::vector<double> eps;
  std::vector<double> minus_eps_log_p;
  double rate = 0.0;   // intercept of -eps log p = rate + slope eps
  double slope = 0.0;
  std::vector<double> residuals;

  nlohmann::json to_json() const;
};

// Affine least squares of -eps log p_hat against eps. Throws InsufficientData naming the eps
// of a zero estimate, or when fewer than three distinct eps are given.
RateFit fit_rate(std::span<const ProbabilityEstimate> estimates);

enum class NoiseScaling { identity, zero };  // noise amplitude gamma(eps) = eps or 0

// xi_eps = xi + eps eta, phi_eps = phi + eps chi.
struct ConvergenceFamily {
  std::vector<double> xi;
  std::vector<double> eta;  // empty: zero
  Control phi;
  std::shared_ptr<const Control> chi;  // null: zero
  NoiseScaling gamma = NoiseScaling::identity;
};

struct ConvergenceRow {
  double eps = 0.0;
  double mean_distance = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
  std::size_t blow_ups = 0;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  double slope = 0.0;  // log-log slope over the rows with eps > 0
  bool strictly_decreasing = false;  // along decreasing eps

  nlohmann::json to_json() const;
};

// Monte Carlo mean of sup_t |v^{gamma(eps), phi_eps}_{xi_eps}(t) - v^{0, phi}_xi(t)|_rho per eps.
ConvergenceTable convergence_experiment(const KernelOperator& op, const CoefficientSet& c,
                                        const ConvergenceFamily& family, std::span<const double> eps_grid,
                                        const TimeGrid& grid, double rho, const MonteCarloOptions& options);

struct TightnessTable {
  std::vector<double> eps;
  std::vector<double> C;
  std::vector<std::vector<double>> exceedance;  // [eps][C]
  std::vector<double> sup_over_eps;             // per C
  std::size_t blow_ups = 0;

  bool nonincreasing() const noexcept;
  nlohmann::json to_json() const;
};

// Empirical P(sup_t |v|_rho >= C) per (eps, C), with shared samples per eps.
// Throws DomainError for n < 1000.
TightnessTable tightness_probe(const KernelOperator& op, const CoefficientSet& c, std::span<const double> xi,
                               std::span<const double> eps_grid, std::span<const double> C_grid,
                               const TimeGrid& grid, double rho, const Control* phi,
                               const MonteCarloOptions& options);

}  // namespace ldplab
