#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "ldplab/kernel_operator.hpp"

namespace ldplab {

// Pointwise Gaussian bound |D_t^n D_x^g G_t(x,y)| <= K t^{-(d+2n+|g|)/2} exp(-C |x-y|^2 / t),
// with K calibrated on a structured sample and then checked on random (t, x, y).
struct GaussianBoundCheck {
  int time_order = 0;
  int space_order = 0;
  double C = 0.0;
  double K = 0.0;
  std::size_t samples = 0;
  double worst_ratio = 0.0;  // max |value| / (K * bound) over the random samples
  bool pass = false;
};

struct KernelEstimateReport {
  double p = 1.0;
  std::vector<double> times;
  // max over sampled x of |G_t(x,.)|_p, |grad_x G_t(x,.)|_p, |d_t G_t(x,.)|_p
  std::vector<double> kernel_norm;
  std::vector<double> gradient_norm;
  std::vector<double> time_derivative_norm;
  // log-log slopes of the three norm families
  double kernel_slope = 0.0;
  double gradient_slope = 0.0;
  double time_derivative_slope = 0.0;

  double K_p = 0.0;
  double lambda_p = 0.0;
  double upsilon_p = 0.0;
  double epsilon_p = 0.0;
  bool pass_kernel_decay = false;
  bool pass_gradient_decay = false;
  bool pass_time_derivative_decay = false;

  double gaussian_C = 0.0;
  double gaussian_K = 0.0;  // K of the (n=0, g=0) bound
  bool pass_gaussian_bound = false;
  std::vector<GaussianBoundCheck> gaussian;

  bool pass() const noexcept { return pass_kernel_decay && pass_gradient_decay && pass_time_derivative_decay && pass_gaussian_bound; }
  nlohmann::json to_json() const;
};

struct KernelEstimateOptions {
  std::size_t gaussian_samples = 1000;
  std::uint64_t seed = 7;
  double gaussian_C = 0.0;          // <= 0 selects kappa / 8
  double lambda_tolerance = 0.05;   // lambda_p <= 1 + tolerance
  double envelope_factor = 2.0;     // max/geometric-mean spread allowed around the power law
  std::size_t max_rows = 64;        // sampled x nodes when the grid is larger than 512 nodes
};

// Log-spaced times in [4 h^2, max(16 h^2, 0.01 L^2)], where the discrete kernel
// is resolved and the boundary has not yet damped it.
std::vector<double> default_time_samples(const Grid& grid, std::size_t count = 12);

// Throws DomainError for empty samples, non-positive times or p < 1.
KernelEstimateReport fit_kernel_estimates(const KernelOperator& op, double p,
                                          std::span<const double> time_samples,
                                          const KernelEstimateOptions& options = {});

}  // namespace ldplab
