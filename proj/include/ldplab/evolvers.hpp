#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "ldplab/coefficients.hpp"
#include "ldplab/field.hpp"
#include "ldplab/kernel_operator.hpp"
#include "ldplab/stochastics.hpp"

namespace ldplab {

// max(2 nu, d + 1) + 1
double default_rho(const CoefficientSet& c);

enum class PicardStart { zero, heat };

struct EvolverOptions {
  double rho = 0.0;                  // norm exponent of the output field; <= 0 selects default_rho
  double blowup_threshold = 1e8;     // sup-node |u| beyond this aborts the path
  bool step_guard = true;            // dt <= c h / max(1, sup|u|^(nu-1)) when the flux is nonzero
  double step_guard_c = 1.0;
  double truncation = 0.0;           // > 0 enables the smooth coefficient cutoff at this level
  double picard_tol = 1e-10;         // relative sweep increment for the skeleton
  int picard_max_sweeps = 50;
  PicardStart picard_start = PicardStart::zero;
};

struct SolveDiagnostics {
  std::size_t steps = 0;
  int picard_iterations = 0;
  double last_increment = 0.0;
  bool converged = true;
  double truncation_level = 0.0;
  bool blow_up = false;
  double blow_up_time = 0.0;
  double max_step_ratio = 0.0;  // largest dt / guard bound seen; <= 1 when the guard held

  nlohmann::json to_json() const;
};

struct Trajectory {
  SpaceTimeField field;
  SolveDiagnostics diagnostics;
};

// Pre-propagation increments of one step, split by term.
struct StepTerms {
  std::vector<double> noise;    // sum_j sigma_j(u) sqrt(eps) dB_j
  std::vector<double> flux;     // dt sum_i D_i g_i(u)
  std::vector<double> drift;    // dt f(u)
  std::vector<double> control;  // dt sum_j sigma_j(u) phi_j
};

// Exponential Euler step of the mild form:
//   u_{m+1} = G_dt [ u_m + dt f(u_m) + dt sum_i D_i g_i(u_m) + sum_j sigma_j(u_m) (sqrt(eps) dB_j + phi_j dt) ]
// with D_i the centered difference, the discrete counterpart of the integration by parts
// that moves the derivative of the kernel onto g. One instance per path; not thread-safe.
class MildStepper {
 public:
  MildStepper(const KernelOperator& op, const CoefficientSet& c, const TimeGrid& grid,
              const EvolverOptions& options = {});

  const KernelOperator& op() const noexcept { return *op_; }
  const CoefficientSet& coefficients() const noexcept { return coeffs_; }
  const TimeGrid& grid() const noexcept { return grid_; }
  const std::vector<Point>& positions() const noexcept { return x_; }
  double max_step_ratio() const noexcept { return max_ratio_; }

  // Advances u from t_m to t_{m+1} in place. dB (k entries) may be null when sqrt_eps is 0
  // and phi (k entries) may be null for an uncontrolled step. Throws BlowUp or StepGuardViolation.
  void step(std::size_t m, std::span<double> u, const double* dB, double sqrt_eps, const double* phi);
  // Same step, also returning the pre-propagation increments of each term.
  void step_terms(std::size_t m, std::span<double> u, const double* dB, double sqrt_eps,
                  const double* phi, StepTerms& terms);
  // Duhamel-sum Picard step: v <- G_dt [ v + increments evaluated at the frozen iterate ].
  void picard_step(std::size_t m, std::span<const double> frozen, std::span<double> v, const double* phi);
  // out = G_{dt_m} in; in and out may alias.
  void propagate(std::size_t m, std::span<const double> in, std::span<double> out);

 private:
  void guard(std::size_t m, std::span<const double> u);
  void assemble(std::size_t m, std::span<const double> u, const double* dB, double sqrt_eps,
                const double* phi, StepTerms* terms);
  SemigroupStep& semigroup(std::size_t m);

  const KernelOperator* op_;
  CoefficientSet coeffs_;
  TimeGrid grid_;
  EvolverOptions options_;
  std::vector<Point> x_;
  std::optional<SemigroupStep> step_;
  std::vector<double> work_, tmp_, diff_;
  double max_ratio_ = 0.0;
};

// Mild solution driven by sqrt(eps) B. Throws BlowUp with the failure time.
Trajectory integrate_spde(const KernelOperator& op, const CoefficientSet& c, std::span<const double> xi,
                          double eps, const NoisePath& path, const EvolverOptions& options = {});

// Controlled process driven by sqrt(eps) B + int phi ds. Throws DomainError on grid mismatch.
Trajectory integrate_controlled(const KernelOperator& op, const CoefficientSet& c,
                                std::span<const double> xi, double eps, const NoisePath& path,
                                const Control& phi, const EvolverOptions& options = {});

// Deterministic skeleton with control phi, solved by Picard sweeps over the whole
// trajectory; the fixed point is the exponential Euler solution. Throws ConvergenceError
// when the sweeps do not converge.
Trajectory solve_skeleton(const KernelOperator& op, const CoefficientSet& c, std::span<const double> xi,
                          const Control& phi, const EvolverOptions& options = {});

// The five mild-form terms along a controlled run: initial datum, noise, flux, drift, control.
struct Decomposition {
  Trajectory run;
  std::array<SpaceTimeField, 5> terms;
};
Decomposition decompose_terms(const KernelOperator& op, const CoefficientSet& c,
                              std::span<const double> xi, double eps, const NoisePath& path,
                              const Control& phi, const EvolverOptions& options = {});

// Streaming summary of one path: no trajectory is stored.
struct PathSummary {
  std::vector<double> terminal;
  double sup_rho_norm = 0.0;
  bool blow_up = false;
  double blow_up_time = 0.0;
};

// Runs one path with increments dB (M x k) and optional control; BlowUp is caught and flagged.
// `sup_reference` (optional, (M+1) x N) makes sup_rho_norm the sup distance to that trajectory.
PathSummary run_path(MildStepper& stepper, std::span<const double> xi, double eps,
                     std::span<const double> dB, const Control* phi, double rho,
                     const SpaceTimeField* sup_reference = nullptr);

}  // namespace ldplab
