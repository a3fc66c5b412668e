#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ldplab/coefficients.hpp"
#include "ldplab/error.hpp"
#include "ldplab/evolvers.hpp"
#include "ldplab/field.hpp"
#include "ldplab/kernel_operator.hpp"
#include "ldplab/stochastics.hpp"

namespace ldplab {

enum class TargetKind {
  terminal_field,                 // psi(T) = field
  terminal_functional_threshold,  // sum_x w(x) psi(T, x) h^d >= level
  terminal_ball_exit,             // |psi(T) - center|_rho >= level
  tube_exit                       // max_t |psi(t) - reference(t)|_rho >= level
};

struct TargetSpec {
  TargetKind kind = TargetKind::terminal_field;
  std::vector<double> field;    // terminal_field target; ball center (empty: zero)
  std::vector<double> weights;  // functional weights
  double level = 0.0;           // threshold, ball radius or tube radius
  double rho = 2.0;             // norm exponent of ball and tube events
  // Uncontrolled skeleton for tube_exit; filled by prepare_target when empty.
  std::shared_ptr<const SpaceTimeField> reference;

  static TargetSpec terminal(std::vector<double> field);
  // psi(T, x0) >= level at the interior node nearest to x0.
  static TargetSpec point_exceedance(const Grid& grid, const Point& x0, double level);
  // spatial mean of psi(T) over D >= level
  static TargetSpec mean_exceedance(const Grid& grid, double level);
  static TargetSpec ball_exit(double radius, double rho, std::vector<double> center = {});
  static TargetSpec tube_exit(double radius, double rho);

  // Size of the target used in the feasibility tolerance 1e-6 (1 + size).
  double magnitude(const Grid& grid) const;
  nlohmann::json to_json() const;
};

// Validates the payload against the kind and solves the reference skeleton of tube targets.
// Throws DomainError for an inconsistent payload.
TargetSpec prepare_target(TargetSpec target, const KernelOperator& op, const CoefficientSet& c,
                          std::span<const double> xi, const TimeGrid& grid,
                          const EvolverOptions& options = {});

// Signed margin of an inequality event: >= 0 iff the event holds. `sup_distance` is the
// sup-in-time rho distance to the reference, used only by tube targets.
double event_margin(const TargetSpec& target, const Grid& grid, std::span<const double> terminal,
                    double sup_distance);

enum class GradientMode { sensitivity, finite_difference };

struct ActionOptions {
  double penalty0 = 10.0;
  double penalty_growth = 10.0;
  double max_penalty = 1e6;  // later rounds only update multipliers
  int rounds = 20;
  int max_inner = 500;
  double grad_tol = 1e-8;
  double feasibility_tol = 1e-6;  // relative to 1 + target magnitude
  int lbfgs_memory = 12;
  double max_action = 1e6;        // controls with a larger action count as unbounded
  double initial_scale = 0.0;     // constant starting control (used when no start is given)
  std::shared_ptr<const Control> start;
  GradientMode gradient = GradientMode::sensitivity;
  EvolverOptions evolver;
};

struct TraceRow {
  int round;
  int iteration;
  double action;
  double residual;
};

struct ActionValue {
  double value = 0.0;  // +infinity when infeasible
  bool feasible = false;
  Control beta;
  SpaceTimeField psi;
  double residual = 0.0;
  int rounds = 0;
  int iterations = 0;
  std::vector<TraceRow> trace;

  nlohmann::json to_json() const;
};

class OptimizerError : public NumericalFailure {
 public:
  OptimizerError(const std::string& what, ActionValue best)
      : NumericalFailure(what), best_(std::make_shared<ActionValue>(std::move(best))) {}
  const ActionValue& best() const noexcept { return *best_; }

 private:
  std::shared_ptr<ActionValue> best_;
};

// 1/2 int |beta|^2 ds
double action_of(const Control& beta);

// Augmented Lagrangian objective of the discretized minimum action problem,
//   J(beta) = 1/2 sum |beta_m|^2 dt_m + penalty(psi(beta)),
// with psi(beta) the exponential Euler skeleton. Parameters are beta in time-major order.
class PenalizedObjective {
 public:
  PenalizedObjective(const KernelOperator& op, const CoefficientSet& c, std::span<const double> xi,
                     const TargetSpec& target, const TimeGrid& grid, const EvolverOptions& options = {});

  std::size_t parameters() const noexcept { return grid_.steps() * static_cast<std::size_t>(c_->k); }
  const TimeGrid& grid() const noexcept { return grid_; }

  void set_penalty(double mu) noexcept { mu_ = mu; }
  double penalty() const noexcept { return mu_; }
  // Multiplier update after an inner solve at beta.
  void update_multipliers(std::span<const double> beta);
  void reset_multipliers();

  double value(std::span<const double> beta);
  // Gradient by forward sensitivity propagation through the linearized steps.
  double value_and_gradient(std::span<const double> beta, std::span<double> grad);
  // Central differences on the listed parameters (all when empty).
  std::vector<double> finite_difference_gradient(std::span<const double> beta,
                                                 std::span<const std::size_t> indices = {},
                                                 double step = 1e-6);

  // Constraint violation (0 when the target is met) of the trajectory from beta.
  double residual(std::span<const double> beta);
  // Norm of the residual's gradient with respect to beta at the last evaluation.
  double constraint_gradient_norm() const noexcept { return constraint_grad_norm_; }
  double action(std::span<const double> beta) const;

 private:
  struct Forward;
  void forward(std::span<const double> beta, Forward& out);
  double penalty_value(const Forward& f) const;

  const KernelOperator* op_;
  const CoefficientSet* c_;
  std::vector<double> xi_;
  TargetSpec target_;
  TimeGrid grid_;
  EvolverOptions options_;
  MildStepper stepper_;
  std::vector<std::array<long, 2>> neighbors_[2];  // per axis: (down, up) interior index or -1
  double mu_ = 10.0;
  std::vector<double> lambda_vec_;  // terminal_field multipliers
  double lambda_ = 0.0;             // inequality multiplier
  double constraint_grad_norm_ = 0.0;
};

// Minimizes 1/2 int |beta|^2 subject to the skeleton trajectory meeting the target.
// Returns an infeasible value (+infinity) when the residual cannot be reduced because the
// control has no effect or would need an unbounded action; throws OptimizerError otherwise.
ActionValue minimize_action(const KernelOperator& op, const CoefficientSet& c, std::span<const double> xi,
                            const TargetSpec& target, const TimeGrid& grid, const ActionOptions& options = {});

// Rate of reaching psi(T) from each initial field of the sequence.
std::vector<double> lsc_probe(const KernelOperator& op, const CoefficientSet& c,
                              const std::vector<std::vector<double>>& xi_sequence, const SpaceTimeField& psi,
                              const ActionOptions& options = {});

void write_trace_csv(const ActionValue& v, std::ostream& out);

}  // namespace ldplab
