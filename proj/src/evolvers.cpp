#include "ldplab/evolvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ldplab/error.hpp"
#include "ldplab/simd/kernels.hpp"

namespace ldplab {
namespace {

void check_inputs(const KernelOperator& op, const CoefficientSet& c, std::span<const double> xi) {
  if (xi.size() != op.size()) throw DomainError("initial field size does not match the grid");
  if (c.d != op.grid().dim()) throw DomainError("coefficient dimension does not match the grid");
  if (c.g1.size() != static_cast<std::size_t>(c.d) || c.g2.size() != static_cast<std::size_t>(c.d) ||
      c.sigma.size() != static_cast<std::size_t>(c.k)) {
    throw DomainError("coefficient set is inconsistent with its d and k");
  }
  for (double v : xi) {
    if (!std::isfinite(v)) throw DomainError("initial field is not finite");
  }
}

void check_path(const CoefficientSet& c, const NoisePath& path) {
  if (path.k != c.k) throw DomainError("noise dimension does not match the coefficients");
  if (path.grid.steps() < 1) throw DomainError("empty time grid");
}

void check_control(const CoefficientSet& c, const TimeGrid& grid, const Control& phi) {
  if (!(phi.grid == grid)) throw DomainError("control and solver use different time grids");
  if (phi.k != c.k) throw DomainError("control dimension does not match the coefficients");
}

double resolved_rho(const CoefficientSet& c, const EvolverOptions& o) {
  return o.rho > 0.0 ? o.rho : default_rho(c);
}

}  // namespace

double default_rho(const CoefficientSet& c) {
  return std::max(2.0 * c.nu, static_cast<double>(c.d) + 1.0) + 1.0;
}

nlohmann::json SolveDiagnostics::to_json() const {
  return {{"steps", steps},
          {"picard_iterations", picard_iterations},
          {"last_increment", last_increment},
          {"converged", converged},
          {"truncation_level", truncation_level},
          {"blow_up", blow_up},
          {"blow_up_time", blow_up_time},
          {"max_step_ratio", max_step_ratio}};
}

MildStepper::MildStepper(const KernelOperator& op, const CoefficientSet& c, const TimeGrid& grid,
                         const EvolverOptions& options)
    : op_(&op),
      coeffs_(options.truncation > 0.0 ? truncate(c, options.truncation) : c),
      grid_(grid),
      options_(options),
      x_(op.grid().interior_positions()),
      work_(op.size()),
      tmp_(op.size()),
      diff_(op.size()) {
  if (grid.steps() < 1) throw DomainError("empty time grid");
}

SemigroupStep& MildStepper::semigroup(std::size_t m) {
  const double dt = grid_.dt(m);
  if (!step_ || step_->time() != dt) step_.emplace(*op_, dt);
  return *step_;
}

void MildStepper::propagate(std::size_t m, std::span<const double> in, std::span<double> out) {
  semigroup(m).apply(in, out);
}

void MildStepper::guard(std::size_t m, std::span<const double> u) {
  if (!options_.step_guard || !coeffs_.has_flux()) return;
  const double s = simd::max_abs(u);
  const double bound =
      options_.step_guard_c * op_->grid().min_spacing() / std::max(1.0, std::pow(s, coeffs_.nu - 1.0));
  const double ratio = grid_.dt(m) / bound;
  max_ratio_ = std::max(max_ratio_, ratio);
  if (ratio > 1.0) throw StepGuardViolation(grid_.times[m], ratio);
}

void MildStepper::assemble(std::size_t m, std::span<const double> u, const double* dB, double sqrt_eps,
                           const double* phi, StepTerms* terms) {
  const std::size_t n = u.size();
  const double t = grid_.times[m];
  const double dt = grid_.dt(m);
  std::copy(u.begin(), u.end(), work_.begin());
  if (terms) {
    for (auto* v : {&terms->noise, &terms->flux, &terms->drift, &terms->control}) v->assign(n, 0.0);
  }
  if (!coeffs_.f.zero) {
    for (std::size_t i = 0; i < n; ++i) {
      const double inc = dt * coeffs_.f.value(t, x_[i], u[i]);
      work_[i] += inc;
      if (terms) terms->drift[i] = inc;
    }
  }
  for (int a = 0; a < coeffs_.d; ++a) {
    const auto& g1 = coeffs_.g1[static_cast<std::size_t>(a)];
    const auto& g2 = coeffs_.g2[static_cast<std::size_t>(a)];
    if (g1.zero && g2.zero) continue;
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = g1(t, x_[i], u[i]) + g2(t, x_[i], u[i]);
    op_->central_difference(a, tmp_, diff_);
    for (std::size_t i = 0; i < n; ++i) {
      const double inc = dt * diff_[i];
      work_[i] += inc;
      if (terms) terms->flux[i] += inc;
    }
  }
  for (std::size_t j = 0; j < coeffs_.sigma.size(); ++j) {
    const auto& sj = coeffs_.sigma[j];
    if (sj.zero) continue;
    const double noise = dB ? sqrt_eps * dB[j] : 0.0;
    double drive = noise;
    if (phi && phi[j] != 0.0) drive += phi[j] * dt;
    if (drive == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = sj.value(t, x_[i], u[i]);
      work_[i] += s * drive;
      if (terms) {
        terms->noise[i] += s * noise;
        if (phi) terms->control[i] += s * (phi[j] * dt);
      }
    }
  }
}

void MildStepper::step(std::size_t m, std::span<double> u, const double* dB, double sqrt_eps,
                       const double* phi) {
  guard(m, u);
  assemble(m, u, dB, sqrt_eps, phi, nullptr);
  propagate(m, work_, u);
  const double mag = simd::max_abs(u);
  if (!(mag <= options_.blowup_threshold)) throw BlowUp(grid_.times[m + 1], mag);
}

void MildStepper::step_terms(std::size_t m, std::span<double> u, const double* dB, double sqrt_eps,
                             const double* phi, StepTerms& terms) {
  guard(m, u);
  assemble(m, u, dB, sqrt_eps, phi, &terms);
  propagate(m, work_, u);
  const double mag = simd::max_abs(u);
  if (!(mag <= options_.blowup_threshold)) throw BlowUp(grid_.times[m + 1], mag);
}

void MildStepper::picard_step(std::size_t m, std::span<const double> frozen, std::span<double> v,
                              const double* phi) {
  guard(m, frozen);
  assemble(m, frozen, nullptr, 0.0, phi, nullptr);
  for (std::size_t i = 0; i < v.size(); ++i) work_[i] += v[i] - frozen[i];
  propagate(m, work_, v);
  const double mag = simd::max_abs(v);
  if (!(mag <= options_.blowup_threshold)) throw BlowUp(grid_.times[m + 1], mag);
}

namespace {

Trajectory run_forward(const KernelOperator& op, const CoefficientSet& c, std::span<const double> xi,
                       double eps, const NoisePath& path, const Control* phi, const EvolverOptions& options) {
  check_inputs(op, c, xi);
  check_path(c, path);
  if (!(eps >= 0.0)) throw DomainError("eps must be >= 0");
  if (phi) check_control(c, path.grid, *phi);
  Trajectory out{SpaceTimeField(op.grid(), path.grid, resolved_rho(c, options)), {}};
  MildStepper stepper(op, c, path.grid, options);
  const std::size_t M = path.grid.steps();
  const std::size_t k = static_cast<std::size_t>(c.k);
  const double se = std::sqrt(eps);
  std::vector<double> u(xi.begin(), xi.end());
  std::copy(u.begin(), u.end(), out.field.at(0).begin());
  out.diagnostics.steps = M;
  out.diagnostics.truncation_level = options.truncation;
  for (std::size_t m = 0; m < M; ++m) {
    const double* dB = eps > 0.0 ? path.increments.data() + m * k : nullptr;
    stepper.step(m, u, dB, se, phi ? phi->values.data() + m * k : nullptr);
    std::copy(u.begin(), u.end(), out.field.at(m + 1).begin());
  }
  out.diagnostics.max_step_ratio = stepper.max_step_ratio();
  return out;
}

}  // namespace

Trajectory integrate_spde(const KernelOperator& op, const CoefficientSet& c, std::span<const double> xi,
                          double eps, const NoisePath& path, const EvolverOptions& options) {
  return run_forward(op, c, xi, eps, path, nullptr, options);
}

Trajectory integrate_controlled(const KernelOperator& op, const CoefficientSet& c,
                                std::span<const double> xi, double eps, const NoisePath& path,
                                const Control& phi, const EvolverOptions& options) {
  return run_forward(op, c, xi, eps, path, &phi, options);
}

Trajectory solve_skeleton(const KernelOperator& op, const CoefficientSet& c, std::span<const double> xi,
                          const Control& phi, const EvolverOptions& options) {
  check_inputs(op, c, xi);
  if (phi.k != c.k) throw DomainError("control dimension does not match the coefficients");
  const TimeGrid& grid = phi.grid;
  const std::size_t M = grid.steps();
  if (M < 1) throw DomainError("empty time grid");
  const std::size_t n = op.size();
  const std::size_t k = static_cast<std::size_t>(c.k);
  const double rho = resolved_rho(c, options);

  SpaceTimeField prev(op.grid(), grid, rho);
  std::copy(xi.begin(), xi.end(), prev.at(0).begin());
  if (options.picard_start == PicardStart::heat) {
    for (std::size_t m = 1; m <= M; ++m) op.apply(grid.times[m], xi, prev.at(m));
  }
  SpaceTimeField next = prev;
  MildStepper stepper(op, c, grid, options);
  std::vector<double> u(n);
  Trajectory out;
  out.diagnostics.steps = M;
  out.diagnostics.truncation_level = options.truncation;
  out.diagnostics.converged = false;
  for (int sweep = 1; sweep <= options.picard_max_sweeps; ++sweep) {
    // nonlinear terms frozen at the previous sweep, linear part carried exactly
    std::copy(xi.begin(), xi.end(), u.begin());
    for (std::size_t m = 0; m < M; ++m) {
      stepper.picard_step(m, prev.at(m), u, phi.values.data() + m * k);
      std::copy(u.begin(), u.end(), next.at(m + 1).begin());
    }
    double diff = 0.0;
    for (std::size_t i = 0; i < next.data().size(); ++i) {
      diff = std::max(diff, std::fabs(next.data()[i] - prev.data()[i]));
    }
    const double inc = diff / std::max(1.0, next.sup_abs());
    std::swap(prev, next);
    out.diagnostics.picard_iterations = sweep;
    out.diagnostics.last_increment = inc;
    if (inc < options.picard_tol) {
      out.diagnostics.converged = true;
      break;
    }
  }
  if (!out.diagnostics.converged) {
    throw ConvergenceError("skeleton Picard sweeps did not converge", out.diagnostics.picard_iterations,
                           out.diagnostics.last_increment);
  }
  out.diagnostics.max_step_ratio = stepper.max_step_ratio();
  out.field = std::move(prev);
  return out;
}

Decomposition decompose_terms(const KernelOperator& op, const CoefficientSet& c,
                              std::span<const double> xi, double eps, const NoisePath& path,
                              const Control& phi, const EvolverOptions& options) {
  check_inputs(op, c, xi);
  check_path(c, path);
  check_control(c, path.grid, phi);
  if (!(eps >= 0.0)) throw DomainError("eps must be >= 0");
  const double rho = resolved_rho(c, options);
  const std::size_t M = path.grid.steps();
  const std::size_t n = op.size();
  const std::size_t k = static_cast<std::size_t>(c.k);
  const double se = std::sqrt(eps);

  Decomposition out{Trajectory{SpaceTimeField(op.grid(), path.grid, rho), {}}, {}};
  for (auto& z : out.terms) z = SpaceTimeField(op.grid(), path.grid, rho);
  std::copy(xi.begin(), xi.end(), out.run.field.at(0).begin());
  std::copy(xi.begin(), xi.end(), out.terms[0].at(0).begin());

  MildStepper stepper(op, c, path.grid, options);
  StepTerms inc;
  std::vector<double> u(xi.begin(), xi.end());
  std::vector<double> buf(n);
  for (std::size_t m = 0; m < M; ++m) {
    const double* dB = eps > 0.0 ? path.increments.data() + m * k : nullptr;
    stepper.step_terms(m, u, dB, se, phi.values.data() + m * k, inc);
    std::copy(u.begin(), u.end(), out.run.field.at(m + 1).begin());
    const std::array<const std::vector<double>*, 5> parts{nullptr, &inc.noise, &inc.flux, &inc.drift,
                                                          &inc.control};
    for (std::size_t l = 0; l < 5; ++l) {
      const auto z = out.terms[l].at(m);
      std::copy(z.begin(), z.end(), buf.begin());
      if (parts[l]) {
        for (std::size_t i = 0; i < n; ++i) buf[i] += (*parts[l])[i];
      }
      stepper.propagate(m, buf, out.terms[l].at(m + 1));
    }
  }
  out.run.diagnostics.steps = M;
  out.run.diagnostics.max_step_ratio = stepper.max_step_ratio();
  out.run.diagnostics.truncation_level = options.truncation;
  return out;
}

PathSummary run_path(MildStepper& stepper, std::span<const double> xi, double eps,
                     std::span<const double> dB, const Control* phi, double rho,
                     const SpaceTimeField* sup_reference) {
  const TimeGrid& grid = stepper.grid();
  const std::size_t M = grid.steps();
  const std::size_t k = static_cast<std::size_t>(stepper.coefficients().k);
  const double vol = stepper.op().grid().cell_volume();
  if (dB.size() != M * k) throw DomainError("run_path: increment array has the wrong size");
  if (phi) check_control(stepper.coefficients(), grid, *phi);
  const double se = std::sqrt(eps);
  PathSummary s;
  std::vector<double> u(xi.begin(), xi.end());
  std::vector<double> diff(u.size());
  auto measure = [&](std::size_t m) {
    if (!sup_reference) return lp_norm(u, rho, vol);
    const auto ref = sup_reference->at(m);
    for (std::size_t i = 0; i < u.size(); ++i) diff[i] = u[i] - ref[i];
    return lp_norm(diff, rho, vol);
  };
  s.sup_rho_norm = measure(0);
  try {
    for (std::size_t m = 0; m < M; ++m) {
      stepper.step(m, u, eps > 0.0 ? dB.data() + m * k : nullptr, se,
                   phi ? phi->values.data() + m * k : nullptr);
      s.sup_rho_norm = std::max(s.sup_rho_norm, measure(m + 1));
    }
  } catch (const BlowUp& e) {
    s.blow_up = true;
    s.blow_up_time = e.time();
    s.sup_rho_norm = std::numeric_limits<double>::infinity();
  }
  s.terminal = std::move(u);
  return s;
}

}  // namespace ldplab
