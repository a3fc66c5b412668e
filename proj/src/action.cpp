#include "ldplab/action.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <ostream>

#include "ldplab/simd/kernels.hpp"

namespace ldplab {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double dot(std::span<const double> a, std::span<const double> b) { return simd::dot(a, b); }

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// Limited-memory BFGS with Armijo backtracking. Returns the iteration count.
int lbfgs(PenalizedObjective& obj, std::vector<double>& x, int max_iter, double gtol, int memory,
          const std::function<void(int, std::span<const double>)>& on_iteration) {
  const std::size_t n = x.size();
  std::vector<double> g(n), gn(n), d(n), xn(n);
  double f = obj.value_and_gradient(x, g);
  std::deque<std::vector<double>> S, Y;
  std::deque<double> R;
  std::vector<double> alpha(static_cast<std::size_t>(memory));
  int it = 0;
  int stalls = 0;
  for (; it < max_iter; ++it) {
    if (!(norm2(g) >= gtol)) break;
    // two-loop recursion
    d = g;
    for (std::size_t i = S.size(); i-- > 0;) {
      alpha[i] = R[i] * dot(S[i], d);
      simd::axpy(-alpha[i], Y[i], d);
    }
    if (!S.empty()) {
      const double gamma = dot(S.back(), Y.back()) / dot(Y.back(), Y.back());
      for (double& v : d) v *= gamma;
    }
    for (std::size_t i = 0; i < S.size(); ++i) {
      const double b = R[i] * dot(Y[i], d);
      simd::axpy(alpha[i] - b, S[i], d);
    }
    for (double& v : d) v = -v;
    double gd = dot(g, d);
    if (!(gd < 0.0)) {
      S.clear();
      Y.clear();
      R.clear();
      for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
      gd = -dot(g, g);
    }
    double step = S.empty() ? std::min(1.0, 1.0 / norm2(g)) : 1.0;
    double fn = kInf;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < n; ++i) xn[i] = x[i] + step * d[i];
      fn = obj.value(xn);
      if (fn <= f + 1e-4 * step * gd) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (S.empty()) break;
      S.clear();
      Y.clear();
      R.clear();
      continue;
    }
    fn = obj.value_and_gradient(xn, gn);
    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = xn[i] - x[i];
      y[i] = gn[i] - g[i];
    }
    const double sy = dot(s, y);
    if (sy > 1e-14 * norm2(s) * norm2(y)) {
      if (static_cast<int>(S.size()) == memory) {
        S.pop_front();
        Y.pop_front();
        R.pop_front();
      }
      S.push_back(std::move(s));
      Y.push_back(std::move(y));
      R.push_back(1.0 / sy);
    }
    stalls = std::fabs(f - fn) <= 1e-16 * std::max(1.0, std::fabs(f)) ? stalls + 1 : 0;
    x.swap(xn);
    g.swap(gn);
    f = fn;
    if (on_iteration) on_iteration(it, x);
    if (stalls >= 3) break;
  }
  return it;
}

}  // namespace

TargetSpec TargetSpec::terminal(std::vector<double> field) {
  TargetSpec t;
  t.kind = TargetKind::terminal_field;
  t.field = std::move(field);
  return t;
}

TargetSpec TargetSpec::point_exceedance(const Grid& grid, const Point& x0, double level) {
  TargetSpec t;
  t.kind = TargetKind::terminal_functional_threshold;
  t.weights.assign(grid.size(), 0.0);
  t.weights[grid.nearest_interior(x0)] = 1.0 / grid.cell_volume();
  t.level = level;
  return t;
}

TargetSpec TargetSpec::mean_exceedance(const Grid& grid, double level) {
  TargetSpec t;
  t.kind = TargetKind::terminal_functional_threshold;
  double vol = 1.0;
  for (int a = 0; a < grid.dim(); ++a) vol *= grid.hi(a) - grid.lo(a);
  t.weights.assign(grid.size(), 1.0 / vol);
  t.level = level;
  return t;
}

TargetSpec TargetSpec::ball_exit(double radius, double rho, std::vector<double> center) {
  TargetSpec t;
  t.kind = TargetKind::terminal_ball_exit;
  t.level = radius;
  t.rho = rho;
  t.field = std::move(center);
  return t;
}

TargetSpec TargetSpec::tube_exit(double radius, double rho) {
  TargetSpec t;
  t.kind = TargetKind::tube_exit;
  t.level = radius;
  t.rho = rho;
  return t;
}

double TargetSpec::magnitude(const Grid& grid) const {
  if (kind == TargetKind::terminal_field) return lp_norm(field, 2.0, grid.cell_volume());
  return std::isfinite(level) ? std::fabs(level) : 0.0;
}

nlohmann::json TargetSpec::to_json() const {
  static const char* names[] = {"terminal_field", "terminal_functional_threshold", "terminal_ball_exit",
                                "tube_exit"};
  nlohmann::json j{{"kind", names[static_cast<int>(kind)]}, {"rho", rho}};
  j["level"] = std::isfinite(level) ? nlohmann::json(level) : nlohmann::json(level > 0 ? "inf" : "-inf");
  if (!field.empty()) j["field"] = field;
  if (!weights.empty()) j["weights"] = weights;
  return j;
}

TargetSpec prepare_target(TargetSpec target, const KernelOperator& op, const CoefficientSet& c,
                          std::span<const double> xi, const TimeGrid& grid, const EvolverOptions& options) {
  const std::size_t n = op.size();
  switch (target.kind) {
    case TargetKind::terminal_field:
      if (target.field.size() != n) throw DomainError("terminal_field target needs one value per node");
      break;
    case TargetKind::terminal_functional_threshold:
      if (target.weights.size() != n) throw DomainError("functional target needs one weight per node");
      break;
    case TargetKind::terminal_ball_exit:
      if (target.field.empty()) target.field.assign(n, 0.0);
      if (target.field.size() != n) throw DomainError("ball center needs one value per node");
      if (!(target.rho >= 1.0)) throw DomainError("ball target needs rho >= 1");
      break;
    case TargetKind::tube_exit:
      if (!(target.rho >= 1.0)) throw DomainError("tube target needs rho >= 1");
      if (!target.reference) {
        target.reference = std::make_shared<const SpaceTimeField>(
            solve_skeleton(op, c, xi, Control::zero(grid, c.k), options).field);
      }
      if (!(target.reference->times() == grid) || target.reference->nodes() != n) {
        throw DomainError("tube reference does not match the solver grids");
      }
      break;
  }
  return target;
}

double event_margin(const TargetSpec& target, const Grid& grid, std::span<const double> terminal,
                    double sup_distance) {
  const double vol = grid.cell_volume();
  switch (target.kind) {
    case TargetKind::terminal_field:
      throw DomainError("terminal_field targets are not events with positive probability");
    case TargetKind::terminal_functional_threshold: {
      double F = 0.0;
      for (std::size_t i = 0; i < terminal.size(); ++i) F += target.weights[i] * terminal[i];
      return F * vol - target.level;
    }
    case TargetKind::terminal_ball_exit: {
      std::vector<double> v(terminal.begin(), terminal.end());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= target.field.empty() ? 0.0 : target.field[i];
      return lp_norm(v, target.rho, vol) - target.level;
    }
    case TargetKind::tube_exit:
      return sup_distance - target.level;
  }
  return 0.0;
}

double action_of(const Control& beta) { return 0.5 * control_l2_norm(beta); }

nlohmann::json ActionValue::to_json() const {
  nlohmann::json j;
  j["value"] = std::isfinite(value) ? nlohmann::json(value) : nlohmann::json("inf");
  j["feasible"] = feasible;
  j["residual"] = residual;
  j["rounds"] = rounds;
  j["iterations"] = iterations;
  return j;
}

void write_trace_csv(const ActionValue& v, std::ostream& out) {
  out << "round,iteration,action,residual\n";
  out.precision(17);
  for (const auto& r : v.trace) out << r.round << ',' << r.iteration << ',' << r.action << ',' << r.residual << '\n';
}

// Trajectory of one forward pass and the constraint quantities derived from it.
struct PenalizedObjective::Forward {
  std::vector<double> psi;  // (M+1) x N
  bool ok = true;
  std::size_t m_star = 0;   // time index carrying the constraint
  std::vector<double> r;    // terminal_field residual
  double c = 0.0;           // inequality margin
  std::vector<double> dc;   // gradient of the margin with respect to psi(m_star)
};

PenalizedObjective::PenalizedObjective(const KernelOperator& op, const CoefficientSet& c,
                                       std::span<const double> xi, const TargetSpec& target,
                                       const TimeGrid& grid, const EvolverOptions& options)
    : op_(&op),
      c_(&c),
      xi_(xi.begin(), xi.end()),
      target_(prepare_target(target, op, c, xi, grid, options)),
      grid_(grid),
      options_(options),
      stepper_(op, c, grid, options) {
  if (xi.size() != op.size()) throw DomainError("initial field size does not match the grid");
  const Grid& g = op.grid();
  for (int a = 0; a < g.dim(); ++a) {
    auto& nb = neighbors_[a];
    nb.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      auto up = g.interior_node(i);
      auto down = up;
      up[a] += 1;
      down[a] -= 1;
      nb[i] = {g.interior_index(down), g.interior_index(up)};
    }
  }
  reset_multipliers();
}

void PenalizedObjective::reset_multipliers() {
  lambda_vec_.assign(target_.kind == TargetKind::terminal_field ? op_->size() : 0, 0.0);
  lambda_ = 0.0;
}

double PenalizedObjective::action(std::span<const double> beta) const {
  const std::size_t k = static_cast<std::size_t>(c_->k);
  double s = 0.0;
  for (std::size_t m = 0; m < grid_.steps(); ++m) {
    double row = 0.0;
    for (std::size_t j = 0; j < k; ++j) row += beta[m * k + j] * beta[m * k + j];
    s += row * grid_.dt(m);
  }
  return 0.5 * s;
}

void PenalizedObjective::forward(std::span<const double> beta, Forward& out) {
  const std::size_t n = op_->size();
  const std::size_t M = grid_.steps();
  const std::size_t k = static_cast<std::size_t>(c_->k);
  const double vol = op_->grid().cell_volume();
  out.psi.resize((M + 1) * n);
  std::copy(xi_.begin(), xi_.end(), out.psi.begin());
  std::vector<double> u(xi_);
  out.ok = true;
  try {
    for (std::size_t m = 0; m < M; ++m) {
      stepper_.step(m, u, nullptr, 0.0, beta.data() + m * k);
      std::copy(u.begin(), u.end(), out.psi.begin() + static_cast<std::ptrdiff_t>((m + 1) * n));
    }
  } catch (const NumericalFailure&) {
    out.ok = false;
    return;
  }
  out.m_star = M;
  const std::span<const double> terminal(out.psi.data() + M * n, n);
  switch (target_.kind) {
    case TargetKind::terminal_field:
      out.r.resize(n);
      for (std::size_t i = 0; i < n; ++i) out.r[i] = terminal[i] - target_.field[i];
      return;
    case TargetKind::terminal_functional_threshold: {
      out.c = event_margin(target_, op_->grid(), terminal, 0.0);
      out.dc.resize(n);
      for (std::size_t i = 0; i < n; ++i) out.dc[i] = target_.weights[i] * vol;
      return;
    }
    case TargetKind::terminal_ball_exit:
    case TargetKind::tube_exit: {
      std::vector<double> v(n);
      double best = -1.0;
      const std::size_t first = target_.kind == TargetKind::tube_exit ? 1 : M;
      for (std::size_t m = first; m <= M; ++m) {
        const double* ref = target_.kind == TargetKind::tube_exit ? target_.reference->at(m).data()
                                                                   : target_.field.data();
        for (std::size_t i = 0; i < n; ++i) v[i] = out.psi[m * n + i] - ref[i];
        const double d = lp_norm(v, target_.rho, vol);
        if (d > best) {
          best = d;
          out.m_star = m;
        }
      }
      const double* ref = target_.kind == TargetKind::tube_exit ? target_.reference->at(out.m_star).data()
                                                                 : target_.field.data();
      for (std::size_t i = 0; i < n; ++i) v[i] = out.psi[out.m_star * n + i] - ref[i];
      out.c = best - target_.level;
      out.dc.assign(n, 0.0);
      if (best > 0.0) {
        const double p = target_.rho;
        const double scale = vol / std::pow(best, p - 1.0);
        for (std::size_t i = 0; i < n; ++i) {
          const double a = std::fabs(v[i]);
          out.dc[i] = (v[i] < 0.0 ? -1.0 : 1.0) * std::pow(a, p - 1.0) * scale;
        }
      }
      return;
    }
  }
}

double PenalizedObjective::penalty_value(const Forward& f) const {
  if (!f.ok) return kInf;
  if (target_.kind == TargetKind::terminal_field) {
    const double vol = op_->grid().cell_volume();
    double lin = 0.0, quad = 0.0;
    for (std::size_t i = 0; i < f.r.size(); ++i) {
      lin += lambda_vec_[i] * f.r[i];
      quad += f.r[i] * f.r[i];
    }
    return (lin + 0.5 * mu_ * quad) * vol;
  }
  const double a = std::max(0.0, lambda_ - mu_ * f.c);
  return (a * a - lambda_ * lambda_) / (2.0 * mu_);
}

double PenalizedObjective::value(std::span<const double> beta) {
  Forward f;
  forward(beta, f);
  return action(beta) + penalty_value(f);
}

double PenalizedObjective::residual(std::span<const double> beta) {
  Forward f;
  forward(beta, f);
  if (!f.ok) return kInf;
  if (target_.kind == TargetKind::terminal_field) return lp_norm(f.r, 2.0, op_->grid().cell_volume());
  return std::max(0.0, -f.c);
}

void PenalizedObjective::update_multipliers(std::span<const double> beta) {
  Forward f;
  forward(beta, f);
  if (!f.ok) return;
  if (target_.kind == TargetKind::terminal_field) {
    for (std::size_t i = 0; i < f.r.size(); ++i) lambda_vec_[i] += mu_ * f.r[i];
  } else {
    lambda_ = std::max(0.0, lambda_ - mu_ * f.c);
  }
}

double PenalizedObjective::value_and_gradient(std::span<const double> beta, std::span<double> grad) {
  const std::size_t n = op_->size();
  const std::size_t k = static_cast<std::size_t>(c_->k);
  const std::size_t P = parameters();
  const double vol = op_->grid().cell_volume();
  Forward f;
  forward(beta, f);
  for (std::size_t m = 0; m < grid_.steps(); ++m) {
    for (std::size_t j = 0; j < k; ++j) grad[m * k + j] = beta[m * k + j] * grid_.dt(m);
  }
  const double val = action(beta) + penalty_value(f);
  if (!f.ok) return val;

  // q = d penalty / d psi(m_star); dir = gradient of the constraint residual.
  std::vector<double> q(n), dir(n);
  if (target_.kind == TargetKind::terminal_field) {
    for (std::size_t i = 0; i < n; ++i) {
      q[i] = (lambda_vec_[i] + mu_ * f.r[i]) * vol;
      dir[i] = f.r[i] * vol;
    }
  } else {
    const double a = std::max(0.0, lambda_ - mu_ * f.c);
    for (std::size_t i = 0; i < n; ++i) {
      q[i] = -a * f.dc[i];
      dir[i] = f.dc[i];
    }
  }

  // Forward sensitivities S = d psi_m / d beta, N x P row-major, propagated to m_star.
  const CoefficientSet& cs = stepper_.coefficients();
  const auto& x = stepper_.positions();
  const int d = op_->grid().dim();
  std::vector<double> S(n * P, 0.0), T(n * P, 0.0);
  std::vector<double> diag(n), sig(n * k);
  std::vector<double> gp[2];
  std::optional<SemigroupStep> step;
  for (std::size_t m = 0; m < f.m_star; ++m) {
    const double t = grid_.times[m];
    const double dt = grid_.dt(m);
    const double* u = f.psi.data() + m * n;
    const double* b = beta.data() + m * k;
    for (std::size_t i = 0; i < n; ++i) {
      double dg = 1.0 + dt * cs.f.derivative(t, x[i], u[i]);
      for (std::size_t j = 0; j < k; ++j) {
        sig[i * k + j] = cs.sigma[j](t, x[i], u[i]);
        if (b[j] != 0.0) dg += cs.sigma[j].derivative(t, x[i], u[i]) * b[j] * dt;
      }
      diag[i] = dg;
    }
    for (int a = 0; a < d; ++a) {
      gp[a].assign(n, 0.0);
      const auto& g1 = cs.g1[static_cast<std::size_t>(a)];
      const auto& g2 = cs.g2[static_cast<std::size_t>(a)];
      if (g1.zero && g2.zero) continue;
      for (std::size_t i = 0; i < n; ++i) gp[a][i] = g1.derivative(t, x[i], u[i]) + g2.derivative(t, x[i], u[i]);
    }
    const std::size_t cols = m * k;
    for (std::size_t i = 0; i < n; ++i) {
      double* Ti = T.data() + i * P;
      const double* Si = S.data() + i * P;
      for (std::size_t p = 0; p < cols; ++p) Ti[p] = diag[i] * Si[p];
      for (int a = 0; a < d; ++a) {
        const auto [down, up] = neighbors_[a][i];
        const double w = dt * 0.5 / op_->grid().spacing(a);
        if (up >= 0 && gp[a][static_cast<std::size_t>(up)] != 0.0) {
          simd::active().axpy(w * gp[a][static_cast<std::size_t>(up)], S.data() + static_cast<std::size_t>(up) * P, Ti, cols);
        }
        if (down >= 0 && gp[a][static_cast<std::size_t>(down)] != 0.0) {
          simd::active().axpy(-w * gp[a][static_cast<std::size_t>(down)], S.data() + static_cast<std::size_t>(down) * P, Ti, cols);
        }
      }
      for (std::size_t j = 0; j < k; ++j) Ti[cols + j] = sig[i * k + j] * dt;
    }
    S.swap(T);
    if (!step || step->time() != dt) step.emplace(*op_, dt);
    step->apply_columns(S, P, cols + k);
  }
  std::vector<double> sq(P, 0.0), sd(P, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* Si = S.data() + i * P;
    if (q[i] != 0.0) simd::active().axpy(q[i], Si, sq.data(), P);
    if (dir[i] != 0.0) simd::active().axpy(dir[i], Si, sd.data(), P);
  }
  for (std::size_t p = 0; p < P; ++p) grad[p] += sq[p];
  constraint_grad_norm_ = norm2(sd);
  return val;
}

std::vector<double> PenalizedObjective::finite_difference_gradient(std::span<const double> beta,
                                                                   std::span<const std::size_t> indices,
                                                                   double step) {
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  if (idx.empty()) {
    for (std::size_t p = 0; p < parameters(); ++p) idx.push_back(p);
  }
  std::vector<double> b(beta.begin(), beta.end());
  std::vector<double> out;
  out.reserve(idx.size());
  for (std::size_t p : idx) {
    const double h = step * std::max(1.0, std::fabs(beta[p]));
    b[p] = beta[p] + h;
    const double fp = value(b);
    b[p] = beta[p] - h;
    const double fm = value(b);
    b[p] = beta[p];
    out.push_back((fp - fm) / (2.0 * h));
  }
  return out;
}

ActionValue minimize_action(const KernelOperator& op, const CoefficientSet& c, std::span<const double> xi,
                            const TargetSpec& target_in, const TimeGrid& grid, const ActionOptions& options) {
  const TargetSpec target = prepare_target(target_in, op, c, xi, grid, options.evolver);
  PenalizedObjective obj(op, c, xi, target, grid, options.evolver);
  const std::size_t P = obj.parameters();
  std::vector<double> beta(P, options.initial_scale);
  if (options.start) {
    if (!(options.start->grid == grid) || options.start->k != c.k) {
      throw DomainError("minimize_action: starting control does not match the solver grid");
    }
    beta = options.start->values;
  }
  const double tol = options.feasibility_tol * (1.0 + target.magnitude(op.grid()));

  ActionValue out;
  out.beta = Control::zero(grid, c.k);
  double mu = options.penalty0;
  double prev_action = kInf;
  bool flat = false;
  int total = 0;
  for (int round = 0; round < options.rounds; ++round) {
    obj.set_penalty(mu);
    if (options.gradient == GradientMode::finite_difference) {
      // Plain gradient descent on finite differences; slow, kept for cross-checks.
      std::vector<double> g(P);
      for (int it = 0; it < options.max_inner; ++it) {
        g = obj.finite_difference_gradient(beta);
        if (!(norm2(g) >= options.grad_tol)) break;
        const double f0 = obj.value(beta);
        double step = 1.0;
        std::vector<double> trial(P);
        for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
          for (std::size_t p = 0; p < P; ++p) trial[p] = beta[p] - step * g[p];
          if (obj.value(trial) <= f0 - 1e-4 * step * simd::dot(g, g)) break;
        }
        beta = trial;
        ++total;
      }
    } else {
      total += lbfgs(obj, beta, options.max_inner, options.grad_tol, options.lbfgs_memory,
                     [&](int it, std::span<const double> b) {
                       if (it % 10 == 0) out.trace.push_back({round, it, obj.action(b), obj.residual(b)});
                     });
    }
    const double res = obj.residual(beta);
    const double act = obj.action(beta);
    out.trace.push_back({round, -1, act, res});
    out.rounds = round + 1;
    if (round == 0 && res > tol) {
      std::vector<double> g(P);
      obj.value_and_gradient(beta, g);
      if (obj.constraint_gradient_norm() <= 1e-12) {
        flat = true;
        break;
      }
    }
    obj.update_multipliers(beta);
    mu = std::min(mu * options.penalty_growth, options.max_penalty);
    if (res <= tol && std::fabs(act - prev_action) <= 1e-12 * (1.0 + act)) break;
    prev_action = act;
  }
  out.iterations = total;
  out.beta.values = beta;
  out.residual = obj.residual(beta);
  const double act = action_of(out.beta);
  if (out.residual <= tol && std::isfinite(act)) {
    out.feasible = true;
    out.value = act;
    out.psi = solve_skeleton(op, c, xi, out.beta, options.evolver).field;
    return out;
  }
  if (flat || !(act <= options.max_action)) {
    out.feasible = false;
    out.value = kInf;
    return out;
  }
  std::vector<double> g(P);
  obj.value_and_gradient(beta, g);
  if (obj.constraint_gradient_norm() <= 1e-12) {
    out.feasible = false;
    out.value = kInf;
    return out;
  }
  out.value = act;
  throw OptimizerError("minimize_action: residual " + std::to_string(out.residual) +
                           " above tolerance " + std::to_string(tol) + " after " +
                           std::to_string(out.rounds) + " rounds",
                       std::move(out));
}

std::vector<double> lsc_probe(const KernelOperator& op, const CoefficientSet& c,
                              const std::vector<std::vector<double>>& xi_sequence, const SpaceTimeField& psi,
                              const ActionOptions& options) {
  const auto terminal = psi.terminal();
  const TargetSpec target = TargetSpec::terminal(std::vector<double>(terminal.begin(), terminal.end()));
  std::vector<double> values;
  for (const auto& xi : xi_sequence) {
    values.push_back(minimize_action(op, c, xi, target, psi.times(), options).value);
  }
  return values;
}

}  // namespace ldplab
