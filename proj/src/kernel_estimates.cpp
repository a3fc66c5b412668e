#include "ldplab/kernel_estimates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "ldplab/error.hpp"

namespace ldplab {
namespace {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
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

double lp_norm_row(std::span<const double> row, double p, double vol) {
  double s = 0.0;
  for (double v : row) s += std::pow(std::fabs(v), p);
  return std::pow(s * vol, 1.0 / p);
}

// Kernel rows and their x-derivatives at one time.
class RowSampler {
 public:
  RowSampler(const KernelOperator& op, double t) : op_(op), t_(t) {}

  std::vector<double> kernel(std::size_t x) const { return op_.kernel_row(t_, x); }

  std::vector<double> kernel_at(std::array<int, 2> node) const {
    const long idx = op_.grid().interior_index(node);
    if (idx < 0) return std::vector<double>(op_.size(), 0.0);
    return op_.kernel_row(t_, static_cast<std::size_t>(idx));
  }

  // Centered difference in x along `axis` of G_t(x, .).
  std::vector<double> gradient(std::size_t x, int axis) const {
    auto node = op_.grid().interior_node(x);
    auto up = node;
    auto down = node;
    up[axis] += 1;
    down[axis] -= 1;
    auto r = kernel_at(up);
    const auto l = kernel_at(down);
    const double inv2h = 0.5 / op_.grid().spacing(axis);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = (r[i] - l[i]) * inv2h;
    return r;
  }

  std::vector<double> time_derivative(std::size_t x) const {
    return op_.kernel_time_derivative_row(t_, x);
  }

 private:
  const KernelOperator& op_;
  double t_;
};

std::vector<std::size_t> sample_rows(std::size_t n, std::size_t max_rows) {
  std::vector<std::size_t> rows;
  if (n <= 512 || n <= max_rows) {
    for (std::size_t i = 0; i < n; ++i) rows.push_back(i);
    return rows;
  }
  for (std::size_t k = 0; k < max_rows; ++k) rows.push_back((2 * k + 1) * n / (2 * max_rows));
  return rows;
}

double squared_distance(const Grid& g, std::size_t x, std::size_t y) {
  const Point a = g.interior_position(x);
  const Point b = g.interior_position(y);
  double s = 0.0;
  for (int i = 0; i < g.dim(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

std::vector<double> order_row(const RowSampler& s, int time_order, int space_order, std::size_t x,
                              int dim) {
  if (time_order == 1) return s.time_derivative(x);
  if (space_order == 0) return s.kernel(x);
  std::vector<double> out = s.gradient(x, 0);
  for (int a = 1; a < dim; ++a) {
    const auto g = s.gradient(x, a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(std::fabs(out[i]), std::fabs(g[i]));
  }
  return out;
}

GaussianBoundCheck check_gaussian_bound(const KernelOperator& op, std::span<const double> times,
                                        int time_order, int space_order, double C,
                                        const KernelEstimateOptions& opt) {
  const Grid& g = op.grid();
  const int d = g.dim();
  const std::size_t n = op.size();
  const double power = -(d + 2.0 * time_order + space_order) / 2.0;
  auto envelope = [&](double t, double r2) { return std::pow(t, power) * std::exp(-C * r2 / t); };

  GaussianBoundCheck check;
  check.time_order = time_order;
  check.space_order = space_order;
  check.C = C;

  // Calibration on a structured set: every y for a few evenly spaced x per time.
  const auto rows = sample_rows(n, std::min<std::size_t>(opt.max_rows, 16));
  const std::size_t stride = std::max<std::size_t>(1, rows.size() / 16);
  double K = 0.0;
  for (double t : times) {
    const RowSampler s(op, t);
    for (std::size_t ri = 0; ri < rows.size(); ri += stride) {
      const std::size_t x = rows[ri];
      const auto row = order_row(s, time_order, space_order, x, d);
      double peak = 0.0;
      for (double v : row) peak = std::max(peak, std::fabs(v));
      const double floor = 1e-12 * peak;
      for (std::size_t y = 0; y < n; ++y) {
        if (std::fabs(row[y]) <= floor) continue;
        K = std::max(K, std::fabs(row[y]) / envelope(t, squared_distance(g, x, y)));
      }
    }
  }
  check.K = K;

  // Validation on random (t, x, y) with t log-uniform over the sampled range.
  const auto [tmin_it, tmax_it] = std::minmax_element(times.begin(), times.end());
  const double lt0 = std::log(*tmin_it);
  const double lt1 = std::log(*tmax_it);
  std::mt19937_64 rng(opt.seed + 1000003ULL * (2 * time_order + space_order));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> node(0, n - 1);
  bool ok = std::isfinite(K) && K > 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < opt.gaussian_samples; ++i) {
    const double t = std::exp(lt0 + (lt1 - lt0) * unif(rng));
    const std::size_t x = node(rng);
    const std::size_t y = node(rng);
    const RowSampler s(op, t);
    const auto row = order_row(s, time_order, space_order, x, d);
    double peak = 0.0;
    for (double v : row) peak = std::max(peak, std::fabs(v));
    const double bound = K * envelope(t, squared_distance(g, x, y));
    const double value = std::fabs(row[y]);
    const double floor = 1e-12 * peak;
    if (value > floor) worst = std::max(worst, value / bound);
    if (value > bound + floor) ok = false;
  }
  check.samples = opt.gaussian_samples;
  check.worst_ratio = worst;
  check.pass = ok;
  return check;
}

}  // namespace

std::vector<double> default_time_samples(const Grid& grid, std::size_t count) {
  double hmax = 0.0;
  double lmin = std::numeric_limits<double>::infinity();
  for (int a = 0; a < grid.dim(); ++a) {
    hmax = std::max(hmax, grid.spacing(a));
    lmin = std::min(lmin, grid.hi(a) - grid.lo(a));
  }
  const double lo = 4.0 * hmax * hmax;
  const double hi = std::max(4.0 * lo, 0.01 * lmin * lmin);
  std::vector<double> t(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double s = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
    t[i] = std::exp(std::log(lo) + s * (std::log(hi) - std::log(lo)));
  }
  return t;
}

KernelEstimateReport fit_kernel_estimates(const KernelOperator& op, double p,
                                          std::span<const double> time_samples,
                                          const KernelEstimateOptions& options) {
  if (time_samples.empty()) throw DomainError("fit_kernel_estimates: no time samples");
  if (!(p >= 1.0)) throw DomainError("fit_kernel_estimates: p must be >= 1");
  for (double t : time_samples) {
    if (!(t > 0.0) || !std::isfinite(t)) {
      throw DomainError("fit_kernel_estimates: time samples must lie in (0, T]");
    }
  }
  const Grid& g = op.grid();
  const double vol = g.cell_volume();
  const auto rows = sample_rows(op.size(), options.max_rows);

  KernelEstimateReport rep;
  rep.p = p;
  rep.times.assign(time_samples.begin(), time_samples.end());
  for (double t : time_samples) {
    const RowSampler s(op, t);
    double nk = 0.0, ng = 0.0, nt = 0.0;
    for (std::size_t x : rows) {
      nk = std::max(nk, lp_norm_row(s.kernel(x), p, vol));
      for (int a = 0; a < g.dim(); ++a) ng = std::max(ng, lp_norm_row(s.gradient(x, a), p, vol));
      nt = std::max(nt, lp_norm_row(s.time_derivative(x), p, vol));
    }
    rep.kernel_norm.push_back(nk);
    rep.gradient_norm.push_back(ng);
    rep.time_derivative_norm.push_back(nt);
  }

  std::vector<double> lt, lk, lg, ld;
  for (std::size_t i = 0; i < rep.times.size(); ++i) {
    lt.push_back(std::log(rep.times[i]));
    lk.push_back(std::log(rep.kernel_norm[i]));
    lg.push_back(std::log(rep.gradient_norm[i]));
    ld.push_back(std::log(rep.time_derivative_norm[i]));
  }
  rep.kernel_slope = fit_line(lt, lk).slope;
  rep.gradient_slope = fit_line(lt, lg).slope;
  rep.time_derivative_slope = fit_line(lt, ld).slope;

  // |a|_p <= K t^{-1+lambda}, |b|_p <= K t^{-1-upsilon+lambda}, |c|_p <= K t^{-1-eps+lambda}
  rep.lambda_p = 1.0 + rep.kernel_slope;
  rep.upsilon_p = std::max(0.0, rep.lambda_p - 1.0 - rep.gradient_slope);
  rep.epsilon_p = std::max(0.0, rep.lambda_p - 1.0 - rep.time_derivative_slope);
  const std::array<double, 3> exponents{-1.0 + rep.lambda_p, -1.0 - rep.upsilon_p + rep.lambda_p,
                                        -1.0 - rep.epsilon_p + rep.lambda_p};
  const std::array<const std::vector<double>*, 3> families{&rep.kernel_norm, &rep.gradient_norm,
                                                           &rep.time_derivative_norm};
  std::array<bool, 3> tight{};
  rep.K_p = 0.0;
  for (std::size_t f = 0; f < 3; ++f) {
    double max_ratio = 0.0;
    double log_sum = 0.0;
    for (std::size_t i = 0; i < rep.times.size(); ++i) {
      const double ratio = (*families[f])[i] / std::pow(rep.times[i], exponents[f]);
      max_ratio = std::max(max_ratio, ratio);
      log_sum += std::log(ratio);
    }
    const double geo = std::exp(log_sum / static_cast<double>(rep.times.size()));
    tight[f] = std::isfinite(max_ratio) && max_ratio <= options.envelope_factor * geo;
    rep.K_p = std::max(rep.K_p, max_ratio);
  }
  const bool finite = std::isfinite(rep.K_p) && std::isfinite(rep.lambda_p) &&
                      std::isfinite(rep.upsilon_p) && std::isfinite(rep.epsilon_p);
  rep.pass_kernel_decay = finite && tight[0] && rep.lambda_p <= 1.0 + options.lambda_tolerance &&
                rep.lambda_p >= 0.0;
  rep.pass_gradient_decay = finite && tight[1];
  rep.pass_time_derivative_decay = finite && tight[2];

  rep.gaussian_C = options.gaussian_C > 0.0 ? options.gaussian_C : op.kappa() / 8.0;
  rep.pass_gaussian_bound = true;
  for (const auto& [n_t, n_x] : {std::pair{0, 0}, std::pair{0, 1}, std::pair{1, 0}}) {
    auto chk = check_gaussian_bound(op, time_samples, n_t, n_x, rep.gaussian_C, options);
    if (n_t == 0 && n_x == 0) rep.gaussian_K = chk.K;
    rep.pass_gaussian_bound = rep.pass_gaussian_bound && chk.pass;
    rep.gaussian.push_back(chk);
  }
  return rep;
}

nlohmann::json KernelEstimateReport::to_json() const {
  nlohmann::json j;
  j["p"] = p;
  j["times"] = times;
  j["kernel_norm"] = kernel_norm;
  j["gradient_norm"] = gradient_norm;
  j["time_derivative_norm"] = time_derivative_norm;
  j["slopes"] = {{"kernel", kernel_slope},
                 {"gradient", gradient_slope},
                 {"time_derivative", time_derivative_slope}};
  j["K_p"] = K_p;
  j["lambda_p"] = lambda_p;
  j["upsilon_p"] = upsilon_p;
  j["epsilon_p"] = epsilon_p;
  j["pass"] = {{"kernel_decay", pass_kernel_decay},
               {"gradient_decay", pass_gradient_decay},
               {"time_derivative_decay", pass_time_derivative_decay},
               {"gaussian_bound", pass_gaussian_bound}};
  j["gaussian_C"] = gaussian_C;
  j["gaussian_K"] = gaussian_K;
  auto& arr = j["gaussian_checks"] = nlohmann::json::array();
  for (const auto& c : gaussian) {
    arr.push_back({{"time_order", c.time_order},
                   {"space_order", c.space_order},
                   {"C", c.C},
                   {"K", c.K},
                   {"samples", c.samples},
                   {"worst_ratio", c.worst_ratio},
                   {"pass", c.pass}});
  }
  return j;
}

}  // namespace ldplab
