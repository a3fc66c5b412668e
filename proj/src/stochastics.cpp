#include "ldplab/stochastics.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "ldplab/error.hpp"
#include "ldplab/rng.hpp"

namespace ldplab {
namespace {

void require_same_grid(const TimeGrid& a, const TimeGrid& b, const char* what) {
  if (!(a == b)) throw DomainError(std::string(what) + ": control and path use different time grids");
}

}  // namespace

TimeGrid uniform_time_grid(double T, std::size_t M) {
  if (!(T > 0.0) || !std::isfinite(T)) throw DomainError("time grid: T must be positive");
  if (M < 1) throw DomainError("time grid: need at least one step");
  TimeGrid g;
  g.times.resize(M + 1);
  for (std::size_t m = 0; m <= M; ++m) g.times[m] = T * static_cast<double>(m) / static_cast<double>(M);
  g.times[M] = T;
  return g;
}

TimeGrid make_time_grid(std::vector<double> times) {
  if (times.size() < 2 || times.front() != 0.0) {
    throw DomainError("time grid: needs at least two times starting at 0");
  }
  for (std::size_t m = 1; m < times.size(); ++m) {
    if (!(times[m] > times[m - 1]) || !std::isfinite(times[m])) {
      throw DomainError("time grid: times must strictly increase");
    }
  }
  return TimeGrid{std::move(times)};
}

std::vector<double> NoisePath::values() const {
  const std::size_t kk = static_cast<std::size_t>(k);
  const std::size_t M = grid.steps();
  std::vector<double> b((M + 1) * kk, 0.0);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t j = 0; j < kk; ++j) b[(m + 1) * kk + j] = b[m * kk + j] + increments[m * kk + j];
  }
  return b;
}

void fill_brownian(int k, const TimeGrid& grid, std::uint64_t seed, std::uint64_t stream,
                   std::span<double> out) {
  if (k < 1) throw DomainError("sample_brownian: k must be >= 1");
  const std::size_t M = grid.steps();
  if (M < 1) throw DomainError("sample_brownian: empty time grid");
  for (std::size_t m = 0; m < M; ++m) {
    if (!(grid.times[m + 1] > grid.times[m])) throw DomainError("sample_brownian: non-monotone time grid");
  }
  const std::size_t kk = static_cast<std::size_t>(k);
  if (out.size() != M * kk) throw DomainError("sample_brownian: output size mismatch");
  NormalStream rng(seed, stream);
  for (std::size_t m = 0; m < M; ++m) {
    const double s = std::sqrt(grid.dt(m));
    for (std::size_t j = 0; j < kk; ++j) out[m * kk + j] = s * rng.normal();
  }
}

NoisePath sample_brownian(int k, const TimeGrid& grid, std::uint64_t seed, std::uint64_t stream) {
  if (k < 1) throw DomainError("sample_brownian: k must be >= 1");
  NoisePath p;
  p.grid = grid;
  p.k = k;
  p.seed = seed;
  p.stream = stream;
  p.increments.resize(grid.steps() * static_cast<std::size_t>(k));
  fill_brownian(k, grid, seed, stream, p.increments);
  return p;
}

Control Control::zero(const TimeGrid& grid, int k) {
  if (k < 1) throw DomainError("control: k must be >= 1");
  Control c;
  c.grid = grid;
  c.k = k;
  c.values.assign(grid.steps() * static_cast<std::size_t>(k), 0.0);
  return c;
}

Control Control::constant(const TimeGrid& grid, std::span<const double> value) {
  Control c = zero(grid, static_cast<int>(value.size()));
  for (std::size_t m = 0; m < grid.steps(); ++m) {
    for (std::size_t j = 0; j < value.size(); ++j) c.values[m * value.size() + j] = value[j];
  }
  return c;
}

bool Control::is_zero() const noexcept {
  for (double v : values) {
    if (v != 0.0) return false;
  }
  return true;
}

Control Control::refine(std::size_t factor) const {
  if (factor < 1) throw DomainError("control refine: factor must be >= 1");
  Control out;
  out.k = k;
  out.bound = bound;
  const std::size_t M = grid.steps();
  const std::size_t kk = static_cast<std::size_t>(k);
  out.grid.times.reserve(M * factor + 1);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t s = 0; s < factor; ++s) {
      out.grid.times.push_back(grid.times[m] + grid.dt(m) * static_cast<double>(s) / static_cast<double>(factor));
      for (std::size_t j = 0; j < kk; ++j) out.values.push_back(values[m * kk + j]);
    }
  }
  out.grid.times.push_back(grid.horizon());
  return out;
}

Control Control::scaled(double a) const {
  Control out = *this;
  for (double& v : out.values) v *= a;
  return out;
}

bool Control::within_bound() const { return !bound || control_l2_norm(*this) <= *bound; }

double control_l2_norm(const Control& c) {
  const std::size_t kk = static_cast<std::size_t>(c.k);
  double s = 0.0;
  for (std::size_t m = 0; m < c.grid.steps(); ++m) {
    double row = 0.0;
    for (std::size_t j = 0; j < kk; ++j) row += c.values[m * kk + j] * c.values[m * kk + j];
    s += row * c.grid.dt(m);
  }
  return s;
}

double girsanov_log_weight(const Control& c, const NoisePath& path, double eps) {
  require_same_grid(c.grid, path.grid, "girsanov_log_weight");
  if (c.k != path.k) throw DomainError("girsanov_log_weight: control and path dimensions differ");
  if (!(eps > 0.0)) throw DomainError("girsanov_log_weight: eps must be positive");
  double stoch = 0.0;
  for (std::size_t i = 0; i < c.values.size(); ++i) stoch += c.values[i] * path.increments[i];
  return -stoch / std::sqrt(eps) - control_l2_norm(c) / (2.0 * eps);
}

NoisePath shift_path(const NoisePath& path, const Control& c, double eps) {
  require_same_grid(c.grid, path.grid, "shift_path");
  if (c.k != path.k) throw DomainError("shift_path: control and path dimensions differ");
  if (!(eps > 0.0)) throw DomainError("shift_path: eps must be positive");
  NoisePath out = path;
  const std::size_t kk = static_cast<std::size_t>(c.k);
  const double inv = 1.0 / std::sqrt(eps);
  for (std::size_t m = 0; m < path.grid.steps(); ++m) {
    for (std::size_t j = 0; j < kk; ++j) out.increments[m * kk + j] += inv * c.values[m * kk + j] * path.grid.dt(m);
  }
  return out;
}

void write_control_csv(const Control& c, std::ostream& out) {
  const std::size_t kk = static_cast<std::size_t>(c.k);
  out << "t";
  for (std::size_t j = 0; j < kk; ++j) out << ",phi" << j + 1;
  out << '\n';
  out.precision(17);
  const std::size_t M = c.grid.steps();
  for (std::size_t m = 0; m <= M; ++m) {
    out << c.grid.times[m];
    const std::size_t row = m < M ? m : M - 1;
    for (std::size_t j = 0; j < kk; ++j) out << ',' << c.values[row * kk + j];
    out << '\n';
  }
}

Control read_control_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DomainError("control csv: empty input");
  int k = 0;
  for (char ch : line) k += ch == ',';
  if (k < 1 || line.rfind("t,", 0) != 0) throw DomainError("control csv: header must be t,phi1..phik");
  std::vector<double> times;
  std::vector<double> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw DomainError("control csv: bad number '" + cell + "'");
      }
    }
    if (vals.size() != static_cast<std::size_t>(k) + 1) throw DomainError("control csv: ragged row");
    times.push_back(vals[0]);
    rows.insert(rows.end(), vals.begin() + 1, vals.end());
  }
  Control c;
  c.grid = make_time_grid(times);
  c.k = k;
  rows.resize(c.grid.steps() * static_cast<std::size_t>(k));
  c.values = std::move(rows);
  return c;
}

}  // namespace ldplab
