#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace ldplab {

// Solver times 0 = t_0 < ... < t_M = T.
struct TimeGrid {
  std::vector<double> times;

  std::size_t steps() const noexcept { return times.empty() ? 0 : times.size() - 1; }
  double horizon() const noexcept { return times.empty() ? 0.0 : times.back(); }
  double dt(std::size_t m) const noexcept { return times[m + 1] - times[m]; }
  bool operator==(const TimeGrid&) const = default;
};

// Throws DomainError unless T > 0 and M >= 1.
TimeGrid uniform_time_grid(double T, std::size_t M);
// Throws DomainError unless the times start at 0 and strictly increase.
TimeGrid make_time_grid(std::vector<double> times);

// k-dimensional Brownian increments on a time grid, row-major M x k.
struct NoisePath {
  TimeGrid grid;
  int k = 1;
  std::vector<double> increments;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  double increment(std::size_t m, int j) const noexcept {
    return increments[m * static_cast<std::size_t>(k) + static_cast<std::size_t>(j)];
  }
  // B(t_m) for m = 0..M, row-major (M+1) x k.
  std::vector<double> values() const;
};

// Independent N(0, dt) increments from the counter-based stream (seed, stream).
// Throws DomainError for k < 1 or a non-monotone grid.
NoisePath sample_brownian(int k, const TimeGrid& grid, std::uint64_t seed, std::uint64_t stream = 0);
// Same increments written into `out` (size M x k) without allocating.
void fill_brownian(int k, const TimeGrid& grid, std::uint64_t seed, std::uint64_t stream,
                   std::span<double> out);

// Piecewise-constant R^k valued control: value row m holds on [t_m, t_{m+1}).
struct Control {
  TimeGrid grid;
  int k = 1;
  std::vector<double> values;  // row-major M x k
  std::optional<double> bound;  // L^2 budget N

  static Control zero(const TimeGrid& grid, int k);
  static Control constant(const TimeGrid& grid, std::span<const double> value);

  double at(std::size_t m, int j) const noexcept {
    return values[m * static_cast<std::size_t>(k) + static_cast<std::size_t>(j)];
  }
  bool is_zero() const noexcept;
  // Same function on a grid with each step split into `factor` equal parts.
  Control refine(std::size_t factor) const;
  Control scaled(double a) const;
  // True when no bound is set or the L^2 norm is within it.
  bool within_bound() const;
};

// int_0^T |phi(s)|^2 ds, exact for piecewise-constant controls.
double control_l2_norm(const Control& c);

// -(1/sqrt eps) sum_m <phi_m, dB_m> - (1/2eps) int |phi|^2, left-point evaluation.
// Throws DomainError on grid or dimension mismatch or eps <= 0.
double girsanov_log_weight(const Control& c, const NoisePath& path, double eps);

// Increments of B + eps^{-1/2} int phi ds. Throws DomainError on mismatch or eps <= 0.
NoisePath shift_path(const NoisePath& path, const Control& c, double eps);

// CSV with header t,phi1..phik and one row per grid time; the last row repeats
// the final value at t = T.
void write_control_csv(const Control& c, std::ostream& out);
// Throws DomainError for malformed input.
Control read_control_csv(std::istream& in);

}  // namespace ldplab
