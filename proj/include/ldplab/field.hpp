#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "ldplab/grid.hpp"
#include "ldplab/stochastics.hpp"

namespace ldplab {

// (|v|^p summed with weight h^d)^{1/p}; p = infinity gives the sup norm.
double lp_norm(std::span<const double> values, double p, double cell_volume);

// Values on the interior nodes at every solver time, row-major (M+1) x N.
// The Dirichlet trace is implicit: boundary nodes are zero and not stored.
class SpaceTimeField {
 public:
  SpaceTimeField() = default;
  SpaceTimeField(Grid grid, TimeGrid times, double rho);

  const Grid& grid() const noexcept { return grid_; }
  const TimeGrid& times() const noexcept { return times_; }
  double rho() const noexcept { return rho_; }
  std::size_t nodes() const noexcept { return grid_.size(); }
  std::size_t steps() const noexcept { return times_.steps(); }

  std::span<double> at(std::size_t m) noexcept { return {values_.data() + m * nodes(), nodes()}; }
  std::span<const double> at(std::size_t m) const noexcept {
    return {values_.data() + m * nodes(), nodes()};
  }
  std::span<const double> terminal() const noexcept { return at(steps()); }
  std::vector<double>& data() noexcept { return values_; }
  const std::vector<double>& data() const noexcept { return values_; }

  double norm(std::size_t m, double p) const;
  double rho_norm(std::size_t m) const { return norm(m, rho_); }
  // max over grid times of |field(t)|_p
  double sup_norm(double p) const;
  double sup_rho_norm() const { return sup_norm(rho_); }
  double sup_abs() const;

 private:
  Grid grid_;
  TimeGrid times_;
  double rho_ = 2.0;
  std::vector<double> values_;
};

// max over grid times of |a(t) - b(t)|_p. Throws DomainError when the grids differ.
double sup_distance(const SpaceTimeField& a, const SpaceTimeField& b, double p);

// Rows t,x[,y],value over all nodes including the zero boundary.
void write_field_csv(const SpaceTimeField& field, std::ostream& out);

// Binary snapshot holding grid, times, rho and values. Throws DomainError on a bad file.
void write_snapshot(const SpaceTimeField& field, const std::filesystem::path& path);
SpaceTimeField read_snapshot(const std::filesystem::path& path);

}  // namespace ldplab
