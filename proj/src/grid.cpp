#include "ldplab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ldplab/error.hpp"

namespace ldplab {

double Grid::min_spacing() const noexcept {
  double h = h_[0];
  for (int a = 1; a < dim_; ++a) h = std::min(h, h_[a]);
  return h;
}

double Grid::cell_volume() const noexcept {
  double v = 1.0;
  for (int a = 0; a < dim_; ++a) v *= h_[a];
  return v;
}

Point Grid::position(std::array<int, 2> node) const noexcept {
  Point x{};
  for (int a = 0; a < dim_; ++a) x[a] = lo_[a] + node[a] * h_[a];
  return x;
}

std::array<int, 2> Grid::interior_node(std::size_t index) const noexcept {
  if (dim_ == 1) return {static_cast<int>(index) + 1, 0};
  const auto n1 = static_cast<std::size_t>(cells_[1] - 1);
  return {static_cast<int>(index / n1) + 1, static_cast<int>(index % n1) + 1};
}

Point Grid::interior_position(std::size_t index) const noexcept {
  return position(interior_node(index));
}

long Grid::interior_index(std::array<int, 2> node) const noexcept {
  for (int a = 0; a < dim_; ++a) {
    if (node[a] <= 0 || node[a] >= cells_[a]) return -1;
  }
  if (dim_ == 1) return node[0] - 1;
  return static_cast<long>(node[0] - 1) * (cells_[1] - 1) + (node[1] - 1);
}

std::size_t Grid::nearest_interior(const Point& x) const {
  std::array<int, 2> node{1, 0};
  for (int a = 0; a < dim_; ++a) {
    const int k = static_cast<int>(std::lround((x[a] - lo_[a]) / h_[a]));
    node[a] = std::clamp(k, 1, cells_[a] - 1);
  }
  return static_cast<std::size_t>(interior_index(node));
}

std::vector<Point> Grid::interior_positions() const {
  std::vector<Point> out(size_);
  for (std::size_t i = 0; i < size_; ++i) out[i] = interior_position(i);
  return out;
}

Grid build_grid(std::span<const AxisSpec> axes) {
  if (axes.size() != 1 && axes.size() != 2) {
    throw InvalidGrid("grid dimension must be 1 or 2, got " + std::to_string(axes.size()));
  }
  Grid g;
  g.dim_ = static_cast<int>(axes.size());
  g.size_ = 1;
  for (int a = 0; a < g.dim_; ++a) {
    const auto& ax = axes[a];
    if (!(std::isfinite(ax.lo) && std::isfinite(ax.hi)) || !(ax.hi > ax.lo)) {
      throw InvalidGrid("axis " + std::to_string(a) + " has degenerate extents");
    }
    if (ax.resolution < 2) {
      throw InvalidGrid("axis " + std::to_string(a) + " resolution must be >= 2, got " +
                        std::to_string(ax.resolution));
    }
    g.lo_[a] = ax.lo;
    g.hi_[a] = ax.hi;
    g.cells_[a] = ax.resolution;
    g.h_[a] = (ax.hi - ax.lo) / ax.resolution;
    g.size_ *= static_cast<std::size_t>(ax.resolution - 1);
  }
  return g;
}

Grid build_grid_1d(double lo, double hi, int resolution) {
  const AxisSpec ax{lo, hi, resolution};
  return build_grid(std::span<const AxisSpec>(&ax, 1));
}

Grid build_grid_2d(double lo, double hi, int resolution) {
  const std::array<AxisSpec, 2> ax{AxisSpec{lo, hi, resolution}, AxisSpec{lo, hi, resolution}};
  return build_grid(ax);
}

}  // namespace ldplab
