#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace ldplab {

// Position in the domain; unused trailing coordinates are zero.
using Point = std::array<double, 2>;

struct AxisSpec {
  double lo = 0.0;
  double hi = 1.0;
  int resolution = 64;  // number of cells; the axis has resolution - 1 interior nodes
};

// Uniform box grid with homogeneous Dirichlet boundary. Only interior nodes
// carry unknowns; they are indexed row-major with axis 0 slowest.
class Grid {
 public:
  Grid() = default;

  int dim() const noexcept { return dim_; }
  double lo(int axis) const noexcept { return lo_[axis]; }
  double hi(int axis) const noexcept { return hi_[axis]; }
  int cells(int axis) const noexcept { return cells_[axis]; }
  int interior_per_axis(int axis) const noexcept { return cells_[axis] - 1; }
  double spacing(int axis) const noexcept { return h_[axis]; }
  double min_spacing() const noexcept;
  // h_1 * ... * h_d, the quadrature weight of one node.
  double cell_volume() const noexcept;
  std::size_t size() const noexcept { return size_; }

  // Node with per-axis node numbers (0 and cells are boundary nodes).
  Point position(std::array<int, 2> node) const noexcept;
  Point interior_position(std::size_t index) const noexcept;
  std::array<int, 2> interior_node(std::size_t index) const noexcept;
  // Interior index of a node, or -1 for boundary nodes.
  long interior_index(std::array<int, 2> node) const noexcept;
  // Interior index of the node closest to x.
  std::size_t nearest_interior(const Point& x) const;

  std::vector<Point> interior_positions() const;

  bool operator==(const Grid&) const = default;

 private:
  friend Grid build_grid(std::span<const AxisSpec> axes);

  int dim_ = 0;
  std::array<double, 2> lo_{};
  std::array<double, 2> hi_{};
  std::array<int, 2> cells_{1, 1};
  std::array<double, 2> h_{};
  std::size_t size_ = 0;
};

// Throws InvalidGrid for d outside {1,2}, degenerate extents or resolution < 2.
Grid build_grid(std::span<const AxisSpec> axes);
Grid build_grid_1d(double lo, double hi, int resolution);
Grid build_grid_2d(double lo, double hi, int resolution);

}  // namespace ldplab
