#include "ldplab/field.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <ostream>

#include "ldplab/error.hpp"
#include "ldplab/simd/kernels.hpp"

namespace ldplab {
namespace {

constexpr char kMagic[8] = {'L', 'D', 'P', 'F', 'I', 'E', 'L', 'D'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DomainError("snapshot: truncated file");
  return v;
}

}  // namespace

double lp_norm(std::span<const double> values, double p, double cell_volume) {
  if (std::isinf(p)) return simd::max_abs(values);
  if (p == 2.0) return std::sqrt(simd::dot(values, values) * cell_volume);
  double s = 0.0;
  for (double v : values) s += std::pow(std::fabs(v), p);
  return std::pow(s * cell_volume, 1.0 / p);
}

SpaceTimeField::SpaceTimeField(Grid grid, TimeGrid times, double rho)
    : grid_(std::move(grid)), times_(std::move(times)), rho_(rho) {
  if (!(rho >= 1.0)) throw DomainError("field: rho must be >= 1");
  values_.assign((times_.steps() + 1) * grid_.size(), 0.0);
}

double SpaceTimeField::norm(std::size_t m, double p) const {
  return lp_norm(at(m), p, grid_.cell_volume());
}

double SpaceTimeField::sup_norm(double p) const {
  double s = 0.0;
  for (std::size_t m = 0; m <= steps(); ++m) s = std::max(s, norm(m, p));
  return s;
}

double SpaceTimeField::sup_abs() const { return simd::max_abs(values_); }

double sup_distance(const SpaceTimeField& a, const SpaceTimeField& b, double p) {
  if (!(a.grid() == b.grid()) || !(a.times() == b.times())) {
    throw DomainError("sup_distance: fields live on different grids");
  }
  std::vector<double> diff(a.nodes());
  double s = 0.0;
  for (std::size_t m = 0; m <= a.steps(); ++m) {
    const auto x = a.at(m);
    const auto y = b.at(m);
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = x[i] - y[i];
    s = std::max(s, lp_norm(diff, p, a.grid().cell_volume()));
  }
  return s;
}

void write_field_csv(const SpaceTimeField& field, std::ostream& out) {
  const Grid& g = field.grid();
  out << (g.dim() == 1 ? "t,x,value\n" : "t,x,y,value\n");
  out.precision(17);
  for (std::size_t m = 0; m <= field.steps(); ++m) {
    const double t = field.times().times[m];
    const auto row = field.at(m);
    if (g.dim() == 1) {
      for (int i = 0; i <= g.cells(0); ++i) {
        const long idx = g.interior_index({i, 0});
        out << t << ',' << g.position({i, 0})[0] << ',' << (idx < 0 ? 0.0 : row[static_cast<std::size_t>(idx)])
            << '\n';
      }
      continue;
    }
    for (int i = 0; i <= g.cells(0); ++i) {
      for (int j = 0; j <= g.cells(1); ++j) {
        const long idx = g.interior_index({i, j});
        const Point x = g.position({i, j});
        out << t << ',' << x[0] << ',' << x[1] << ','
            << (idx < 0 ? 0.0 : row[static_cast<std::size_t>(idx)]) << '\n';
      }
    }
  }
}

void write_snapshot(const SpaceTimeField& field, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DomainError("snapshot: cannot open " + path.string());
  out.write(kMagic, sizeof kMagic);
  put(out, kVersion);
  const Grid& g = field.grid();
  put(out, static_cast<std::uint32_t>(g.dim()));
  for (int a = 0; a < g.dim(); ++a) {
    put(out, g.lo(a));
    put(out, g.hi(a));
    put(out, static_cast<std::int32_t>(g.cells(a)));
  }
  put(out, field.rho());
  put(out, static_cast<std::uint64_t>(field.times().times.size()));
  out.write(reinterpret_cast<const char*>(field.times().times.data()),
            static_cast<std::streamsize>(field.times().times.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(field.data().data()),
            static_cast<std::streamsize>(field.data().size() * sizeof(double)));
  if (!out) throw DomainError("snapshot: write failed for " + path.string());
}

SpaceTimeField read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("snapshot: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw DomainError("snapshot: bad magic");
  if (get<std::uint32_t>(in) != kVersion) throw DomainError("snapshot: unsupported version");
  const auto dim = get<std::uint32_t>(in);
  if (dim != 1 && dim != 2) throw DomainError("snapshot: bad dimension");
  std::vector<AxisSpec> axes;
  for (std::uint32_t a = 0; a < dim; ++a) {
    AxisSpec ax;
    ax.lo = get<double>(in);
    ax.hi = get<double>(in);
    ax.resolution = get<std::int32_t>(in);
    axes.push_back(ax);
  }
  const double rho = get<double>(in);
  const auto nt = get<std::uint64_t>(in);
  if (nt < 2 || nt > (std::uint64_t{1} << 32)) throw DomainError("snapshot: bad time count");
  std::vector<double> times(nt);
  in.read(reinterpret_cast<char*>(times.data()), static_cast<std::streamsize>(nt * sizeof(double)));
  SpaceTimeField f(build_grid(axes), make_time_grid(std::move(times)), rho);
  in.read(reinterpret_cast<char*>(f.data().data()), static_cast<std::streamsize>(f.data().size() * sizeof(double)));
  if (!in) throw DomainError("snapshot: truncated values");
  return f;
}

}  // namespace ldplab
