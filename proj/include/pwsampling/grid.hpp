#pragma once

// Uniform anisotropic grid on a box in H_m with coordinates
// (t, x_1, ..., x_m, y_1, ..., y_m). Spatial spacing is h, the t spacing is
// h^2 so that the grid is compatible with the dilations delta_s.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pwsampling/errors.hpp"

namespace pws {

inline constexpr long long kDefaultNodeCap = 100000;

class Grid {
 public:
  Grid() = default;

  /// Box is centered at the origin: t in [-t_extent/2, t_extent/2], each
  /// spatial axis in [-xy_extent/2, xy_extent/2]. Both extents must be whole
  /// multiples of their spacing.
  Grid(int m, double t_extent, double xy_extent, double h, long long node_cap = kDefaultNodeCap)
      : m_(m), t_extent_(t_extent), xy_extent_(xy_extent), h_(h) {
    if (m < 1) throw DomainError("build_grid: m must be >= 1");
    if (!(t_extent > 0.0) || !(xy_extent > 0.0) || !(h > 0.0)) {
      throw DomainError("build_grid: extents and h must be positive");
    }
    ht_ = h * h;
    n_t_ = steps_for(t_extent, ht_, "t");
    n_s_ = steps_for(xy_extent, h, "spatial");
    long double count = static_cast<long double>(n_t_);
    for (int a = 0; a < 2 * m; ++a) count *= static_cast<long double>(n_s_);
    if (count > static_cast<long double>(node_cap)) {
      throw ResourceError("build_grid: node count exceeds cap",
                          count > 9e18L ? static_cast<long long>(9e18) : static_cast<long long>(count), node_cap);
    }
    node_count_ = static_cast<std::size_t>(count);
  }

  int m() const { return m_; }
  int axis_count() const { return 1 + 2 * m_; }
  double t_extent() const { return t_extent_; }
  double xy_extent() const { return xy_extent_; }
  double h() const { return h_; }
  double ht() const { return ht_; }
  int t_steps() const { return n_t_; }
  int spatial_steps() const { return n_s_; }
  std::size_t node_count() const { return node_count_; }

  /// Number of points along axis a (0 = t, 1..m = x, m+1..2m = y).
  int axis_size(int a) const { return a == 0 ? n_t_ : n_s_; }
  double axis_spacing(int a) const { return a == 0 ? ht_ : h_; }
  double axis_origin(int a) const { return a == 0 ? -0.5 * t_extent_ : -0.5 * xy_extent_; }

  /// Multi-index (i_t, i_x1.., i_y1..) to node index; t varies slowest.
  std::size_t index(const std::vector<int>& mi) const {
    if (static_cast<int>(mi.size()) != axis_count()) throw DimensionError("Grid::index: wrong multi-index length");
    std::size_t idx = 0;
    for (int a = 0; a < axis_count(); ++a) {
      if (mi[a] < 0 || mi[a] >= axis_size(a)) throw DimensionError("Grid::index: multi-index out of range");
      idx = idx * static_cast<std::size_t>(axis_size(a)) + static_cast<std::size_t>(mi[a]);
    }
    return idx;
  }

  std::vector<int> multi_index(std::size_t node) const {
    if (node >= node_count_) throw DimensionError("Grid::multi_index: node out of range");
    std::vector<int> mi(axis_count());
    for (int a = axis_count() - 1; a >= 0; --a) {
      mi[a] = static_cast<int>(node % static_cast<std::size_t>(axis_size(a)));
      node /= static_cast<std::size_t>(axis_size(a));
    }
    return mi;
  }

  double coordinate(int axis, int i) const { return axis_origin(axis) + i * axis_spacing(axis); }

  /// Coordinates (t, x_1.., y_1..) of a node.
  std::vector<double> coordinates(std::size_t node) const {
    auto mi = multi_index(node);
    std::vector<double> c(mi.size());
    for (int a = 0; a < axis_count(); ++a) c[a] = coordinate(a, mi[a]);
    return c;
  }

  /// Stride of axis a in the flat index.
  std::size_t axis_stride(int a) const {
    std::size_t s = 1;
    for (int b = axis_count() - 1; b > a; --b) s *= static_cast<std::size_t>(axis_size(b));
    return s;
  }

 private:
  static int steps_for(double extent, double spacing, const char* what) {
    const double ratio = extent / spacing;
    const double r = std::round(ratio);
    if (std::abs(ratio - r) > 1e-9 * std::max(1.0, ratio) || r < 1.0) {
      throw DomainError(std::string("build_grid: ") + what + " extent is not a whole number of steps (" +
                        std::to_string(ratio) + ")");
    }
    return static_cast<int>(r) + 1;
  }

  int m_ = 1;
  double t_extent_ = 0.0, xy_extent_ = 0.0, h_ = 0.0, ht_ = 0.0;
  int n_t_ = 0, n_s_ = 0;
  std::size_t node_count_ = 0;
};

inline Grid build_grid(int m, double t_extent, double xy_extent, double h, long long node_cap = kDefaultNodeCap) {
  return Grid(m, t_extent, xy_extent, h, node_cap);
}

}  // namespace pws
