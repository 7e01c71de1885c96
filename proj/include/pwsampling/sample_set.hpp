#pragma once

// Sampling lattices Gamma_j = delta_{2^j} Gamma_0 realized on grid indices.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pwsampling/errors.hpp"
#include "pwsampling/grid.hpp"

namespace pws {

struct SampleSet {
  int level = 0;
  Eigen::Index dimension = 0;      // size of the ambient vector space
  std::vector<Eigen::Index> indices;  // sorted, distinct
  long long t_stride = 1;          // in grid steps (Heisenberg); 1 otherwise
  long long spatial_stride = 1;    // in grid steps, or circle stride
  Eigen::Index anchor = 0;

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }

  bool contains(Eigen::Index i) const { return std::binary_search(indices.begin(), indices.end(), i); }

  /// Complement of the sample set in {0, ..., dimension-1}.
  std::vector<Eigen::Index> free_indices() const {
    std::vector<Eigen::Index> out;
    out.reserve(static_cast<std::size_t>(dimension) - indices.size());
    std::size_t p = 0;
    for (Eigen::Index i = 0; i < dimension; ++i) {
      if (p < indices.size() && indices[p] == i) {
        ++p;
        continue;
      }
      out.push_back(i);
    }
    return out;
  }

  Eigen::VectorXd restrict(const Eigen::VectorXd& f) const {
    if (f.size() != dimension) throw DimensionError("SampleSet::restrict: size mismatch");
    Eigen::VectorXd out(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t g = 0; g < indices.size(); ++g) out[static_cast<Eigen::Index>(g)] = f[indices[g]];
    return out;
  }

  bool is_full() const { return static_cast<Eigen::Index>(indices.size()) == dimension; }
};

namespace detail {

inline long long lattice_stride(int j, long long base_stride) {
  if (base_stride < 1) throw DomainError("lattice stride: base stride must be >= 1");
  const double s = std::ldexp(static_cast<double>(base_stride), j);
  const double r = std::round(s);
  if (std::abs(s - r) > 1e-12 * std::max(1.0, s) || r < 1.0) {
    throw DomainError("lattice stride 2^" + std::to_string(j) + " * " + std::to_string(base_stride) +
                      " is not a whole number of grid steps");
  }
  return static_cast<long long>(r);
}

inline long long positive_mod(long long a, long long m) {
  const long long r = a % m;
  return r < 0 ? r + m : r;
}

}  // namespace detail

/// Nodes whose spatial indices agree with the anchor modulo 2^j s0 and whose
/// t index agrees modulo (2^j s0)^2.
inline SampleSet lattice_sample_set(const Grid& grid, int j, Eigen::Index anchor, long long base_stride = 1) {
  const long long s = detail::lattice_stride(j, base_stride);
  const long long st = s * s;
  if (anchor < 0 || static_cast<std::size_t>(anchor) >= grid.node_count()) {
    throw DimensionError("lattice_sample_set: anchor out of range");
  }
  const auto am = grid.multi_index(static_cast<std::size_t>(anchor));
  SampleSet out;
  out.level = j;
  out.dimension = static_cast<Eigen::Index>(grid.node_count());
  out.t_stride = st;
  out.spatial_stride = s;
  out.anchor = anchor;
  for (std::size_t node = 0; node < grid.node_count(); ++node) {
    const auto mi = grid.multi_index(node);
    bool keep = detail::positive_mod(mi[0] - am[0], st) == 0;
    for (int a = 1; keep && a < grid.axis_count(); ++a) keep = detail::positive_mod(mi[a] - am[a], s) == 0;
    if (keep) out.indices.push_back(static_cast<Eigen::Index>(node));
  }
  return out;
}

/// Uniform stride 2^j s0 on a ring of n nodes.
inline SampleSet circle_sample_set(Eigen::Index n, int j, Eigen::Index anchor, long long base_stride = 1) {
  const long long s = detail::lattice_stride(j, base_stride);
  if (anchor < 0 || anchor >= n) throw DimensionError("circle_sample_set: anchor out of range");
  SampleSet out;
  out.level = j;
  out.dimension = n;
  out.spatial_stride = s;
  out.t_stride = 1;
  out.anchor = anchor;
  for (Eigen::Index i = 0; i < n; ++i)
    if (detail::positive_mod(i - anchor, s) == 0) out.indices.push_back(i);
  return out;
}

/// Caller-supplied index list (graph backend). Indices are sorted; duplicates
/// and out-of-range entries are rejected.
inline SampleSet explicit_sample_set(Eigen::Index dimension, std::vector<Eigen::Index> indices, int level = 0) {
  std::sort(indices.begin(), indices.end());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= dimension) throw DimensionError("explicit_sample_set: index out of range");
    if (i > 0 && indices[i] == indices[i - 1]) throw DomainError("explicit_sample_set: duplicate index");
  }
  SampleSet out;
  out.level = level;
  out.dimension = dimension;
  out.indices = std::move(indices);
  out.anchor = out.indices.empty() ? 0 : out.indices.front();
  return out;
}

}  // namespace pws
