#pragma once

// Sparse symmetric positive-semidefinite operators: the Heisenberg
// sub-Laplacian on a Dirichlet grid, the periodic 1-D Laplacian and weighted
// graph Laplacians.

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "pwsampling/errors.hpp"
#include "pwsampling/grid.hpp"

namespace pws {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, std::int64_t>;
using RowSparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, std::int64_t>;

enum class Backend { heisenberg, circle, graph, generic };

inline const char* backend_name(Backend b) {
  switch (b) {
    case Backend::heisenberg: return "heisenberg";
    case Backend::circle: return "circle";
    case Backend::graph: return "graph";
    case Backend::generic: return "generic";
  }
  return "generic";
}

inline Backend parse_backend(const std::string& s) {
  if (s == "heisenberg") return Backend::heisenberg;
  if (s == "circle") return Backend::circle;
  if (s == "graph") return Backend::graph;
  if (s == "generic") return Backend::generic;
  throw ParseError("unknown backend '" + s + "'");
}

/// 64-bit FNV-1a, used for operator fingerprints and config hashes.
class Fnv1a {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= c[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  template <typename T>
  void value(const T& v) {
    bytes(&v, sizeof(T));
  }
  void string(const std::string& s) { bytes(s.data(), s.size()); }
  std::uint64_t digest() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

class SymmetricOperator {
 public:
  SymmetricOperator() = default;

  /// Takes a full (both triangles stored) sparse matrix. Symmetry is checked
  /// bit-exactly; the flag records the outcome rather than throwing, so that
  /// validation code can report which check failed.
  SymmetricOperator(SparseMatrix matrix, Backend backend) : matrix_(std::move(matrix)), backend_(backend) {
    matrix_.makeCompressed();
    if (matrix_.rows() != matrix_.cols()) throw DimensionError("SymmetricOperator: matrix is not square");
    symmetric_ = check_symmetry();
  }

  Eigen::Index dimension() const { return matrix_.rows(); }
  const SparseMatrix& matrix() const { return matrix_; }
  Backend backend() const { return backend_; }
  bool is_symmetric() const { return symmetric_; }

  double entry(Eigen::Index i, Eigen::Index j) const { return matrix_.coeff(i, j); }

  Eigen::VectorXd apply(const Eigen::VectorXd& f) const {
    if (f.size() != dimension()) throw DimensionError("SymmetricOperator::apply: size mismatch");
    return matrix_ * f;
  }

  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(matrix_); }

  /// Max absolute row sum; an upper bound for the spectral radius.
  double gershgorin_bound() const {
    Eigen::VectorXd rows = Eigen::VectorXd::Zero(dimension());
    for (Eigen::Index c = 0; c < matrix_.outerSize(); ++c)
      for (SparseMatrix::InnerIterator it(matrix_, c); it; ++it) rows[it.row()] += std::abs(it.value());
    return rows.size() ? rows.maxCoeff() : 0.0;
  }

  /// Largest |a_ij - a_ji| over stored entries.
  double symmetry_defect() const {
    SparseMatrix t = matrix_.transpose();
    SparseMatrix d = matrix_ - t;
    double m = 0.0;
    for (Eigen::Index c = 0; c < d.outerSize(); ++c)
      for (SparseMatrix::InnerIterator it(d, c); it; ++it) m = std::max(m, std::abs(it.value()));
    return m;
  }

  /// Stored nonzero count of the full matrix.
  Eigen::Index nonzeros() const { return matrix_.nonZeros(); }

  /// Hash of dimension, backend and every stored (i, j, value) in column order.
  std::uint64_t fingerprint() const {
    Fnv1a h;
    const std::int64_t n = dimension();
    h.value(n);
    h.string(backend_name(backend_));
    for (Eigen::Index c = 0; c < matrix_.outerSize(); ++c) {
      for (SparseMatrix::InnerIterator it(matrix_, c); it; ++it) {
        const std::int64_t r = it.row(), cc = it.col();
        double v = it.value();
        if (v == 0.0) v = 0.0;  // fold -0.0
        h.value(r);
        h.value(cc);
        h.value(v);
      }
    }
    return h.digest();
  }

 private:
  bool check_symmetry() const {
    for (Eigen::Index c = 0; c < matrix_.outerSize(); ++c) {
      for (SparseMatrix::InnerIterator it(matrix_, c); it; ++it) {
        if (matrix_.coeff(it.col(), it.row()) != it.value()) return false;
      }
    }
    return true;
  }

  SparseMatrix matrix_;
  Backend backend_ = Backend::generic;
  bool symmetric_ = true;
};

namespace detail {

struct Triplet {
  std::int64_t row, col;
  double value;
};

// Sums duplicate upper-triangle entries in insertion order and mirrors them,
// so a_ij and a_ji are produced by the same floating-point operations.
inline SparseMatrix assemble_symmetric(Eigen::Index n, std::vector<Triplet> upper) {
  std::stable_sort(upper.begin(), upper.end(), [](const Triplet& a, const Triplet& b) {
    return std::tie(a.col, a.row) < std::tie(b.col, b.row);
  });
  std::vector<Eigen::Triplet<double, std::int64_t>> full;
  full.reserve(2 * upper.size());
  for (std::size_t i = 0; i < upper.size();) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < upper.size() && upper[j].row == upper[i].row && upper[j].col == upper[i].col) sum += upper[j++].value;
    if (sum != 0.0) {
      full.emplace_back(upper[i].row, upper[i].col, sum);
      if (upper[i].row != upper[i].col) full.emplace_back(upper[i].col, upper[i].row, sum);
    }
    i = j;
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(full.begin(), full.end());
  m.makeCompressed();
  return m;
}

}  // namespace detail

/// Central-difference discretizations of the left-invariant horizontal fields
///   X_k = d/dx_k + 2 y_k d/dt,  X_{m+k} = d/dy_k - 2 x_k d/dt,
/// with values outside the box taken as zero. Returns 2m row-major matrices.
inline std::vector<RowSparseMatrix> build_vector_fields(const Grid& grid) {
  const int m = grid.m();
  const auto n = static_cast<std::int64_t>(grid.node_count());
  std::vector<RowSparseMatrix> fields;
  fields.reserve(2 * m);
  const double inv2h = 1.0 / (2.0 * grid.h());
  const double inv2ht = 1.0 / (2.0 * grid.ht());
  const std::int64_t t_stride = static_cast<std::int64_t>(grid.axis_stride(0));

  for (int k = 0; k < 2 * m; ++k) {
    const int axis = 1 + k;  // x_1..x_m are axes 1..m, y_1..y_m are m+1..2m
    // drift: 2 y_k for x-type fields, -2 x_k for y-type fields
    const int drift_axis = k < m ? axis + m : axis - m;
    const double drift_sign = k < m ? 2.0 : -2.0;
    const std::int64_t stride = static_cast<std::int64_t>(grid.axis_stride(axis));

    std::vector<Eigen::Triplet<double, std::int64_t>> trip;
    trip.reserve(4 * n);
    for (std::int64_t node = 0; node < n; ++node) {
      const auto mi = grid.multi_index(static_cast<std::size_t>(node));
      const int i = mi[axis];
      if (i + 1 < grid.axis_size(axis)) trip.emplace_back(node, node + stride, inv2h);
      if (i - 1 >= 0) trip.emplace_back(node, node - stride, -inv2h);
      const double c = drift_sign * grid.coordinate(drift_axis, mi[drift_axis]);
      if (c != 0.0) {
        const int it = mi[0];
        if (it + 1 < grid.t_steps()) trip.emplace_back(node, node + t_stride, c * inv2ht);
        if (it - 1 >= 0) trip.emplace_back(node, node - t_stride, -c * inv2ht);
      }
    }
    RowSparseMatrix x(n, n);
    x.setFromTriplets(trip.begin(), trip.end());
    x.makeCompressed();
    fields.push_back(std::move(x));
  }
  return fields;
}

/// D = sum_k X_k^T X_k, assembled so that it is bit-exactly symmetric.
inline SymmetricOperator build_sublaplacian(const std::vector<RowSparseMatrix>& fields) {
  if (fields.empty()) throw DimensionError("build_sublaplacian: no vector fields");
  const Eigen::Index n = fields.front().rows();
  std::vector<detail::Triplet> upper;
  for (const auto& x : fields) {
    if (x.rows() != n || x.cols() != n) throw DimensionError("build_sublaplacian: fields differ in size");
    for (Eigen::Index r = 0; r < x.outerSize(); ++r) {
      std::vector<std::pair<std::int64_t, double>> row;
      for (RowSparseMatrix::InnerIterator it(x, r); it; ++it) row.emplace_back(it.col(), it.value());
      for (std::size_t a = 0; a < row.size(); ++a) {
        for (std::size_t b = 0; b < row.size(); ++b) {
          if (row[a].first <= row[b].first) {
            upper.push_back({row[a].first, row[b].first, row[a].second * row[b].second});
          }
        }
      }
    }
  }
  return SymmetricOperator(detail::assemble_symmetric(n, std::move(upper)), Backend::heisenberg);
}

inline SymmetricOperator build_heisenberg_operator(const Grid& grid) {
  return build_sublaplacian(build_vector_fields(grid));
}

/// Periodic second difference scaled by 1/h^2; eigenvalues (2 - 2cos(2 pi q/n))/h^2.
inline SymmetricOperator build_circle_laplacian(Eigen::Index n, double h) {
  if (n < 3) throw DomainError("build_circle_laplacian: n must be >= 3");
  if (!(h > 0.0)) throw DomainError("build_circle_laplacian: h must be positive");
  const double inv = 1.0 / (h * h);
  std::vector<detail::Triplet> upper;
  for (Eigen::Index i = 0; i < n; ++i) {
    upper.push_back({i, i, 2.0 * inv});
    const Eigen::Index j = (i + 1) % n;
    upper.push_back({std::min(i, j), std::max(i, j), -inv});
  }
  return SymmetricOperator(detail::assemble_symmetric(n, std::move(upper)), Backend::circle);
}

struct WeightedEdge {
  Eigen::Index i, j;
  double weight;
};

/// L = degree - adjacency. Repeated edges add their weights. n defaults to
/// one past the largest vertex index.
inline SymmetricOperator build_graph_laplacian(const std::vector<WeightedEdge>& edges, Eigen::Index n = -1) {
  Eigen::Index max_v = -1;
  for (const auto& e : edges) {
    if (!(e.weight > 0.0)) throw DomainError("build_graph_laplacian: edge weight must be positive");
    if (e.i == e.j) throw DomainError("build_graph_laplacian: self-loop at vertex " + std::to_string(e.i));
    if (e.i < 0 || e.j < 0) throw DimensionError("build_graph_laplacian: negative vertex index");
    max_v = std::max({max_v, e.i, e.j});
  }
  if (n < 0) n = max_v + 1;
  if (max_v >= n) throw DimensionError("build_graph_laplacian: vertex index exceeds n");
  if (n < 1) throw DomainError("build_graph_laplacian: empty graph");
  std::vector<detail::Triplet> upper;
  for (const auto& e : edges) {
    upper.push_back({e.i, e.i, e.weight});
    upper.push_back({e.j, e.j, e.weight});
    upper.push_back({std::min(e.i, e.j), std::max(e.i, e.j), -e.weight});
  }
  return SymmetricOperator(detail::assemble_symmetric(n, std::move(upper)), Backend::graph);
}

/// Erdos-Renyi edges with probability p and weights uniform in [w_lo, w_hi],
/// plus a ring 0-1-...-(n-1)-0 when connect is set so the graph is connected.
inline std::vector<WeightedEdge> random_graph_edges(Eigen::Index n, double p, double w_lo, double w_hi,
                                                    std::uint64_t seed, bool connect = true) {
  if (n < 3) throw DomainError("random_graph_edges: n must be >= 3");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("random_graph_edges: p must be in [0, 1]");
  if (!(w_lo > 0.0 && w_hi >= w_lo)) throw DomainError("random_graph_edges: need 0 < w_lo <= w_hi");
  std::mt19937_64 rng(seed);
  auto uniform = [&]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  std::vector<WeightedEdge> edges;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const bool ring = connect && (j == i + 1 || (i == 0 && j == n - 1));
      const double u = uniform();
      if (ring || u < p) edges.push_back({i, j, w_lo + (w_hi - w_lo) * uniform()});
    }
  }
  return edges;
}

/// op^k f by repeated application; k = 0 is the identity.
inline Eigen::VectorXd apply_power(const SymmetricOperator& op, int k, const Eigen::VectorXd& f) {
  if (k < 0) throw DomainError("apply_power: k must be nonnegative");
  if (f.size() != op.dimension()) throw DimensionError("apply_power: size mismatch");
  Eigen::VectorXd out = f;
  for (int i = 0; i < k; ++i) out = op.matrix() * out;
  return out;
}

/// (op/scale)^k f; keeps high powers in range when scale ~ spectral radius.
inline Eigen::VectorXd apply_power_scaled(const SymmetricOperator& op, int k, const Eigen::VectorXd& f,
                                          double scale) {
  if (!(scale > 0.0)) throw DomainError("apply_power_scaled: scale must be positive");
  Eigen::VectorXd out = f;
  for (int i = 0; i < k; ++i) out = (op.matrix() * out) / scale;
  return out;
}

}  // namespace pws
