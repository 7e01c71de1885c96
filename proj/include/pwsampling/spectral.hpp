#pragma once

// Finite spectral calculus for a SymmetricOperator: eigendecomposition,
// Paley-Wiener projection, Bernstein ratios and bandwidth measurement.

#include <Eigen/Dense>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "pwsampling/errors.hpp"
#include "pwsampling/operator.hpp"

namespace pws {

inline constexpr Eigen::Index kDefaultDenseCap = 5000;

/// Dense-path cap, overridable through PWS_DENSE_CAP.
inline Eigen::Index default_dense_cap() {
  if (const char* env = std::getenv("PWS_DENSE_CAP")) {
    char* end = nullptr;
    const long long v = std::strtoll(env, &end, 10);
    if (end != env && v > 0) return static_cast<Eigen::Index>(v);
  }
  return kDefaultDenseCap;
}

enum class DecomposeMode { full, lowest };

struct DecomposeOptions {
  DecomposeMode mode = DecomposeMode::full;
  Eigen::Index r = 0;  // number of eigenpairs for the lowest mode
  std::uint64_t seed = 1;
  double tolerance = 1e-8;  // residual tolerance relative to lambda_max
  Eigen::Index dense_cap = default_dense_cap();
  int max_iterations = 500;
  int filter_degree = 20;
};

struct SpectralDecomposition {
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // columns, orthonormal
  Eigen::VectorXd residuals;     // ||D v_i - lambda_i v_i||
  double residual_bound = 0.0;
  double lambda_max = 0.0;       // largest eigenvalue, or an upper bound when partial
  std::uint64_t fingerprint = 0;
  bool full = true;
  /// The operator these pairs belong to; set by decompose().
  std::shared_ptr<const SparseMatrix> matrix;

  Eigen::Index dimension() const { return eigenvectors.rows(); }
  Eigen::Index size() const { return eigenvalues.size(); }

  /// Scale used to normalize operator powers; never zero.
  double scale() const { return lambda_max > 0.0 ? lambda_max : 1.0; }

  /// Eigenvalues within this distance of a band edge count as on the edge.
  double band_tolerance() const { return 1e-10 * scale(); }

  Eigen::VectorXd coefficients(const Eigen::VectorXd& f) const {
    if (f.size() != dimension()) throw DimensionError("SpectralDecomposition: vector size mismatch");
    return eigenvectors.transpose() * f;
  }

  Eigen::VectorXd synthesize(const Eigen::VectorXd& c) const { return eigenvectors * c; }

  /// Number of eigenpairs with eigenvalue <= omega (within band tolerance).
  Eigen::Index band_size(double omega) const {
    Eigen::Index count = 0;
    for (Eigen::Index i = 0; i < size(); ++i)
      if (eigenvalues[i] <= omega + band_tolerance()) ++count;
    return count;
  }

  /// Number of eigenvalues numerically equal to zero.
  Eigen::Index kernel_dimension() const { return band_size(0.0); }

  double orthonormality_defect() const {
    const Eigen::MatrixXd g = eigenvectors.transpose() * eigenvectors;
    return (g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
  }
};

namespace detail {

// Flip each eigenvector so that its largest-magnitude entry is positive.
inline void normalize_signs(Eigen::MatrixXd& v) {
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      if (std::abs(v(i, c)) > best * (1.0 + 1e-12)) {
        best = std::abs(v(i, c));
        arg = i;
      }
    }
    if (v(arg, c) < 0.0) v.col(c) = -v.col(c);
  }
}

inline Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& x) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
  return qr.householderQ() * Eigen::MatrixXd::Identity(x.rows(), x.cols());
}

// Scaled Chebyshev filter of the given degree: damps the spectrum in
// [lower, upper] and amplifies what lies below, normalized at low_end.
inline Eigen::MatrixXd chebyshev_filter(const SparseMatrix& a, const Eigen::MatrixXd& x, int degree, double lower,
                                        double upper, double low_end) {
  const double e = 0.5 * (upper - lower);
  const double c = 0.5 * (upper + lower);
  double sigma = e / (low_end - c);
  const double tau = 2.0 / sigma;
  Eigen::MatrixXd prev = x;
  Eigen::MatrixXd cur = (a * x - c * x) * (sigma / e);
  for (int i = 2; i <= degree; ++i) {
    const double sigma_new = 1.0 / (tau - sigma);
    Eigen::MatrixXd next = (a * cur - c * cur) * (2.0 * sigma_new / e) - (sigma * sigma_new) * prev;
    prev = std::move(cur);
    cur = std::move(next);
    sigma = sigma_new;
  }
  return cur;
}

inline SpectralDecomposition dense_decompose(const SymmetricOperator& op, const DecomposeOptions& opt) {
  const Eigen::Index n = op.dimension();
  if (n > opt.dense_cap) throw ResourceError("decompose: dense path size exceeds cap", n, opt.dense_cap);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.dense());
  if (es.info() != Eigen::Success) throw SolverError("decompose: dense eigensolver failed", -1.0);
  SpectralDecomposition d;
  d.eigenvalues = es.eigenvalues();
  d.eigenvectors = es.eigenvectors();
  normalize_signs(d.eigenvectors);
  d.full = true;
  d.lambda_max = n > 0 ? std::max(d.eigenvalues.maxCoeff(), 0.0) : 0.0;
  return d;
}

inline SpectralDecomposition lowest_decompose(const SymmetricOperator& op, const DecomposeOptions& opt) {
  const Eigen::Index n = op.dimension();
  const Eigen::Index r = opt.r;
  const Eigen::Index block = std::min<Eigen::Index>(n, r + std::max<Eigen::Index>(4, r / 2));
  if (block >= n) {
    // Too small for a subspace method to make sense.
    DecomposeOptions dense = opt;
    auto d = dense_decompose(op, dense);
    d.eigenvalues = d.eigenvalues.head(r).eval();
    d.eigenvectors = d.eigenvectors.leftCols(r).eval();
    d.full = false;
    return d;
  }
  const double upper = op.gershgorin_bound();
  const SparseMatrix& a = op.matrix();
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd x(n, block);
  for (Eigen::Index j = 0; j < block; ++j)
    for (Eigen::Index i = 0; i < n; ++i) x(i, j) = normal(rng);
  x = orthonormal_basis(x);

  double best = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    const Eigen::MatrixXd ax = a * x;
    Eigen::MatrixXd h = x.transpose() * ax;
    h = 0.5 * (h + h.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    const Eigen::VectorXd theta = es.eigenvalues();
    x = (x * es.eigenvectors()).eval();
    const Eigen::MatrixXd res = a * x - x * theta.asDiagonal();
    double worst = 0.0;
    for (Eigen::Index j = 0; j < r; ++j) worst = std::max(worst, res.col(j).norm());
    best = std::min(best, worst);
    if (worst <= opt.tolerance * upper) {
      SpectralDecomposition d;
      d.eigenvalues = theta.head(r);
      d.eigenvectors = x.leftCols(r);
      normalize_signs(d.eigenvectors);
      d.full = false;
      d.lambda_max = upper;
      return d;
    }
    const double lower = theta[block - 1];
    double low_end = theta[0];
    if (!(low_end < lower)) low_end = lower - 1e-3 * (upper - lower);
    x = orthonormal_basis(chebyshev_filter(a, x, opt.filter_degree, lower, upper, low_end));
  }
  throw SolverError("decompose: subspace iteration did not converge", best);
}

}  // namespace detail

/// Eigenpairs of op. Full mode uses a dense symmetric eigensolver; lowest mode
/// computes the r smallest pairs with Chebyshev-filtered subspace iteration.
inline SpectralDecomposition decompose(const SymmetricOperator& op, const DecomposeOptions& opt = {}) {
  if (!op.is_symmetric()) throw SymmetryError("symmetry check failed: decompose needs a symmetric operator");
  SpectralDecomposition d;
  if (opt.mode == DecomposeMode::full) {
    d = detail::dense_decompose(op, opt);
  } else {
    if (opt.r < 1 || opt.r >= op.dimension()) throw DomainError("decompose: lowest mode requires 1 <= r < n");
    d = detail::lowest_decompose(op, opt);
  }
  d.fingerprint = op.fingerprint();
  d.matrix = std::make_shared<const SparseMatrix>(op.matrix());
  const Eigen::MatrixXd res = op.matrix() * d.eigenvectors - d.eigenvectors * d.eigenvalues.asDiagonal();
  d.residuals = res.colwise().norm().transpose();
  d.residual_bound = d.residuals.size() ? d.residuals.maxCoeff() : 0.0;
  const double limit = opt.tolerance * std::max(d.lambda_max, std::numeric_limits<double>::min());
  if (d.residual_bound > limit) throw SolverError("decompose: residual above tolerance", d.residual_bound);
  return d;
}

/// Sum over lambda_i <= omega of <f, v_i> v_i. The band is the closed
/// interval [0, omega].
inline Eigen::VectorXd pw_project(const SpectralDecomposition& d, double omega, const Eigen::VectorXd& f) {
  if (omega < 0.0) throw DomainError("pw_project: omega must be nonnegative");
  const Eigen::Index b = d.band_size(omega);
  if (!d.full && b == d.size()) {
    throw DomainError("pw_project: band reaches past the computed part of the spectrum");
  }
  const Eigen::MatrixXd vb = d.eigenvectors.leftCols(b);
  return vb * (vb.transpose() * f);
}

struct PWReport {
  double omega = 0.0;
  std::vector<double> ratios;  // r_k for k = 1..k_max
  double energy_above = 0.0;   // fraction of ||f||^2 above omega
  bool in_space = false;
  bool ratios_within = false;  // all r_k <= 1 + tolerance
  bool energy_within = false;  // energy_above <= energy_tol
};

struct SpectralCheckOptions {
  double ratio_tolerance = 1e-10;
  double energy_tolerance = 1e-12;
  // Spectral coefficients below this fraction of ||f|| are roundoff from
  // forming f in grid space and are treated as zero.
  double coefficient_floor = 1e-13;
};

namespace detail {

inline Eigen::VectorXd cleaned_coefficients(const SpectralDecomposition& d, const Eigen::VectorXd& f,
                                            double floor_rel) {
  if (!d.full) throw DomainError("spectral check requires a full decomposition");
  Eigen::VectorXd c = d.coefficients(f);
  const double thr = floor_rel * f.norm();
  for (Eigen::Index i = 0; i < c.size(); ++i)
    if (std::abs(c[i]) <= thr) c[i] = 0.0;
  return c;
}

}  // namespace detail

/// Bernstein ratios r_k = ||D^k f|| / (omega^k ||f||), evaluated in the eigenbasis.
inline PWReport bernstein_check(const SpectralDecomposition& d, const Eigen::VectorXd& f, double omega,
                                int k_max = 8, const SpectralCheckOptions& opt = {}) {
  if (k_max < 1) throw DomainError("bernstein_check: k_max must be >= 1");
  if (f.size() != d.dimension()) throw DimensionError("bernstein_check: size mismatch");
  if (f.norm() == 0.0) throw DomainError("bernstein_check: f must be nonzero");
  const Eigen::VectorXd c = detail::cleaned_coefficients(d, f, opt.coefficient_floor);
  const double total = c.squaredNorm();
  PWReport rep;
  rep.omega = omega;
  double above = 0.0;
  for (Eigen::Index i = 0; i < c.size(); ++i)
    if (d.eigenvalues[i] > omega + d.band_tolerance()) above += c[i] * c[i];
  rep.energy_above = total > 0.0 ? above / total : 0.0;
  const double inf = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= k_max; ++k) {
    double s = 0.0;
    bool infinite = false;
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      if (c[i] == 0.0) continue;
      const double lam = std::max(d.eigenvalues[i], 0.0);
      if (lam <= d.band_tolerance()) continue;  // kernel: contributes nothing
      if (omega <= 0.0) {
        infinite = true;
        break;
      }
      const double q = std::pow(lam / omega, static_cast<double>(k));
      s += (q * c[i]) * (q * c[i]);
    }
    rep.ratios.push_back(infinite ? inf : std::sqrt(s / total));
  }
  rep.ratios_within = std::all_of(rep.ratios.begin(), rep.ratios.end(),
                                  [&](double r) { return r <= 1.0 + opt.ratio_tolerance; });
  rep.energy_within = rep.energy_above <= opt.energy_tolerance;
  rep.in_space = rep.ratios_within && rep.energy_within;
  return rep;
}

/// Smallest eigenvalue omega with energy of f above omega at most
/// energy_tol * ||f||^2. Returns 0 for f = 0.
inline double min_bandwidth(const SpectralDecomposition& d, const Eigen::VectorXd& f, double energy_tol = 1e-12,
                            const SpectralCheckOptions& opt = {}) {
  if (!(energy_tol >= 0.0 && energy_tol < 1.0)) throw DomainError("min_bandwidth: energy_tol must be in [0, 1)");
  if (f.size() != d.dimension()) throw DimensionError("min_bandwidth: size mismatch");
  const double total_f = f.squaredNorm();
  if (total_f == 0.0) return 0.0;
  const Eigen::VectorXd c = detail::cleaned_coefficients(d, f, opt.coefficient_floor);
  const double total = c.squaredNorm();
  if (total == 0.0) return 0.0;
  // energy strictly above each candidate, walking down from the top
  const Eigen::Index n = c.size();
  double above = 0.0;
  Eigen::Index i = n - 1;
  double answer = d.eigenvalues[n - 1];
  while (i >= 0) {
    // group eigenvalues equal within tolerance
    Eigen::Index lo = i;
    while (lo - 1 >= 0 && d.eigenvalues[i] - d.eigenvalues[lo - 1] <= d.band_tolerance()) --lo;
    // candidate omega = eigenvalues[lo]; energy above it is 'above'
    if (above <= energy_tol * total) answer = d.eigenvalues[lo];
    else break;
    for (Eigen::Index p = lo; p <= i; ++p) above += c[p] * c[p];
    i = lo - 1;
  }
  return std::max(answer, 0.0);
}

/// Unit vector with independent standard normal coefficients on the modes
/// with eigenvalue <= omega.
inline Eigen::VectorXd random_pw(const SpectralDecomposition& d, double omega, std::uint64_t seed) {
  const Eigen::Index b = d.band_size(omega);
  if (b == 0) throw DomainError("random_pw: no eigenvalue <= omega");
  if (!d.full && b == d.size()) throw DomainError("random_pw: band reaches past the computed part of the spectrum");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(d.size());
  for (Eigen::Index i = 0; i < b; ++i) c[i] = normal(rng);
  Eigen::VectorXd f = d.synthesize(c);
  return f / f.norm();
}

}  // namespace pws
