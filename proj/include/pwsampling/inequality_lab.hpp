#pragma once

// Empirical checks of the sampling inequalities: the power inequality
// ||f|| <= m b + 8^{m-1} a^m ||A^m f||, Plancherel-Polya constants on the
// subspace vanishing on a sample set, norm-equivalence ratios and density
// scans.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pwsampling/errors.hpp"
#include "pwsampling/sample_set.hpp"
#include "pwsampling/spectral.hpp"
#include "pwsampling/splines.hpp"
#include "pwsampling/uniqueness.hpp"

namespace pws {

// ---------------------------------------------------------------------------
// Power inequality

struct PowerInequalityRow {
  int m = 1;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

struct PowerInequalityReport {
  double a = 0.0;
  double b = 0.0;
  std::vector<PowerInequalityRow> rows;
  bool all_hold() const {
    return std::all_of(rows.begin(), rows.end(), [](const PowerInequalityRow& r) { return r.holds; });
  }
};

/// Both sides for m = 2^l, l = 0..l_max. Powers of A are evaluated in the
/// eigenbasis. A row holds when rhs / lhs >= 1 - 1e-8.
inline PowerInequalityReport power_inequality_check(const SpectralDecomposition& d, const Eigen::VectorXd& f, double a, double b,
                                  int l_max) {
  if (!d.full) throw DomainError("power_inequality_check: needs a full decomposition");
  if (f.size() != d.dimension()) throw DimensionError("power_inequality_check: size mismatch");
  if (!(a > 0.0) || !(b >= 0.0)) throw DomainError("power_inequality_check: need a > 0 and b >= 0");
  if (l_max < 0 || l_max > 10) throw DomainError("power_inequality_check: l_max must be in [0, 10]");
  // coefficients at roundoff level of ||f|| would be amplified by 8^{m-1} a^m
  const Eigen::VectorXd c = detail::cleaned_coefficients(d, f, SpectralCheckOptions{}.coefficient_floor);
  const Eigen::VectorXd lam = d.eigenvalues.cwiseMax(0.0);
  auto power_norm = [&](int m) { return (lam.array().pow(m) * c.array()).matrix().stableNorm(); };

  const double fn = f.norm();
  const double hyp = b + a * power_norm(1);
  if (fn > hyp * (1.0 + 1e-12)) {
    throw PreconditionError("power_inequality_check: hypothesis ||f|| <= b + a ||A f|| fails (" + std::to_string(fn) +
                            " > " + std::to_string(hyp) + ")");
  }
  PowerInequalityReport rep;
  rep.a = a;
  rep.b = b;
  for (int l = 0; l <= l_max; ++l) {
    const int m = 1 << l;
    PowerInequalityRow row;
    row.m = m;
    row.lhs = fn;
    row.rhs = m * b + std::pow(8.0, m - 1) * std::pow(a, m) * power_norm(m);
    row.holds = row.lhs == 0.0 || row.rhs >= (1.0 - 1e-8) * row.lhs;
    rep.rows.push_back(row);
  }
  return rep;
}

inline PowerInequalityReport power_inequality_check(const SymmetricOperator& a_op, const Eigen::VectorXd& f, double a, double b,
                                  int l_max) {
  return power_inequality_check(decompose(a_op), f, a, b, l_max);
}

// ---------------------------------------------------------------------------
// Plancherel-Polya constant

struct ConstantEstimate {
  std::string quantity = "C_emp";
  int level = 0;
  int order = 1;
  double value = 0.0;             // max ||f|| / ||D^k f|| over f vanishing on the samples
  double value_normalized = 0.0;  // same with D replaced by D / scale
  double scale = 1.0;
  double root = 0.0;              // value^{1/k}
  double proxy_q = 0.0;           // value^{1/k} 2^{-j/(2Q)}
  double proxy_half = 0.0;        // value^{1/k} 2^{-j/2}
  std::string method = "extremal-svd";
  double certificate = 0.0;       // | ||(D/s)^k x|| - sigma | / sigma for the extremal x
  bool infinite = false;
  std::optional<Eigen::VectorXd> extremal;  // unit maximizer (or kernel witness when infinite)
};

/// Reciprocal of the smallest singular value of D^k restricted to the free
/// coordinates. The weighted eigenbasis matrix is reduced by GradedQR and
/// its triangular factor handed to a one-sided Jacobi SVD, which keeps
/// relative accuracy for graded matrices. homogeneous_dim = 0 skips the
/// normalized proxies.
inline ConstantEstimate plancherel_polya_constant(const SpectralDecomposition& d, const SampleSet& samples, int k,
                                                  int homogeneous_dim = 0) {
  if (!d.full) throw DomainError("plancherel_polya_constant: needs a full decomposition");
  if (k < 1) throw DomainError("plancherel_polya_constant: k must be >= 1");
  ConstantEstimate est;
  est.level = samples.level;
  est.order = k;
  est.scale = d.scale();
  const double inf = std::numeric_limits<double>::infinity();
  auto finish = [&](double sigma_normalized) {
    est.value_normalized = 1.0 / sigma_normalized;
    est.root = std::pow(est.value_normalized, 1.0 / k) / est.scale;
    est.value = std::pow(est.root, k);
    if (homogeneous_dim > 0) est.proxy_q = est.root * std::exp2(-samples.level / (2.0 * homogeneous_dim));
    est.proxy_half = est.root * std::exp2(-samples.level / 2.0);
  };
  if (samples.is_full()) return est;  // U(Gamma) = {0}

  std::optional<SplineSolver> solver;
  try {
    solver.emplace(d, k, samples);
  } catch (const NonUniquenessError& e) {
    est.infinite = true;
    est.value = est.value_normalized = est.root = est.proxy_q = est.proxy_half = inf;
    est.extremal = e.witness();
    return est;
  }
  const GradedQR& qr = solver->factorization();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(qr.matrix_r(), Eigen::ComputeFullV);
  const double sigma = svd.singularValues()[svd.singularValues().size() - 1];
  if (!(sigma > 0.0)) {
    est.infinite = true;
    est.value = est.value_normalized = est.root = est.proxy_q = est.proxy_half = inf;
    return est;
  }
  // extremal vector in grid coordinates
  const Eigen::VectorXd vp = svd.matrixV().col(svd.matrixV().cols() - 1);
  const auto& perm = qr.col_permutation();
  const auto& free = solver->free_indices();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(d.dimension());
  for (std::size_t j = 0; j < perm.size(); ++j) x[free[static_cast<std::size_t>(perm[j])]] = vp[static_cast<Eigen::Index>(j)];
  x.normalize();
  const double achieved = spectral_seminorm(d, x, k);
  est.certificate = std::abs(achieved - sigma) / sigma;
  est.extremal = x;
  finish(sigma);
  return est;
}

/// Lower bound on the constant from random vectors vanishing on the samples,
/// using sparse powers only (for operators above the dense cap).
inline ConstantEstimate plancherel_polya_constant_randomized(const SymmetricOperator& op, const SampleSet& samples,
                                                             int k, int trials, std::uint64_t seed) {
  if (trials < 1) throw DomainError("plancherel_polya_constant_randomized: trials must be >= 1");
  ConstantEstimate est;
  est.method = "randomized";
  est.level = samples.level;
  est.order = k;
  est.scale = std::max(op.gershgorin_bound(), std::numeric_limits<double>::min());
  if (samples.is_full()) return est;
  const auto free = samples.free_indices();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double best = 0.0;
  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(op.dimension());
    for (auto i : free) f[i] = normal(rng);
    f.normalize();
    const double s = apply_power_scaled(op, k, f, est.scale).norm();
    if (s == 0.0) {
      est.infinite = true;
      est.extremal = f;
      best = std::numeric_limits<double>::infinity();
      break;
    }
    if (1.0 / s > best) {
      best = 1.0 / s;
      est.extremal = f;
    }
  }
  est.value_normalized = best;
  est.root = std::pow(best, 1.0 / k) / est.scale;
  est.value = std::pow(est.root, k);
  est.proxy_half = est.root * std::exp2(-samples.level / 2.0);
  return est;
}

// ---------------------------------------------------------------------------
// Norm equivalence on the sample set

struct NormEquivalenceReport {
  int order = 1;
  int trials = 0;
  double lower = 0.0;
  double upper = 0.0;
  std::optional<Eigen::VectorXd> witness;  // set when the lower bound is 0
};

/// Ratio (||D^k f|| + ||f|_Gamma||) / (||f|| + ||D^k f||) over random unit vectors
/// and a few extremal candidates: the Plancherel-Polya maximizer, the lowest
/// eigenvectors and vectors supported on the samples.
inline NormEquivalenceReport norm_equivalence_scan(const SpectralDecomposition& d, const SampleSet& samples, int k, int trials,
                                      std::uint64_t seed) {
  if (!d.full) throw DomainError("norm_equivalence_scan: needs a full decomposition");
  if (trials < 1) throw DomainError("norm_equivalence_scan: trials must be >= 1");
  if (samples.dimension != d.dimension()) throw DimensionError("norm_equivalence_scan: sample set dimension mismatch");
  NormEquivalenceReport rep;
  rep.order = k;
  rep.trials = trials;
  rep.lower = std::numeric_limits<double>::infinity();
  rep.upper = 0.0;
  const double sk = std::pow(d.scale(), k);
  auto ratio = [&](const Eigen::VectorXd& f) {
    const double dk = spectral_seminorm(d, f, k) * sk;
    const double num = dk + samples.restrict(f).norm();
    const double den = f.norm() + dk;
    return num / den;
  };
  auto consider = [&](const Eigen::VectorXd& f) {
    const double r = ratio(f);
    rep.lower = std::min(rep.lower, r);
    rep.upper = std::max(rep.upper, r);
  };

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXd f(d.dimension());
    for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = normal(rng);
    consider(f / f.norm());
  }
  const auto pp = plancherel_polya_constant(d, samples, k);
  if (pp.infinite) {
    rep.lower = 0.0;
    rep.witness = pp.extremal;
    if (pp.extremal) consider(*pp.extremal);
    rep.lower = 0.0;
    return rep;
  }
  if (pp.extremal) consider(*pp.extremal);
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(8, d.size()); ++i) consider(d.eigenvectors.col(i));
  if (!samples.empty()) {
    Eigen::VectorXd ind = Eigen::VectorXd::Zero(d.dimension());
    for (auto g : samples.indices) ind[g] = 1.0;
    consider(ind / ind.norm());
    for (std::size_t g = 0; g < std::min<std::size_t>(4, samples.size()); ++g) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(d.dimension());
      e[samples.indices[g]] = 1.0;
      consider(e);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Density scan

struct ScanRow {
  int level = 0;
  int order = 1;
  Eigen::Index sample_count = 0;
  Eigen::Index dim_pw = 0;
  double sigma_min = 0.0;
  double c_emp = 0.0;
  double error = 0.0;  // relative reconstruction error at this order
  Verdict verdict = Verdict::failed;
  std::string message;
};

struct ScanTable {
  double omega = 0.0;
  std::vector<ScanRow> rows;  // ordered by (level as given, order)
  std::optional<int> j_star;  // coarsest level from which every finer level converges
};

struct ScanOptions {
  std::uint64_t seed = 1;
  int jobs = 1;
  ReconstructOptions reconstruct;
};

namespace detail {

/// Runs tasks with at most `jobs` in flight; results land at their own index.
template <class T>
std::vector<T> run_indexed(std::vector<std::function<T()>>& tasks, int jobs) {
  std::vector<T> out(tasks.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) out[i] = tasks[i]();
    return out;
  }
  for (std::size_t start = 0; start < tasks.size(); start += static_cast<std::size_t>(jobs)) {
    const std::size_t stop = std::min(tasks.size(), start + static_cast<std::size_t>(jobs));
    std::vector<std::future<T>> fut;
    for (std::size_t i = start; i < stop; ++i) fut.push_back(std::async(std::launch::async, tasks[i]));
    for (std::size_t i = start; i < stop; ++i) out[i] = fut[i - start].get();
  }
  return out;
}

}  // namespace detail

/// For each level j (coarse to fine) and order k: uniqueness of PW_omega on the
/// lattice, the Plancherel-Polya constant and the reconstruction error of a
/// random PW_omega target. The per-level verdict is applied to the errors
/// across the orders.
inline ScanTable critical_density_scan(const SpectralDecomposition& d, double omega,
                                       const std::function<SampleSet(int)>& sample_factory,
                                       const std::vector<int>& j_list, const std::vector<int>& orders,
                                       const ScanOptions& opt = {}) {
  if (j_list.empty() || orders.empty()) throw DomainError("critical_density_scan: empty level or order list");
  for (std::size_t i = 1; i < j_list.size(); ++i)
    if (j_list[i] >= j_list[i - 1]) throw DomainError("critical_density_scan: j_list must be strictly descending");
  for (std::size_t i = 1; i < orders.size(); ++i)
    if (orders[i] <= orders[i - 1]) throw DomainError("critical_density_scan: orders must be strictly increasing");

  const Eigen::VectorXd f = random_pw(d, omega, opt.seed);
  std::vector<SampleSet> sets;
  for (int j : j_list) sets.push_back(sample_factory(j));

  struct Cell {
    double c_emp = 0.0;
    double error = 0.0;
    bool ok = false;
    std::string message;
  };
  std::vector<std::function<Cell()>> tasks;
  for (std::size_t a = 0; a < sets.size(); ++a) {
    for (int k : orders) {
      tasks.emplace_back([&, a, k]() {
        Cell c;
        try {
          c.c_emp = plancherel_polya_constant(d, sets[a], k).value;
          const auto s = variational_spline(d, k, sets[a], sets[a].restrict(f), opt.reconstruct.spline);
          c.error = (f - s.values).norm() / f.norm();
          c.ok = true;
        } catch (const Error& e) {
          c.message = e.what();
          c.error = std::numeric_limits<double>::quiet_NaN();
        }
        return c;
      });
    }
  }
  const auto cells = detail::run_indexed(tasks, opt.jobs);

  ScanTable table;
  table.omega = omega;
  std::vector<bool> converged(sets.size(), false);
  for (std::size_t a = 0; a < sets.size(); ++a) {
    const auto uq = uniqueness_test(d, omega, sets[a]);
    std::vector<double> errors;
    bool failed = false;
    std::string message;
    for (std::size_t b = 0; b < orders.size(); ++b) {
      const Cell& c = cells[a * orders.size() + b];
      if (!c.ok) {
        failed = true;
        if (message.empty()) message = c.message;
      }
      errors.push_back(c.error);
    }
    Verdict v;
    if (!uq.unique()) v = Verdict::aliased;
    else if (failed) v = Verdict::failed;
    else v = convergence_verdict(errors, opt.reconstruct.decay_factor, opt.reconstruct.error_floor);
    converged[a] = v == Verdict::converged;
    for (std::size_t b = 0; b < orders.size(); ++b) {
      const Cell& c = cells[a * orders.size() + b];
      ScanRow row;
      row.level = j_list[a];
      row.order = orders[b];
      row.sample_count = static_cast<Eigen::Index>(sets[a].size());
      row.dim_pw = uq.dim_pw;
      row.sigma_min = uq.sigma_min;
      row.c_emp = c.c_emp;
      row.error = c.error;
      row.verdict = v;
      row.message = c.message;
      table.rows.push_back(row);
    }
  }
  // j_list runs coarse to fine; walk from the finest level upward
  for (std::size_t a = sets.size(); a-- > 0;) {
    if (!converged[a]) break;
    table.j_star = j_list[a];
  }
  return table;
}

}  // namespace pws
