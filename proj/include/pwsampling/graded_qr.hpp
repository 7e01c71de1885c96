#pragma once

// Householder QR for least-squares problems whose rows carry weights spread
// over hundreds of orders of magnitude. Rows are sorted by decreasing size and
// columns are pivoted by remaining norm; with that ordering Householder QR is
// row-wise backward stable, so tiny-weight rows keep their relative accuracy.
// Norms are computed with scaling so that squared entries never underflow.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "pwsampling/errors.hpp"

namespace pws {

class GradedQR {
 public:
  GradedQR() = default;

  explicit GradedQR(const Eigen::MatrixXd& a) { compute(a); }

  void compute(const Eigen::MatrixXd& a) {
    rows_ = a.rows();
    cols_ = a.cols();
    if (rows_ < cols_) throw DimensionError("GradedQR: needs at least as many rows as columns");

    row_perm_.resize(static_cast<std::size_t>(rows_));
    std::iota(row_perm_.begin(), row_perm_.end(), Eigen::Index{0});
    std::vector<double> row_size(static_cast<std::size_t>(rows_));
    for (Eigen::Index i = 0; i < rows_; ++i) row_size[static_cast<std::size_t>(i)] = a.row(i).cwiseAbs().maxCoeff();
    std::stable_sort(row_perm_.begin(), row_perm_.end(), [&](Eigen::Index x, Eigen::Index y) {
      return row_size[static_cast<std::size_t>(x)] > row_size[static_cast<std::size_t>(y)];
    });

    qr_.resize(rows_, cols_);
    for (Eigen::Index i = 0; i < rows_; ++i) qr_.row(i) = a.row(row_perm_[static_cast<std::size_t>(i)]);

    col_perm_.resize(static_cast<std::size_t>(cols_));
    std::iota(col_perm_.begin(), col_perm_.end(), Eigen::Index{0});
    tau_.setZero(cols_);

    for (Eigen::Index j = 0; j < cols_; ++j) {
      // pivot: remaining column with the largest norm
      Eigen::Index best = j;
      double best_norm = -1.0;
      for (Eigen::Index c = j; c < cols_; ++c) {
        const double nrm = qr_.col(c).tail(rows_ - j).stableNorm();
        if (nrm > best_norm) {
          best_norm = nrm;
          best = c;
        }
      }
      if (best != j) {
        qr_.col(j).swap(qr_.col(best));
        std::swap(col_perm_[static_cast<std::size_t>(j)], col_perm_[static_cast<std::size_t>(best)]);
      }
      householder_step(j);
    }
  }

  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }

  /// Upper-triangular factor in pivoted column order.
  Eigen::MatrixXd matrix_r() const {
    return qr_.topRows(cols_).triangularView<Eigen::Upper>();
  }

  /// Column permutation: pivoted column j is original column col_permutation()[j].
  const std::vector<Eigen::Index>& col_permutation() const { return col_perm_; }

  /// Q^T b for b in the original row order.
  Eigen::VectorXd apply_qt(const Eigen::VectorXd& b) const {
    if (b.size() != rows_) throw DimensionError("GradedQR::apply_qt: size mismatch");
    Eigen::VectorXd y(rows_);
    for (Eigen::Index i = 0; i < rows_; ++i) y[i] = b[row_perm_[static_cast<std::size_t>(i)]];
    for (Eigen::Index j = 0; j < cols_; ++j) {
      if (tau_[j] == 0.0) continue;
      auto seg = y.tail(rows_ - j);
      double w = seg[0];
      for (Eigen::Index i = 1; i < seg.size(); ++i) w += qr_(j + i, j) * seg[i];
      w *= tau_[j];
      seg[0] -= w;
      for (Eigen::Index i = 1; i < seg.size(); ++i) seg[i] -= w * qr_(j + i, j);
    }
    return y;
  }

  /// argmin_x ||A x - b||.
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    const Eigen::VectorXd y = apply_qt(b);
    Eigen::VectorXd xp = y.head(cols_);
    for (Eigen::Index i = cols_ - 1; i >= 0; --i) {
      double s = xp[i];
      for (Eigen::Index c = i + 1; c < cols_; ++c) s -= qr_(i, c) * xp[c];
      if (qr_(i, i) == 0.0) throw SolverError("GradedQR::solve: zero pivot (rank deficient)", 0.0);
      xp[i] = s / qr_(i, i);
    }
    Eigen::VectorXd x(cols_);
    for (Eigen::Index j = 0; j < cols_; ++j) x[col_perm_[static_cast<std::size_t>(j)]] = xp[j];
    return x;
  }

  /// x with A^T A x = g, through R^T R in pivoted order.
  Eigen::VectorXd solve_normal(const Eigen::VectorXd& g) const {
    if (g.size() != cols_) throw DimensionError("GradedQR::solve_normal: size mismatch");
    Eigen::VectorXd w(cols_);
    for (Eigen::Index j = 0; j < cols_; ++j) w[j] = g[col_perm_[static_cast<std::size_t>(j)]];
    for (Eigen::Index i = 0; i < cols_; ++i) {
      double s = w[i];
      for (Eigen::Index r = 0; r < i; ++r) s -= qr_(r, i) * w[r];
      if (qr_(i, i) == 0.0) throw SolverError("GradedQR::solve_normal: zero pivot (rank deficient)", 0.0);
      w[i] = s / qr_(i, i);
    }
    for (Eigen::Index i = cols_ - 1; i >= 0; --i) {
      double s = w[i];
      for (Eigen::Index c = i + 1; c < cols_; ++c) s -= qr_(i, c) * w[c];
      w[i] = s / qr_(i, i);
    }
    Eigen::VectorXd x(cols_);
    for (Eigen::Index j = 0; j < cols_; ++j) x[col_perm_[static_cast<std::size_t>(j)]] = w[j];
    return x;
  }

  /// |R_00| and |R_{n-1,n-1}|: crude size of the extreme singular values.
  double max_pivot() const { return cols_ ? std::abs(qr_(0, 0)) : 0.0; }
  double min_pivot() const { return cols_ ? std::abs(qr_(cols_ - 1, cols_ - 1)) : 0.0; }

 private:
  void householder_step(Eigen::Index j) {
    const Eigen::Index len = rows_ - j;
    auto x = qr_.col(j).tail(len);
    const double alpha = x.stableNorm();
    if (alpha == 0.0) {
      tau_[j] = 0.0;
      return;
    }
    const double x0 = x[0];
    const double beta = x0 >= 0.0 ? -alpha : alpha;
    // H = I - tau v v^T with v = [1; x_tail / (x0 - beta)]
    const double denom = x0 - beta;
    tau_[j] = (beta - x0) / beta;
    for (Eigen::Index i = 1; i < len; ++i) x[i] /= denom;
    x[0] = beta;

    const Eigen::Index rest = cols_ - j - 1;
    if (rest == 0) return;
    auto trailing = qr_.block(j, j + 1, len, rest);
    // w^T = v^T * trailing
    Eigen::RowVectorXd w = trailing.row(0);
    if (len > 1) w.noalias() += x.tail(len - 1).transpose() * trailing.bottomRows(len - 1);
    w *= tau_[j];
    trailing.row(0) -= w;
    if (len > 1) trailing.bottomRows(len - 1).noalias() -= x.tail(len - 1) * w;
  }

  Eigen::Index rows_ = 0, cols_ = 0;
  Eigen::MatrixXd qr_;
  Eigen::VectorXd tau_;
  std::vector<Eigen::Index> row_perm_;
  std::vector<Eigen::Index> col_perm_;
};

}  // namespace pws
