#pragma once

// Is a Paley-Wiener function determined by its values on a sample set?

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <optional>

#include "pwsampling/sample_set.hpp"
#include "pwsampling/spectral.hpp"

namespace pws {

struct UniquenessReport {
  double omega = 0.0;
  Eigen::Index dim_pw = 0;
  Eigen::Index sample_count = 0;
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  Eigen::Index rank = 0;
  std::optional<Eigen::VectorXd> witness;  // unit PW vector vanishing on the samples

  bool unique() const { return rank == dim_pw; }
};

inline constexpr double kRankThreshold = 1e-8;

/// SVD of the |Gamma| x dim PW matrix of eigenvector samples. Rank uses the
/// threshold 1e-8 sigma_max; a rank-deficient family yields a witness.
inline UniquenessReport uniqueness_test(const SpectralDecomposition& d, double omega, const SampleSet& samples) {
  if (samples.dimension != d.dimension()) throw DimensionError("uniqueness_test: sample set dimension mismatch");
  const Eigen::Index b = d.band_size(omega);
  if (b < 1) throw DomainError("uniqueness_test: PW space is empty for this omega");
  if (!d.full && b == d.size()) throw DomainError("uniqueness_test: band reaches past the computed spectrum");
  UniquenessReport rep;
  rep.omega = omega;
  rep.dim_pw = b;
  rep.sample_count = static_cast<Eigen::Index>(samples.size());

  Eigen::MatrixXd phi(rep.sample_count, b);
  for (Eigen::Index g = 0; g < rep.sample_count; ++g)
    phi.row(g) = d.eigenvectors.row(samples.indices[static_cast<std::size_t>(g)]).head(b);

  if (rep.sample_count == 0) {
    rep.sigma_min = 0.0;
    rep.rank = 0;
    Eigen::VectorXd w = d.eigenvectors.col(0);
    rep.witness = w / w.norm();
    return rep;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(phi, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  rep.sigma_max = sv.size() ? sv[0] : 0.0;
  // singular values beyond min(|Gamma|, b) are exactly zero
  rep.sigma_min = rep.sample_count < b ? 0.0 : sv[sv.size() - 1];
  rep.rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > kRankThreshold * rep.sigma_max) ++rep.rank;
  if (rep.rank < b) {
    const Eigen::VectorXd coeff = svd.matrixV().col(b - 1);
    Eigen::VectorXd w = d.eigenvectors.leftCols(b) * coeff;
    rep.witness = w / w.norm();
  }
  return rep;
}

}  // namespace pws
