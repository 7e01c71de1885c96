#include <gtest/gtest.h>

#include <random>

#include "oracles/kkt_oracle.hpp"
#include "pwsampling/operator.hpp"
#include "pwsampling/sample_set.hpp"
#include "pwsampling/spectral.hpp"
#include "pwsampling/splines.hpp"

using namespace pws;

namespace {

Eigen::VectorXd gaussian(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

// Another interpolant of the same data: perturb the free coordinates only.
Eigen::VectorXd perturbed_interpolant(const SplineSolution& s, std::uint64_t seed, double size) {
  Eigen::VectorXd w = s.values;
  const Eigen::VectorXd noise = gaussian(w.size(), seed);
  for (auto i : s.samples.free_indices()) w[i] += size * noise[i];
  return w;
}

SymmetricOperator two_components() {
  return build_graph_laplacian({{0, 1, 1.0}, {1, 2, 2.0}, {3, 4, 1.0}, {4, 5, 1.0}}, 6);
}

}  // namespace

TEST(VariationalSpline, FullSamplingReturnsValues) {
  const auto op = build_circle_laplacian(10, 1.0);
  const auto d = decompose(op);
  const Eigen::VectorXd v = gaussian(10, 1);
  const auto s = variational_spline(d, 2, explicit_sample_set(10, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}), v);
  EXPECT_EQ(s.values, v);
  const Eigen::VectorXd d2 = op.apply(op.apply(v));
  EXPECT_NEAR(s.objective, d2.norm(), 1e-10 * d2.norm());
}

TEST(VariationalSpline, ConstantsOnConnectedGraph) {
  const auto d = decompose(build_graph_laplacian(random_graph_edges(15, 0.2, 0.5, 2.0, 3), 15));
  const auto samples = explicit_sample_set(15, {2, 7, 11});
  for (int k : {1, 2, 4}) {
    const auto s = variational_spline(d, k, samples, Eigen::Vector3d::Constant(2.5));
    EXPECT_LT((s.values - Eigen::VectorXd::Constant(15, 2.5)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT(s.objective_normalized, 1e-10);
    const auto a = alpha_l2_report(s);
    EXPECT_LT(a.l2_norm, 1e-10);
    EXPECT_TRUE(a.identity_holds);
  }
}

TEST(VariationalSpline, CircleExampleMatchesOracle) {
  const auto op = build_circle_laplacian(8, 1.0);
  const auto d = decompose(op);
  const auto samples = explicit_sample_set(8, {0, 4});
  const Eigen::Vector2d v(1.0, 0.0);
  const auto s = variational_spline(d, 1, samples, v);
  const auto o = oracle::kkt_spline(op.dense(), 1, samples.indices, v);
  EXPECT_LT((s.values - o.u).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((s.alpha_operator_units() - o.alpha).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_NEAR(s.alpha_operator_units().norm(), o.alpha.norm(), 1e-8);
  EXPECT_NEAR(s.objective, o.objective, 1e-8);
  EXPECT_LE(delta_support_residual(d, s), 1e-8);
  // piecewise linear between the samples
  EXPECT_NEAR(s.values[2], 0.5, 1e-12);
  EXPECT_NEAR(s.values[6], 0.5, 1e-12);
}

TEST(VariationalSpline, RandomCasesMatchOracle) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index n = 6 + static_cast<Eigen::Index>(rng() % 7);
    const auto op = build_graph_laplacian(random_graph_edges(n, 0.3, 0.5, 2.0, rng()), n);
    const auto d = decompose(op);
    std::vector<Eigen::Index> gamma;
    for (Eigen::Index i = 0; i < n; ++i)
      if (rng() % 3 == 0) gamma.push_back(i);
    if (gamma.empty()) gamma.push_back(0);
    const int k = 1 + static_cast<int>(rng() % 3);
    const auto samples = explicit_sample_set(n, gamma);
    const Eigen::VectorXd v = gaussian(static_cast<Eigen::Index>(gamma.size()), rng());
    const auto s = variational_spline(d, k, samples, v);
    const auto o = oracle::kkt_spline(op.dense(), k, gamma, v);
    const double scale = std::max(1.0, v.cwiseAbs().maxCoeff());
    EXPECT_LT((s.values - o.u).cwiseAbs().maxCoeff(), 1e-8 * scale) << trial;
    EXPECT_LT((s.alpha_operator_units() - o.alpha).norm(), 1e-8 * std::max(1.0, o.alpha.norm())) << trial;
  }
}

TEST(VariationalSpline, InterpolationMinimalityPythagoras) {
  const auto d = decompose(build_graph_laplacian(random_graph_edges(40, 0.1, 0.5, 2.0, 9), 40));
  const auto samples = explicit_sample_set(40, {0, 3, 8, 13, 21, 22, 30, 35});
  for (int k : {1, 2, 3}) {
    const Eigen::VectorXd v = gaussian(8, 100 + k);
    const auto s = variational_spline(d, k, samples, v);
    EXPECT_LE(s.interpolation_residual, 1e-8 * v.cwiseAbs().maxCoeff());
    const double ss = s.objective_normalized;
    for (int trial = 0; trial < 100; ++trial) {
      const Eigen::VectorXd w = perturbed_interpolant(s, 1000 * k + trial, std::pow(10.0, -(trial % 6)));
      const double ww = spectral_seminorm(d, w, k);
      const double hh = spectral_seminorm(d, w - s.values, k);
      EXPECT_LE(ss, ww + 1e-8);
      EXPECT_NEAR(ww * ww, ss * ss + hh * hh, 1e-6 * ww * ww);
    }
  }
}

TEST(VariationalSpline, Linearity) {
  const auto d = decompose(build_circle_laplacian(48, 1.0));
  const auto samples = circle_sample_set(48, 2, 1);
  const SplineSolver solver(d, 3, samples);
  const Eigen::VectorXd v = gaussian(12, 1), w = gaussian(12, 2);
  const double a = 1.7, b = -0.3;
  const Eigen::VectorXd lhs = solver.solve(a * v + b * w).values;
  const Eigen::VectorXd rhs = a * solver.solve(v).values + b * solver.solve(w).values;
  EXPECT_LT((lhs - rhs).norm(), 1e-8 * lhs.norm());
}

TEST(LagrangianBasis, KroneckerExpansionAndShift) {
  const auto d = decompose(build_circle_laplacian(16, 1.0));
  const auto samples = circle_sample_set(16, 2, 0);
  const auto basis = lagrangian_basis(d, 2, samples);
  ASSERT_EQ(basis.size(), 4u);
  for (std::size_t g = 0; g < 4; ++g)
    for (std::size_t b = 0; b < 4; ++b)
      EXPECT_NEAR(basis[g].values[samples.indices[b]], g == b ? 1.0 : 0.0, 1e-12);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(16);
  for (const auto& l : basis) sum += l.values;
  EXPECT_LT((sum - variational_spline(d, 2, samples, Eigen::Vector4d::Ones()).values).norm(), 1e-8);
  // cyclic shift by the stride
  for (std::size_t g = 0; g < 4; ++g)
    for (Eigen::Index i = 0; i < 16; ++i)
      EXPECT_NEAR(basis[g].values[(i + 4 * static_cast<Eigen::Index>(g)) % 16], basis[0].values[i], 1e-8);
  const Eigen::VectorXd v = gaussian(4, 5);
  Eigen::VectorXd expansion = Eigen::VectorXd::Zero(16);
  for (std::size_t g = 0; g < 4; ++g) expansion += v[static_cast<Eigen::Index>(g)] * basis[g].values;
  EXPECT_LE((variational_spline(d, 2, samples, v).values - expansion).norm(), 1e-6 * v.norm());
}

TEST(LagrangianBasis, HeisenbergExpansion) {
  const Grid g(1, 2.0, 2.0, 0.5);
  const auto d = decompose(build_heisenberg_operator(g));
  const auto samples = lattice_sample_set(g, 1, static_cast<Eigen::Index>(g.node_count() / 2));
  const auto basis = lagrangian_basis(d, 1, samples);
  const Eigen::VectorXd v = gaussian(static_cast<Eigen::Index>(samples.size()), 6);
  Eigen::VectorXd expansion = Eigen::VectorXd::Zero(d.dimension());
  for (std::size_t i = 0; i < basis.size(); ++i) expansion += v[static_cast<Eigen::Index>(i)] * basis[i].values;
  EXPECT_LE((variational_spline(d, 1, samples, v).values - expansion).norm(), 1e-6 * v.norm());
}

TEST(VariationalSpline, MonotoneRefinement) {
  const auto d = decompose(build_circle_laplacian(64, 1.0));
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd f = random_pw(d, d.eigenvalues[9], 50 + trial);
    for (int k : {1, 2, 4}) {
      double prev = std::numeric_limits<double>::infinity();
      for (int j = 3; j >= 0; --j) {
        const auto samples = circle_sample_set(64, j, 0);
        const double e = (f - variational_spline(d, k, samples, samples.restrict(f)).values).norm();
        EXPECT_LE(e, prev + 1e-8);
        prev = e;
      }
    }
  }
}

TEST(DeltaSupport, Examples) {
  const auto d = decompose(build_circle_laplacian(8, 1.0));
  const auto full = variational_spline(d, 1, explicit_sample_set(8, {0, 1, 2, 3, 4, 5, 6, 7}), gaussian(8, 1));
  EXPECT_EQ(delta_support_residual(d, full), 0.0);
  auto s = variational_spline(d, 1, explicit_sample_set(8, {0, 4}), Eigen::Vector2d(1.0, 0.0));
  EXPECT_LE(delta_support_residual(d, s), 1e-8);
  s.values[2] += 1e-2;  // bump supported off the samples
  EXPECT_GT(delta_support_residual(d, s), 1e-3);
}

TEST(DeltaSupport, ReferenceSplinesAreStationary) {
  const auto op = build_graph_laplacian(random_graph_edges(30, 0.15, 0.5, 2.0, 12), 30);
  const auto d = decompose(op);
  const auto samples = explicit_sample_set(30, {1, 4, 9, 16, 25});
  for (int k : {1, 2, 4, 8}) {
    const auto s = variational_spline(d, k, samples, gaussian(5, k));
    EXPECT_LE(delta_support_residual(d, s), 1e-6) << k;
    EXPECT_TRUE(alpha_l2_report(s).identity_holds) << k;
  }
}

TEST(IterativePath, AgreesWithReference) {
  const auto op = build_circle_laplacian(64, 1.0);
  const auto d = decompose(op);
  const auto samples = circle_sample_set(64, 2, 0);
  const Eigen::VectorXd v = gaussian(16, 3);
  for (int k : {1, 2, 3}) {
    const auto ref = variational_spline(d, k, samples, v);
    const auto it = variational_spline_iterative(op, k, samples, v);
    EXPECT_EQ(it.path, SplinePath::iterative);
    EXPECT_LE(it.final_residual, 1e-9);
    EXPECT_LT((ref.values - it.values).norm(), 1e-6 * ref.values.norm()) << k;
    EXPECT_LE(delta_support_residual(op, it), 1e-6);
    EXPECT_NEAR(it.objective, ref.objective, 1e-6 * ref.objective);
  }
  EXPECT_THROW(variational_spline_iterative(op, 9, samples, v), DomainError);
}

TEST(IterativePath, HeisenbergAgreesWithReference) {
  const Grid g(1, 2.0, 2.0, 0.5);
  const auto op = build_heisenberg_operator(g);
  const auto d = decompose(op);
  const auto samples = lattice_sample_set(g, 1, static_cast<Eigen::Index>(g.node_count() / 2));
  const Eigen::VectorXd v = gaussian(static_cast<Eigen::Index>(samples.size()), 4);
  const auto ref = variational_spline(d, 1, samples, v);
  const auto it = variational_spline_iterative(op, 1, samples, v);
  EXPECT_LT((ref.values - it.values).norm(), 1e-6 * ref.values.norm());
  const auto flagged = variational_spline(op, 1, samples, v);
  EXPECT_TRUE(flagged.below_norm_equivalence_order);
  EXPECT_FALSE(variational_spline(op, 2, samples, v).below_norm_equivalence_order);
}

TEST(VariationalSpline, Errors) {
  const auto op = two_components();
  const auto d = decompose(op);
  const auto samples = explicit_sample_set(6, {0, 2});
  try {
    variational_spline(d, 1, samples, Eigen::Vector2d(1, 2));
    FAIL() << "expected NonUniquenessError";
  } catch (const NonUniquenessError& e) {
    const Eigen::VectorXd w = e.witness();
    EXPECT_NEAR(w.norm(), 1.0, 1e-12);
    EXPECT_LT(std::abs(w[0]) + std::abs(w[2]), 1e-8);
    EXPECT_LT(op.apply(w).norm(), 1e-8);
  }
  EXPECT_THROW(variational_spline_iterative(op, 1, samples, Eigen::Vector2d(1, 2)), NonUniquenessError);
  SplineOptions ridge;
  ridge.ridge = 1e-12;
  EXPECT_NO_THROW(variational_spline(d, 1, samples, Eigen::Vector2d(1, 2), ridge));
  EXPECT_THROW(variational_spline(d, 0, samples, Eigen::Vector2d(1, 2)), DomainError);
  EXPECT_THROW(variational_spline(d, 65, samples, Eigen::Vector2d(1, 2)), DomainError);
  const auto dc = decompose(build_circle_laplacian(6, 1.0));
  EXPECT_THROW(variational_spline(dc, 1, samples, Eigen::Vector3d(1, 2, 3)), DimensionError);
  EXPECT_THROW(variational_spline(dc, 1, samples, Eigen::Vector2d(1, std::nan(""))), DomainError);
  EXPECT_THROW(variational_spline(dc, 1, explicit_sample_set(6, {}), Eigen::VectorXd(0)), NonUniquenessError);
}

TEST(SplineErrorRatio, Examples) {
  const auto d = decompose(build_circle_laplacian(32, 1.0));
  const auto samples = circle_sample_set(32, 2, 0);
  const auto s = variational_spline(d, 2, samples, gaussian(8, 1));
  const auto t = spline_error_ratio(d, s.values, samples, 2);
  EXPECT_LT(t.rho, 1e-6);
  EXPECT_FALSE(t.exact_reproduction);
  const auto c = spline_error_ratio(d, Eigen::VectorXd::Constant(32, 3.0), samples, 4);
  EXPECT_TRUE(c.exact_reproduction);
  EXPECT_EQ(c.rho, 0.0);
  const Eigen::VectorXd f = random_pw(d, d.eigenvalues[5], 2);
  for (int k : {4, 8, 16}) {
    const auto r = spline_error_ratio(d, f, samples, k);
    EXPECT_GT(r.rho, 0.0);
    EXPECT_LT(r.rho, 1.0);
  }
}

TEST(Reconstruct, FullSamplingAndAliasing) {
  const auto d = decompose(build_circle_laplacian(64, 1.0));
  const Eigen::VectorXd f = random_pw(d, d.eigenvalues[29], 8);
  const auto full = reconstruct(d, f, circle_sample_set(64, 0, 0), {1, 2, 4});
  for (double e : full.errors) EXPECT_EQ(e, 0.0);
  EXPECT_EQ(full.verdict, Verdict::converged);
  const auto coarse = reconstruct(d, f, circle_sample_set(64, 2, 0), {1, 2, 4, 8});
  EXPECT_EQ(coarse.verdict, Verdict::aliased);
  EXPECT_LT(coarse.rank, coarse.dim_pw);
  for (double e : coarse.errors) EXPECT_GT(e, 1e-2);
  EXPECT_EQ(coarse.schedule.size(), 4u);
  EXPECT_THROW(reconstruct(d, f, circle_sample_set(64, 0, 0), {2, 1}), DomainError);
  EXPECT_THROW(reconstruct(d, Eigen::VectorXd::Zero(64), circle_sample_set(64, 0, 0), {1}), DomainError);
}

TEST(Reconstruct, OversampledTargetConverges) {
  const auto d = decompose(build_circle_laplacian(128, 1.0));
  const Eigen::VectorXd f = random_pw(d, d.eigenvalues[14], 3);
  const auto r = reconstruct(d, f, circle_sample_set(128, 2, 0), {1, 2, 4, 8});
  EXPECT_EQ(r.verdict, Verdict::converged);
  EXPECT_GE(r.sigma_min, 1e-3);
}

TEST(Reconstruct, VerdictRules) {
  EXPECT_EQ(convergence_verdict({1.0, 0.1, 0.005}, 1e-2, 1e-11), Verdict::converged);
  EXPECT_EQ(convergence_verdict({1.0, 0.1, 0.02}, 1e-2, 1e-11), Verdict::stalled);
  EXPECT_EQ(convergence_verdict({1.0, 0.1, 0.2, 1e-3}, 1e-2, 1e-11), Verdict::stalled);
  EXPECT_EQ(convergence_verdict({1e-13, 2e-13}, 1e-2, 1e-11), Verdict::converged);
  EXPECT_EQ(convergence_verdict({}, 1e-2, 1e-11), Verdict::failed);
}

TEST(IterativePath, KernelWitness) {
  const auto op = two_components();
  try {
    variational_spline_iterative(op, 2, explicit_sample_set(6, {1}), Eigen::VectorXd::Ones(1));
    FAIL() << "expected NonUniquenessError";
  } catch (const NonUniquenessError& e) {
    const Eigen::VectorXd w = e.witness();
    EXPECT_NEAR(w.norm(), 1.0, 1e-12);
    EXPECT_LT(std::abs(w[1]), 1e-12);
    EXPECT_LT(op.apply(w).norm(), 1e-10);
  }
  EXPECT_NO_THROW(variational_spline_iterative(op, 2, explicit_sample_set(6, {1, 4}), Eigen::Vector2d(1, 2)));
}
