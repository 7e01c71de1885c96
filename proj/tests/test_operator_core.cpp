#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>

#include "pwsampling/grid.hpp"
#include "pwsampling/heisenberg.hpp"
#include "pwsampling/operator.hpp"
#include "pwsampling/sample_set.hpp"
#include "pwsampling/spectral.hpp"

using namespace pws;
using cd = std::complex<double>;

namespace {

GroupPoint random_point(std::mt19937_64& rng, std::size_t m) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  GroupPoint g = GroupPoint::identity(m);
  g.t = u(rng);
  for (auto& z : g.z) z = cd(u(rng), u(rng));
  return g;
}

double distance(const GroupPoint& a, const GroupPoint& b) {
  double d = std::abs(a.t - b.t);
  for (std::size_t k = 0; k < a.m(); ++k) d = std::max(d, std::abs(a.z[k] - b.z[k]));
  return d;
}

}  // namespace

TEST(Group, ComposeExample) {
  const GroupPoint a(0.0, {cd(1, 0)}), b(0.0, {cd(0, 1)});
  const auto c = heisenberg_compose(a, b);
  // 2 Im(1 * conj(i)) = -2
  EXPECT_DOUBLE_EQ(c.t, -2.0);
  EXPECT_EQ(c.z[0], cd(1, 1));
}

TEST(Group, IdentityInverseAssociativity) {
  std::mt19937_64 rng(3);
  for (std::size_t m : {1u, 2u, 3u}) {
    for (int trial = 0; trial < 50; ++trial) {
      const auto a = random_point(rng, m), b = random_point(rng, m), c = random_point(rng, m);
      const auto e = GroupPoint::identity(m);
      EXPECT_LT(distance(heisenberg_compose(a, e), a), 1e-15);
      EXPECT_LT(distance(heisenberg_compose(e, a), a), 1e-15);
      EXPECT_LT(distance(heisenberg_compose(a, heisenberg_inverse(a)), e), 1e-14);
      EXPECT_LT(distance(heisenberg_compose(heisenberg_inverse(a), a), e), 1e-14);
      EXPECT_LT(distance(heisenberg_compose(heisenberg_compose(a, b), c),
                         heisenberg_compose(a, heisenberg_compose(b, c))),
                1e-12);
    }
  }
}

TEST(Group, DilationsAreAutomorphismsAndNormIsHomogeneous) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_point(rng, 2), b = random_point(rng, 2);
    for (double s : {0.25, 0.5, 2.0, 3.0}) {
      EXPECT_LT(distance(dilate(s, heisenberg_compose(a, b)), heisenberg_compose(dilate(s, a), dilate(s, b))), 1e-12);
      EXPECT_NEAR(homogeneous_norm(dilate(s, a)), s * homogeneous_norm(a), 1e-12 * s * homogeneous_norm(a));
    }
    EXPECT_NEAR(homogeneous_norm(heisenberg_inverse(a)), homogeneous_norm(a), 1e-14);
  }
}

TEST(Group, Errors) {
  EXPECT_THROW(heisenberg_compose(GroupPoint::identity(1), GroupPoint::identity(2)), DimensionError);
  EXPECT_THROW(dilate(0.0, GroupPoint::identity(1)), DomainError);
  EXPECT_THROW(dilate(-1.0, GroupPoint::identity(1)), DomainError);
  EXPECT_EQ(homogeneous_dimension(1), 4);
  EXPECT_EQ(homogeneous_dimension(3), 8);
  EXPECT_DOUBLE_EQ(homogeneous_norm(GroupPoint(16.0, {cd(0, 0)})), 4.0);
}

TEST(Grid, LayoutAndCoordinates) {
  const Grid g(1, 0.25, 0.5, 0.125);
  EXPECT_EQ(g.spatial_steps(), 5);
  EXPECT_EQ(g.t_steps(), 17);  // t spacing h^2 = 1/64
  EXPECT_EQ(g.node_count(), 17u * 25u);
  for (std::size_t node = 0; node < g.node_count(); node += 7) EXPECT_EQ(g.index(g.multi_index(node)), node);
  EXPECT_DOUBLE_EQ(g.coordinate(0, 0), -0.125);
  EXPECT_DOUBLE_EQ(g.coordinate(1, 4), 0.25);
  EXPECT_EQ(g.axis_stride(0), 25u);
  EXPECT_EQ(g.axis_stride(2), 1u);
}

TEST(Grid, Errors) {
  EXPECT_THROW(Grid(0, 1.0, 1.0, 0.5), DomainError);
  EXPECT_THROW(Grid(1, 1.0, 1.0, 0.3), DomainError);
  EXPECT_THROW(Grid(1, 1.0, 1.0, -0.5), DomainError);
  try {
    Grid(2, 1.0, 4.0, 0.125, 1000);
    FAIL() << "expected ResourceError";
  } catch (const ResourceError& e) {
    EXPECT_EQ(e.cap(), 1000);
    EXPECT_GT(e.requested(), 1000);
  }
}

TEST(VectorFields, DriftVanishesOnZeroLine) {
  const Grid g(1, 1.0, 2.0, 0.5);
  const auto fields = build_vector_fields(g);
  ASSERT_EQ(fields.size(), 2u);
  for (std::size_t node = 0; node < g.node_count(); ++node) {
    const auto mi = g.multi_index(node);
    if (g.coordinate(2, mi[2]) != 0.0) continue;
    // only x-neighbours, with weights +-1/(2h)
    for (RowSparseMatrix::InnerIterator it(fields[0], static_cast<Eigen::Index>(node)); it; ++it) {
      const auto nb = g.multi_index(static_cast<std::size_t>(it.col()));
      EXPECT_EQ(nb[0], mi[0]);
      EXPECT_EQ(nb[2], mi[2]);
      EXPECT_EQ(std::abs(nb[1] - mi[1]), 1);
      EXPECT_DOUBLE_EQ(std::abs(it.value()), 1.0);
    }
  }
}

namespace {

// Max error of (X1 X2 - X2 X1) f + 4 df/dt over nodes near the origin.
double commutator_error(double h, const std::function<double(double, double, double)>& f,
                        const std::function<double(double, double, double)>& ft) {
  const Grid g(1, 0.25, 0.5, h);
  const auto x = build_vector_fields(g);
  Eigen::VectorXd v(static_cast<Eigen::Index>(g.node_count()));
  for (std::size_t node = 0; node < g.node_count(); ++node) {
    const auto c = g.coordinates(node);
    v[static_cast<Eigen::Index>(node)] = f(c[0], c[1], c[2]);
  }
  const Eigen::VectorXd comm = x[0] * (x[1] * v) - x[1] * (x[0] * v);
  double err = 0.0;
  for (std::size_t node = 0; node < g.node_count(); ++node) {
    const auto c = g.coordinates(node);
    if (std::abs(c[1]) > 0.125 + 1e-12 || std::abs(c[2]) > 0.125 + 1e-12 || std::abs(c[0]) > 0.0625 + 1e-12) continue;
    err = std::max(err, std::abs(comm[static_cast<Eigen::Index>(node)] + 4.0 * ft(c[0], c[1], c[2])));
  }
  return err;
}

}  // namespace

TEST(VectorFields, CommutatorOnLinearFunctionOfT) {
  // f = t: the continuum commutator gives -4; the stencil reproduces it exactly
  for (double h : {0.125, 0.0625}) {
    const double err = commutator_error(h, [](double t, double, double) { return t; },
                                        [](double, double, double) { return 1.0; });
    EXPECT_LT(err, 1e-10) << "h=" << h;
  }
}

TEST(VectorFields, CommutatorSecondOrder) {
  auto f = [](double t, double x, double y) { return std::sin(x + 2 * y + t); };
  auto ft = [](double t, double x, double y) { return std::cos(x + 2 * y + t); };
  const double e1 = commutator_error(0.125, f, ft), e2 = commutator_error(0.0625, f, ft),
               e3 = commutator_error(0.03125, f, ft);
  EXPECT_GE(std::log2(e1 / e2), 1.8);
  EXPECT_GE(std::log2(e2 / e3), 1.8);
}

TEST(SubLaplacian, ExactlySymmetricAndSemidefinite) {
  for (int m : {1, 2}) {
    const Grid g(m, m == 1 ? 8.0 : 2.0, m == 1 ? 8.0 : 2.0, 1.0);
    const auto d = build_heisenberg_operator(g);
    EXPECT_TRUE(d.is_symmetric());
    EXPECT_EQ(d.symmetry_defect(), 0.0);
    const auto dec = decompose(d);
    EXPECT_GE(dec.eigenvalues[0], -1e-10 * dec.lambda_max);
  }
}

TEST(SubLaplacian, QuadraticFormOnZeroSliceMatchesRingLaplacian) {
  // f(t, x, y) = g(x) on the y = 0 line, constant in t, with g supported on
  // even x-indices and zero at both ends. On the y = 0 rows X_1 is the
  // central difference in x, whose squared sum is the second-difference
  // form with spacing 2h on the even sublattice.
  const double h = 0.5;
  const Grid g(1, 2.0, 4.0, h);  // 9 spatial points, 9 t points
  const auto x = build_vector_fields(g);
  const int ns = g.spatial_steps();
  const int ring = (ns + 1) / 2;
  Eigen::VectorXd gv = Eigen::VectorXd::Zero(ring);
  for (int i = 1; i + 1 < ring; ++i) gv[i] = std::sin(0.7 * i) + 0.3 * i;
  Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.node_count()));
  const int y0 = ns / 2;
  for (int it = 0; it < g.t_steps(); ++it)
    for (int i = 0; i < ring; ++i) f[static_cast<Eigen::Index>(g.index({it, 2 * i, y0}))] = gv[i];
  const Eigen::VectorXd x1f = x[0] * f;
  double lhs = 0.0;
  for (std::size_t node = 0; node < g.node_count(); ++node)
    if (g.multi_index(node)[2] == y0) lhs += x1f[static_cast<Eigen::Index>(node)] * x1f[static_cast<Eigen::Index>(node)];
  const auto lring = build_circle_laplacian(ring, 2 * h);
  const double rhs = g.t_steps() * gv.dot(lring.apply(gv));
  EXPECT_NEAR(lhs, rhs, 1e-12 * rhs);
}

TEST(Circle, ClosedFormSpectrumAndStencil) {
  const auto op = build_circle_laplacian(8, 1.0);
  EXPECT_EQ(op.nonzeros(), 24);
  EXPECT_TRUE(op.is_symmetric());
  const auto d = decompose(op);
  std::vector<double> expected;
  for (int q = 0; q < 8; ++q) expected.push_back(2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * q / 8));
  std::sort(expected.begin(), expected.end());
  for (int q = 0; q < 8; ++q) EXPECT_NEAR(d.eigenvalues[q], expected[q], 1e-12);
  const auto op2 = build_circle_laplacian(16, 0.5);
  const auto d2 = decompose(op2);
  EXPECT_NEAR(d2.lambda_max, 16.0, 1e-12);
  EXPECT_THROW(build_circle_laplacian(2, 1.0), DomainError);
  EXPECT_THROW(build_circle_laplacian(8, 0.0), DomainError);
}

TEST(Graph, LaplacianProperties) {
  const auto edges = random_graph_edges(30, 0.2, 0.5, 2.0, 9);
  const auto op = build_graph_laplacian(edges, 30);
  EXPECT_TRUE(op.is_symmetric());
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(30);
  EXPECT_LT(op.apply(ones).cwiseAbs().maxCoeff(), 1e-13);
  const auto d = decompose(op);
  EXPECT_GE(d.eigenvalues[0], -1e-12 * d.lambda_max);
  EXPECT_EQ(d.kernel_dimension(), 1);  // ring backbone keeps it connected
  EXPECT_THROW(build_graph_laplacian({{0, 0, 1.0}}), DomainError);
  EXPECT_THROW(build_graph_laplacian({{0, 1, -1.0}}), DomainError);
  EXPECT_THROW(build_graph_laplacian({{0, 5, 1.0}}, 3), DimensionError);
}

TEST(Operator, FingerprintTracksContents) {
  const auto a = build_circle_laplacian(10, 1.0), b = build_circle_laplacian(10, 1.0),
             c = build_circle_laplacian(10, 0.5);
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  EXPECT_NE(a.fingerprint(), c.fingerprint());
}

TEST(Operator, PowersAndGershgorin) {
  const auto op = build_circle_laplacian(12, 1.0);
  EXPECT_DOUBLE_EQ(op.gershgorin_bound(), 4.0);
  Eigen::VectorXd f = Eigen::VectorXd::LinSpaced(12, -1.0, 2.0);
  const Eigen::VectorXd p3 = apply_power(op, 3, f);
  EXPECT_LT((p3 - op.apply(op.apply(op.apply(f)))).norm(), 1e-12);
  EXPECT_LT((apply_power_scaled(op, 3, f, 4.0) * 64.0 - p3).norm(), 1e-12);
  EXPECT_THROW(apply_power(op, -1, f), DomainError);
}

TEST(SampleSets, LatticesAndExplicitSets) {
  const Grid g(1, 8.0, 8.0, 1.0);
  const auto center = static_cast<Eigen::Index>(g.index({4, 4, 4}));
  const auto s0 = lattice_sample_set(g, 0, center);
  EXPECT_TRUE(s0.is_full());
  const auto s1 = lattice_sample_set(g, 1, center);
  EXPECT_EQ(s1.size(), 3u * 5u * 5u);  // t stride 4, spatial stride 2
  EXPECT_EQ(s1.t_stride, 4);
  EXPECT_TRUE(s1.contains(center));
  const auto c = circle_sample_set(16, 2, 1);
  EXPECT_EQ(c.indices, (std::vector<Eigen::Index>{1, 5, 9, 13}));
  EXPECT_EQ(c.free_indices().size(), 12u);
  EXPECT_THROW(circle_sample_set(16, -1, 0), DomainError);  // stride 1/2
  EXPECT_THROW(explicit_sample_set(5, {1, 1}), DomainError);
  EXPECT_THROW(explicit_sample_set(5, {7}), DimensionError);
}

TEST(Group, DirectEvaluations) {
  const auto c = heisenberg_compose(GroupPoint(1.0, {cd(1, 0)}), GroupPoint(0.0, {cd(0, 1)}));
  EXPECT_DOUBLE_EQ(c.t, -1.0);
  EXPECT_EQ(c.z[0], cd(1, 1));
  const auto d = dilate(2.0, GroupPoint(1.0, {cd(1, 0)}));
  EXPECT_DOUBLE_EQ(d.t, 4.0);
  EXPECT_EQ(d.z[0], cd(2, 0));
  EXPECT_NEAR(homogeneous_norm(GroupPoint(1.0, {cd(1, 1)})), std::pow(5.0, 0.25), 1e-15);
  EXPECT_EQ(homogeneous_norm(GroupPoint::identity(2)), 0.0);
}

TEST(VectorFields, ConstantsAnnihilatedInInterior) {
  const Grid g(1, 2.0, 4.0, 0.5);
  const auto x = build_vector_fields(g);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(g.node_count()));
  for (const auto& xk : x) {
    const Eigen::VectorXd r = xk * ones;
    for (std::size_t node = 0; node < g.node_count(); ++node) {
      const auto mi = g.multi_index(node);
      bool interior = true;
      for (int a = 0; a < g.axis_count(); ++a) interior = interior && mi[a] > 0 && mi[a] + 1 < g.axis_size(a);
      if (interior) {
        EXPECT_NEAR(r[static_cast<Eigen::Index>(node)], 0.0, 1e-12);
      }
    }
  }
}

TEST(SubLaplacian, QuadraticFormIsSumOfSquares) {
  const Grid g(1, 2.0, 4.0, 0.5);
  const auto x = build_vector_fields(g);
  const auto d = build_sublaplacian(x);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd f(d.dimension());
    for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = normal(rng);
    double sum = 0.0;
    for (const auto& xk : x) sum += (xk * f).squaredNorm();
    EXPECT_NEAR(f.dot(d.apply(f)), sum, 1e-12 * sum);
  }
}

TEST(Graph, SmallExamples) {
  const auto e = build_graph_laplacian({{0, 1, 1.0}});
  EXPECT_EQ(e.dense(), (Eigen::Matrix2d() << 1, -1, -1, 1).finished());
  const auto tri = decompose(build_graph_laplacian({{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 1.0}}));
  EXPECT_NEAR(tri.eigenvalues[0], 0.0, 1e-14);
  EXPECT_NEAR(tri.eigenvalues[1], 3.0, 1e-14);
  EXPECT_NEAR(tri.eigenvalues[2], 3.0, 1e-14);
}

TEST(Circle, FourierModesDiagonalize) {
  const int n = 12;
  const auto op = build_circle_laplacian(n, 1.0);
  for (int q = 0; q < n; ++q) {
    Eigen::VectorXd c(n), s(n);
    for (int i = 0; i < n; ++i) {
      c[i] = std::cos(2.0 * std::numbers::pi * q * i / n);
      s[i] = std::sin(2.0 * std::numbers::pi * q * i / n);
    }
    const double lam = 2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * q / n);
    EXPECT_LT((op.apply(c) - lam * c).norm(), 1e-12);
    EXPECT_LT((op.apply(s) - lam * s).norm(), 1e-12);
  }
}

TEST(SampleSets, NestedLevels) {
  const Grid g(1, 16.0, 8.0, 1.0);
  const auto anchor = static_cast<Eigen::Index>(g.index({8, 4, 4}));
  for (int j = 1; j <= 2; ++j) {
    const auto coarse = lattice_sample_set(g, j, anchor), fine = lattice_sample_set(g, j - 1, anchor);
    for (auto i : coarse.indices) EXPECT_TRUE(fine.contains(i));
    EXPECT_LT(coarse.size(), fine.size());
  }
  EXPECT_EQ(circle_sample_set(8, 1, 0).indices, (std::vector<Eigen::Index>{0, 2, 4, 6}));
}
