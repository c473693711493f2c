#include "tpss/split.hpp"

#include <gtest/gtest.h>

using namespace tpss;

TEST(Split, TriangleSubdomainTwo)
{
  const auto subs = split_vertices<2>();
  ASSERT_EQ(subs.size(), 3u);
  const auto &s = subs[1];
  EXPECT_EQ(s.ell, 2);
  const std::array<Point<2>, 4> expected{{{0, -1}, {1, -1}, {0, 0}, {-1.0 / 3, -1.0 / 3}}};
  for (int a = 0; a < 4; ++a)
    for (int i = 0; i < 2; ++i)
      EXPECT_NEAR(s.vertices[a][i], expected[a][i], 1e-15);
}

TEST(Split, EachPieceContainsItsVertex)
{
  const auto V3 = reference_simplex_vertices<3>();
  for (const auto &s : split_vertices<3>())
    for (int i = 0; i < 3; ++i)
      EXPECT_EQ(s.vertices[0][i], V3[s.ell - 1][i]);
}

template <int Dim>
void check_cover(int n1)
{
  const auto t = tensor_product<Dim>(build_lgl_operator(n1));
  double total = 0.0;
  for (const auto &g : split_vertices<Dim>()) {
    const auto m = jacobian_and_metrics<Dim>(g, t);
    EXPECT_GT(m.Jdet.minCoeff(), 0.0);
    total += t.H.dot(m.Jdet);
  }
  EXPECT_NEAR(total, reference_simplex_measure<Dim>(), 1e-13);
}

TEST(Split, PiecesTileTheSimplex)
{
  check_cover<2>(2);
  check_cover<2>(4);
  check_cover<3>(3);
  check_cover<3>(4);
}

TEST(Split, MapHitsCorners)
{
  const auto signs = corner_signs<3>();
  for (const auto &g : split_vertices<3>())
    for (int a = 0; a < 8; ++a) {
      Point<3> eta{};
      for (int k = 0; k < 3; ++k)
        eta[k] = signs[a][k];
      const auto x = map_point<3>(g, eta);
      for (int i = 0; i < 3; ++i)
        EXPECT_NEAR(x[i], g.vertices[a][i], 1e-15);
    }
}

TEST(Split, ShapeFunctionsPartitionUnity)
{
  const Point<3> eta{0.3, -0.7, 0.1};
  const auto psi = shape_functions<3>(eta);
  double s = 0.0;
  for (double v : psi)
    s += v;
  EXPECT_NEAR(s, 1.0, 1e-15);
  const auto g = shape_gradients<3>(eta);
  for (int j = 0; j < 3; ++j) {
    double d = 0.0;
    for (const auto &row : g)
      d += row[j];
    EXPECT_NEAR(d, 0.0, 1e-15);
  }
}

TEST(Split, CofactorsInvertJacobian)
{
  const auto g = split_vertices<3>()[2];
  const Point<3> eta{0.2, 0.5, -0.4};
  const auto J = jacobian<3>(g, eta);
  const auto C = cofactors<3>(J);
  const double det = determinant<3>(J);
  // sum_k J[i][k] C[j][k] = det delta_ij
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k)
        s += J[i][k] * C[j][k];
      EXPECT_NEAR(s, i == j ? det : 0.0, 1e-14);
    }
}

TEST(Split, JacobianAgainstFiniteDifference)
{
  const auto g = split_vertices<2>()[0];
  const Point<2> eta{0.1, -0.3};
  const auto J = jacobian<2>(g, eta);
  const double h = 1e-6;
  for (int j = 0; j < 2; ++j) {
    auto ep = eta, em = eta;
    ep[j] += h;
    em[j] -= h;
    const auto xp = map_point<2>(g, ep), xm = map_point<2>(g, em);
    for (int i = 0; i < 2; ++i)
      EXPECT_NEAR(J[i][j], (xp[i] - xm[i]) / (2 * h), 1e-9);
  }
}

template <int Dim>
void check_metric_identity(int n1)
{
  const auto t = tensor_product<Dim>(build_lgl_operator(n1));
  for (const auto &g : split_vertices<Dim>())
    EXPECT_LE(metric_identity_residual<Dim>(jacobian_and_metrics<Dim>(g, t), t), 1e-12) << Dim << " " << n1;
}

TEST(Split, DiscreteMetricIdentity)
{
  for (int n1 = 2; n1 <= 6; ++n1)
    check_metric_identity<2>(n1);
  for (int n1 = 3; n1 <= 6; ++n1)
    check_metric_identity<3>(n1);
  const auto t = tensor_product<2>(build_csbp_operator(8));
  for (const auto &g : split_vertices<2>())
    EXPECT_LE(metric_identity_residual<2>(jacobian_and_metrics<2>(g, t), t), 1e-12);
}

TEST(Split, InvertedPieceRejected)
{
  auto g = split_vertices<2>()[0];
  std::swap(g.vertices[1], g.vertices[3]);
  const auto t = tensor_product<2>(build_lgl_operator(2));
  EXPECT_THROW(jacobian_and_metrics<2>(g, t), Error);
}
