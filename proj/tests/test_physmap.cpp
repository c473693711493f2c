#include "tpss/physmap.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <thread>

using namespace tpss;

namespace {

const TPSSOperator<2> &op2()
{
  static const auto op = assemble<2>(Family::lgl, 4);
  return op;
}

const TPSSOperator<3> &op3()
{
  static const auto op = assemble<3>(Family::lgl, 5);
  return op;
}

double diff(const SparseMatrix &a, const SparseMatrix &b) { return max_abs(SparseMatrix(a - b)); }

} // namespace

TEST(Physmap, IdentityMap)
{
  const auto el = build_element_operators<2>(op2(), reference_simplex_vertices<2>());
  EXPECT_NEAR(el.geometry.Jdet, 1.0, 1e-15);
  EXPECT_LT((el.H - op2().H).cwiseAbs().maxCoeff(), 1e-15);
  for (int i = 0; i < 2; ++i)
    EXPECT_LT(diff(el.D[i], op2().D[i]), 1e-13);
}

TEST(Physmap, UniformScaling)
{
  const double h = 0.125;
  auto v = reference_simplex_vertices<3>();
  for (auto &x : v)
    for (auto &c : x)
      c *= h;
  const auto el = build_element_operators<3>(op3(), v);
  EXPECT_LT((el.H - h * h * h * op3().H).cwiseAbs().maxCoeff(), 1e-15);
  for (int i = 0; i < 3; ++i)
    EXPECT_LT(diff(el.D[i], SparseMatrix(op3().D[i] / h)), 1e-10);
}

TEST(Physmap, RightTriangleArea)
{
  const auto el = build_element_operators<2>(op2(), {{{0, 0}, {1, 0}, {0, 1}}});
  EXPECT_NEAR(el.H.sum(), 0.5, 1e-14);
}

TEST(Physmap, InvertedElementRejected)
{
  try {
    build_element_operators<2>(op2(), {{{0, 0}, {0, 1}, {1, 0}}}, 17);
    FAIL() << "expected a geometry error";
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::geometry);
    EXPECT_NE(std::string(e.what()).find("17"), std::string::npos);
  }
}

TEST(Physmap, InvariantsOnSkewedElements)
{
  const auto el2 = build_element_operators<2>(op2(), {{{0.1, 0.2}, {0.9, 0.35}, {0.3, 0.7}}});
  EXPECT_TRUE(verify_element(el2).passed());
  const auto el3 = build_element_operators<3>(op3(), {{{0, 0, 0}, {1, 0.1, 0}, {0.2, 0.8, 0.1}, {0.3, 0.1, 0.6}}});
  EXPECT_TRUE(verify_element(el3).passed());
}

TEST(Physmap, ExactOnPhysicalMonomials)
{
  const std::array<Point<3>, 4> v{{{0, 0, 0}, {1, 0.1, 0}, {0.2, 0.8, 0.1}, {0.3, 0.1, 0.6}}};
  const auto el = build_element_operators<3>(op3(), v);
  const int p = op3().p;
  for (int q = 0; q <= p; ++q)
    for (const auto &a : monomials_of_degree<3>(q)) {
      Vector u(el.H.size());
      for (Eigen::Index m = 0; m < u.size(); ++m)
        u(m) = monomial<3>(el.nodes[m], a);
      for (int i = 0; i < 3; ++i) {
        const Vector du = el.D[i] * u;
        for (Eigen::Index m = 0; m < u.size(); ++m)
          EXPECT_NEAR(du(m), monomial_derivative<3>(el.nodes[m], a, i), 1e-9);
      }
    }
}

TEST(Physmap, RotationCovariance)
{
  const std::array<Point<2>, 3> v{{{0.1, 0.2}, {0.9, 0.35}, {0.3, 0.7}}};
  const double th = 0.7;
  const double R[2][2] = {{std::cos(th), -std::sin(th)}, {std::sin(th), std::cos(th)}};
  std::array<Point<2>, 3> w{};
  for (int a = 0; a < 3; ++a)
    for (int i = 0; i < 2; ++i)
      w[a][i] = R[i][0] * v[a][0] + R[i][1] * v[a][1];
  const auto e1 = build_element_operators<2>(op2(), v);
  const auto e2 = build_element_operators<2>(op2(), w);
  for (int i = 0; i < 2; ++i) {
    const SparseMatrix rotated = R[i][0] * e1.D[0] + R[i][1] * e1.D[1];
    EXPECT_LT(diff(e2.D[i], rotated), 1e-12);
  }
}

TEST(Physmap, ClosedBoundary)
{
  const auto el = build_element_operators<2>(op2(), {{{0, 0}, {2, 0.5}, {0.4, 1.5}}});
  for (int i = 0; i < 2; ++i) {
    const Vector ones = Vector::Ones(el.H.size());
    EXPECT_NEAR(ones.dot(SparseMatrix(el.Q[i] + SparseMatrix(el.Q[i].transpose())) * ones), 0.0, 1e-12);
    EXPECT_NEAR(el.E[i].diagonal().sum(), 0.0, 1e-12);
  }
}

TEST(Physmap, ScaledNormalsMatchEdges)
{
  const std::array<Point<2>, 3> v{{{0, 0}, {2, 0}, {0, 1}}};
  const auto g = affine_geometry<2>(v);
  // Facet 1 (opposite vertex 0) is the hypotenuse; its reference length is 2 sqrt(2).
  const auto n = g.scaled_normal(1);
  const double len = std::hypot(n[0], n[1]) * 2.0 * std::sqrt(2.0);
  EXPECT_NEAR(len, std::sqrt(5.0), 1e-14);
  EXPECT_GT(n[0], 0.0);
  EXPECT_GT(n[1], 0.0);
}

TEST(PhysmapCache, TranslatesShareOneEntry)
{
  auto op = std::make_shared<const TPSSOperator<2>>(op2());
  ElementOperatorCache<2> cache(op);
  const auto a = cache.get({{{0, 0}, {0.25, 0}, {0.25, 0.25}}});
  const auto b = cache.get({{{0.5, 0.75}, {0.75, 0.75}, {0.75, 1.0}}});
  const auto c = cache.get({{{0, 0}, {0.25, 0.25}, {0, 0.25}}});
  EXPECT_EQ(a.get(), b.get());
  EXPECT_NE(a.get(), c.get());
  EXPECT_EQ(cache.size(), 2u);
}

TEST(PhysmapCache, ConcurrentLookups)
{
  auto op = std::make_shared<const TPSSOperator<2>>(op2());
  ElementOperatorCache<2> cache(op);
  std::vector<std::thread> pool;
  std::vector<const ElementOperators<2> *> seen(8);
  for (int t = 0; t < 8; ++t)
    pool.emplace_back([&, t] {
      for (int rep = 0; rep < 20; ++rep) {
        const double s = 0.1 * (rep % 4);
        seen[t] = cache.get({{{s, s}, {s + 0.5, s}, {s + 0.5, s + 0.5}}}).get();
      }
    });
  for (auto &th : pool)
    th.join();
  EXPECT_EQ(cache.size(), 1u);
  for (auto *p : seen)
    EXPECT_EQ(p, seen[0]);
}
