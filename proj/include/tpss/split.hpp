#pragma once

#include "tpss/common.hpp"
#include "tpss/tensor.hpp"

#include <string>

namespace tpss {

/// Vertices of the standard right reference simplex, {xi : xi_k >= -1, sum xi_k <= 2 - Dim}.
template <int Dim>
std::array<Point<Dim>, Dim + 1> reference_simplex_vertices()
{
  std::array<Point<Dim>, Dim + 1> v{};
  for (int a = 0; a <= Dim; ++a) {
    v[a].fill(-1.0);
    if (a > 0)
      v[a][a - 1] = 1.0;
  }
  return v;
}

/// Measure of the reference simplex: 2 (triangle) or 4/3 (tetrahedron).
template <int Dim>
constexpr double reference_simplex_measure()
{
  return Dim == 2 ? 2.0 : 4.0 / 3.0;
}

/// Barycentric coordinates of xi in the reference simplex; entry a pairs with vertex a.
template <int Dim>
std::array<double, Dim + 1> reference_barycentric(const Point<Dim> &xi)
{
  std::array<double, Dim + 1> lam{};
  double rest = 1.0;
  for (int k = 0; k < Dim; ++k) {
    lam[k + 1] = 0.5 * (xi[k] + 1.0);
    rest -= lam[k + 1];
  }
  lam[0] = rest;
  return lam;
}

/// Sign pattern of each bilinear/trilinear corner in shape-function order:
/// entry [alpha][k] is the value of eta_k at vertex alpha.
template <int Dim>
constexpr std::array<std::array<int, Dim>, (1 << Dim)> corner_signs()
{
  if constexpr (Dim == 2) {
    return {{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}};
  } else {
    return {{{-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1}, {-1, 1, 1}, {-1, -1, 1}, {1, -1, 1}, {1, 1, 1}}};
  }
}

/// A quadrilateral/hexahedral piece of the split reference simplex.
///
/// `vertices[alpha]` is the image of the corner of [-1,1]^Dim with signs
/// corner_signs()[alpha]. Subdomain ell (1-based) is the piece containing
/// simplex vertex ell.
template <int Dim>
struct SubdomainGeometry {
  int ell = 0;
  std::array<Point<Dim>, (1 << Dim)> vertices{};
};

/// Geometric data of a subdomain evaluated at the tensor nodes.
/// `Lambda[j][i]` holds |J| d eta_j / d xi_i at every node.
template <int Dim>
struct SubdomainMetrics {
  std::vector<Point<Dim>> xi;
  Vector Jdet;
  std::array<std::array<Vector, Dim>, Dim> Lambda;
};

namespace detail {

template <int Dim>
Point<Dim> midpoint(const std::vector<Point<Dim>> &pts)
{
  Point<Dim> c{};
  for (const auto &p : pts)
    for (int k = 0; k < Dim; ++k)
      c[k] += p[k] / static_cast<double>(pts.size());
  return c;
}

inline double det3(const Point<3> &a, const Point<3> &b, const Point<3> &c)
{
  return a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0]);
}

} // namespace detail

/// Splits the reference triangle into 3 quads (centroid joined to edge
/// midpoints) or the tetrahedron into 4 hexes (edge midpoints, facet
/// centroids, and the centroid).
///
/// Triangle piece ell: [mid(prev, v), v, mid(v, next), centroid] with the
/// simplex vertices taken counter-clockwise. Tetrahedron piece ell puts v at
/// corner (-,-,-), the midpoints towards a, b, c on the eta_1, eta_2, eta_3
/// axes, with (a, b, c) ordered right-handed.
template <int Dim>
std::vector<SubdomainGeometry<Dim>> split_vertices()
{
  const auto V = reference_simplex_vertices<Dim>();
  std::vector<Point<Dim>> all(V.begin(), V.end());
  const auto centroid = detail::midpoint<Dim>(all);
  std::vector<SubdomainGeometry<Dim>> subs(Dim + 1);

  if constexpr (Dim == 2) {
    for (int l = 0; l < 3; ++l) {
      const auto &v = V[l];
      const auto &prev = V[(l + 2) % 3];
      const auto &next = V[(l + 1) % 3];
      subs[l].ell = l + 1;
      subs[l].vertices = {detail::midpoint<2>({prev, v}), v, detail::midpoint<2>({v, next}), centroid};
    }
  } else {
    for (int l = 0; l < 4; ++l) {
      const auto &v = V[l];
      std::vector<Point<3>> others;
      for (int o = 0; o < 4; ++o)
        if (o != l)
          others.push_back(V[o]);
      auto edge = [&](const Point<3> &p) { return Point<3>{p[0] - v[0], p[1] - v[1], p[2] - v[2]}; };
      if (detail::det3(edge(others[0]), edge(others[1]), edge(others[2])) < 0.0)
        std::swap(others[1], others[2]);
      const auto &a = others[0];
      const auto &b = others[1];
      const auto &c = others[2];
      using detail::midpoint;
      // corner bits (eta1, eta2, eta3) -> point
      const Point<3> c000 = v, c100 = midpoint<3>({v, a}), c010 = midpoint<3>({v, b}), c001 = midpoint<3>({v, c}),
                     c110 = midpoint<3>({v, a, b}), c101 = midpoint<3>({v, a, c}), c011 = midpoint<3>({v, b, c}),
                     c111 = centroid;
      subs[l].ell = l + 1;
      subs[l].vertices = {c000, c100, c110, c010, c011, c001, c101, c111};
    }
  }
  return subs;
}

/// Bilinear (Dim = 2) or trilinear (Dim = 3) vertex shape functions.
template <int Dim>
std::array<double, (1 << Dim)> shape_functions(const Point<Dim> &eta)
{
  constexpr auto signs = corner_signs<Dim>();
  std::array<double, (1 << Dim)> psi{};
  for (std::size_t a = 0; a < psi.size(); ++a) {
    double v = 1.0 / (1 << Dim);
    for (int k = 0; k < Dim; ++k)
      v *= 1.0 + signs[a][k] * eta[k];
    psi[a] = v;
  }
  return psi;
}

/// d Psi_alpha / d eta_j, indexed [alpha][j].
template <int Dim>
std::array<std::array<double, Dim>, (1 << Dim)> shape_gradients(const Point<Dim> &eta)
{
  constexpr auto signs = corner_signs<Dim>();
  std::array<std::array<double, Dim>, (1 << Dim)> g{};
  for (std::size_t a = 0; a < g.size(); ++a)
    for (int j = 0; j < Dim; ++j) {
      double v = signs[a][j] / static_cast<double>(1 << Dim);
      for (int k = 0; k < Dim; ++k)
        if (k != j)
          v *= 1.0 + signs[a][k] * eta[k];
      g[a][j] = v;
    }
  return g;
}

template <int Dim>
Point<Dim> map_point(const SubdomainGeometry<Dim> &geom, const Point<Dim> &eta)
{
  const auto psi = shape_functions<Dim>(eta);
  Point<Dim> xi{};
  for (std::size_t a = 0; a < psi.size(); ++a)
    for (int i = 0; i < Dim; ++i)
      xi[i] += geom.vertices[a][i] * psi[a];
  return xi;
}

/// J[i][j] = d xi_i / d eta_j of the bilinear/trilinear map.
template <int Dim>
std::array<std::array<double, Dim>, Dim> jacobian(const SubdomainGeometry<Dim> &geom, const Point<Dim> &eta)
{
  const auto g = shape_gradients<Dim>(eta);
  std::array<std::array<double, Dim>, Dim> J{};
  for (std::size_t a = 0; a < g.size(); ++a)
    for (int i = 0; i < Dim; ++i)
      for (int j = 0; j < Dim; ++j)
        J[i][j] += geom.vertices[a][i] * g[a][j];
  return J;
}

/// Cofactor matrix C with C[i][j] the signed minor of J[i][j]; C = |J| J^{-T}.
template <int Dim>
std::array<std::array<double, Dim>, Dim> cofactors(const std::array<std::array<double, Dim>, Dim> &J)
{
  std::array<std::array<double, Dim>, Dim> C{};
  if constexpr (Dim == 2) {
    C[0][0] = J[1][1];
    C[0][1] = -J[1][0];
    C[1][0] = -J[0][1];
    C[1][1] = J[0][0];
  } else {
    for (int i = 0; i < 3; ++i) {
      const auto &r1 = J[(i + 1) % 3];
      const auto &r2 = J[(i + 2) % 3];
      C[i][0] = r1[1] * r2[2] - r1[2] * r2[1];
      C[i][1] = r1[2] * r2[0] - r1[0] * r2[2];
      C[i][2] = r1[0] * r2[1] - r1[1] * r2[0];
    }
  }
  return C;
}

template <int Dim>
double determinant(const std::array<std::array<double, Dim>, Dim> &J)
{
  if constexpr (Dim == 2)
    return J[0][0] * J[1][1] - J[0][1] * J[1][0];
  else
    return detail::det3(J[0], J[1], J[2]);
}

/// Evaluates the map, |J| and the metric terms at the given eta nodes.
/// Lambda_{eta_j, xi_i} is taken from the cofactors of J, so no division
/// or numerical inversion is involved.
template <int Dim>
SubdomainMetrics<Dim> jacobian_and_metrics(const SubdomainGeometry<Dim> &geom, const std::vector<Point<Dim>> &eta_nodes)
{
  const auto n = static_cast<Eigen::Index>(eta_nodes.size());
  SubdomainMetrics<Dim> out;
  out.xi.resize(eta_nodes.size());
  out.Jdet.resize(n);
  for (auto &row : out.Lambda)
    for (auto &v : row)
      v.resize(n);

  for (Eigen::Index m = 0; m < n; ++m) {
    const auto &eta = eta_nodes[static_cast<std::size_t>(m)];
    out.xi[static_cast<std::size_t>(m)] = map_point(geom, eta);
    const auto J = jacobian(geom, eta);
    const double det = determinant<Dim>(J);
    if (!(det > 0.0))
      throw Error(ErrorKind::geometry, "nonpositive Jacobian determinant " + std::to_string(det) + " in subdomain " +
                                           std::to_string(geom.ell) + " at node " + std::to_string(m));
    out.Jdet(m) = det;
    const auto C = cofactors<Dim>(J);
    for (int j = 0; j < Dim; ++j)
      for (int i = 0; i < Dim; ++i)
        out.Lambda[j][i](m) = C[i][j];
  }
  return out;
}

template <int Dim>
SubdomainMetrics<Dim> jacobian_and_metrics(const SubdomainGeometry<Dim> &geom, const TensorOperatorSet<Dim> &tset)
{
  return jacobian_and_metrics<Dim>(geom, tset.nodes);
}

/// max over nodes and i of |Sum_j D_eta_j Lambda_{eta_j, xi_i}|.
template <int Dim>
double metric_identity_residual(const SubdomainMetrics<Dim> &metrics, const TensorOperatorSet<Dim> &tset)
{
  double r = 0.0;
  for (int i = 0; i < Dim; ++i) {
    Vector sum = Vector::Zero(tset.size());
    for (int j = 0; j < Dim; ++j)
      sum += tset.D_eta[j] * metrics.Lambda[j][i];
    r = std::max(r, sum.cwiseAbs().maxCoeff());
  }
  return r;
}

} // namespace tpss
