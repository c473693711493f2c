#pragma once

#include "tpss/assembly.hpp"
#include "tpss/common.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>

namespace tpss {

/// Constant geometric factors of an affine simplex.
///
/// The map sends reference vertex a to physical vertex a, so
/// J[i][j] = (X_{j+1} - X_0)_i / 2 and G = J^{-1} with G[j][i] = d xi_j / d x_i.
template <int Dim>
struct AffineGeometry {
  std::array<Point<Dim>, Dim + 1> vertices{};
  std::array<std::array<double, Dim>, Dim> J{};
  std::array<std::array<double, Dim>, Dim> G{};
  double Jdet = 0.0;

  Point<Dim> map(const Point<Dim> &xi) const
  {
    Point<Dim> x = vertices[0];
    for (int i = 0; i < Dim; ++i)
      for (int j = 0; j < Dim; ++j)
        x[i] += J[i][j] * (xi[j] + 1.0);
    return x;
  }

  /// |J| J^{-T} n_xi, the scaled outward normal of reference facet gamma.
  Point<Dim> scaled_normal(int gamma) const
  {
    const auto n = reference_facet_normal<Dim>(gamma);
    Point<Dim> out{};
    for (int i = 0; i < Dim; ++i)
      for (int j = 0; j < Dim; ++j)
        out[i] += n[j] * Jdet * G[j][i];
    return out;
  }
};

template <int Dim>
AffineGeometry<Dim> affine_geometry(const std::array<Point<Dim>, Dim + 1> &vertices, int element_id = -1)
{
  AffineGeometry<Dim> g;
  g.vertices = vertices;
  for (int i = 0; i < Dim; ++i)
    for (int j = 0; j < Dim; ++j)
      g.J[i][j] = 0.5 * (vertices[j + 1][i] - vertices[0][i]);
  g.Jdet = determinant<Dim>(g.J);
  if (!(g.Jdet > 0.0))
    throw Error(ErrorKind::geometry, "degenerate or inverted element " + std::to_string(element_id) +
                                         " (Jacobian determinant " + std::to_string(g.Jdet) + ")");
  const auto C = cofactors<Dim>(g.J);
  for (int j = 0; j < Dim; ++j)
    for (int i = 0; i < Dim; ++i)
      g.G[j][i] = C[i][j] / g.Jdet;
  return g;
}

/// Element facet data. B is the reference facet quadrature and N[i] the
/// constant i-component of the scaled outward normal.
template <int Dim>
struct ElementFacet {
  int gamma = 0;
  std::vector<int> nodes;
  Vector B;
  Point<Dim> N{};
  std::vector<Point<Dim>> coords;
};

/// TPSS operators on one affine physical element.
template <int Dim>
struct ElementOperators {
  int id = -1;
  AffineGeometry<Dim> geometry;
  Vector H;
  std::array<SparseMatrix, Dim> Q, D, E;
  std::array<ElementFacet<Dim>, Dim + 1> facets;
  std::vector<Point<Dim>> nodes;

  /// Diagonal of sum_gamma R^T B N_i R.
  Vector facet_boundary_diagonal(int i) const
  {
    Vector e = Vector::Zero(H.size());
    for (const auto &f : facets)
      for (std::size_t a = 0; a < f.nodes.size(); ++a)
        e(f.nodes[a]) += f.B(static_cast<Eigen::Index>(a)) * f.N[i];
    return e;
  }
};

/// Builds the physical operators under an affine map. With constant metrics
/// Q_x_i = |J| sum_j (d xi_j / d x_i) Q_xi_j, which is the general
/// node-varying construction specialised to p_geom = 1.
template <int Dim>
ElementOperators<Dim> build_element_operators(const TPSSOperator<Dim> &op, const std::array<Point<Dim>, Dim + 1> &vertices,
                                              int element_id = -1)
{
  ElementOperators<Dim> out;
  out.id = element_id;
  out.geometry = affine_geometry<Dim>(vertices, element_id);
  const auto &g = out.geometry;

  out.H = op.H * g.Jdet;
  for (int i = 0; i < Dim; ++i) {
    SparseMatrix q(op.n_p, op.n_p), d(op.n_p, op.n_p), e(op.n_p, op.n_p);
    for (int j = 0; j < Dim; ++j) {
      if (g.G[j][i] == 0.0)
        continue;
      q += (g.Jdet * g.G[j][i]) * op.Q[j];
      d += g.G[j][i] * op.D[j];
      e += (g.Jdet * g.G[j][i]) * op.E[j];
    }
    out.Q[i] = std::move(q);
    out.D[i] = std::move(d);
    out.E[i] = std::move(e);
  }

  out.nodes.reserve(op.nodes.size());
  for (const auto &xi : op.nodes)
    out.nodes.push_back(g.map(xi));

  for (int gamma = 1; gamma <= Dim + 1; ++gamma) {
    auto &f = out.facets[gamma - 1];
    const auto &ref = op.facets[gamma - 1];
    f.gamma = gamma;
    f.nodes = ref.nodes;
    f.B = ref.B;
    f.N = g.scaled_normal(gamma);
    for (int m : f.nodes)
      f.coords.push_back(out.nodes[static_cast<std::size_t>(m)]);
  }
  return out;
}

/// Invariants of one element's operators.
template <int Dim>
VerificationReport verify_element(const ElementOperators<Dim> &el, double size_scale = 1.0)
{
  VerificationReport r;
  r.add_condition("H positive", el.H.minCoeff(), el.H.minCoeff() > 0.0);
  const double volume = el.geometry.Jdet * reference_simplex_measure<Dim>();
  r.add_residual("H sum = volume", std::abs(el.H.sum() - volume) / volume, 1e-12);
  const Vector ones = Vector::Ones(el.H.size());
  for (int i = 0; i < Dim; ++i) {
    const std::string dir = " x" + std::to_string(i + 1);
    const SparseMatrix qt = el.Q[i].transpose();
    r.add_residual("SBP property" + dir, max_abs(SparseMatrix(el.Q[i] + qt - el.E[i])), 1e-12);
    const Vector e_facets = el.facet_boundary_diagonal(i);
    r.add_residual("E decomposition" + dir, (Vector(el.E[i].diagonal()) - e_facets).cwiseAbs().maxCoeff(), 1e-12);
    r.add_residual("freestream" + dir, (el.D[i] * ones).cwiseAbs().maxCoeff() * size_scale, 1e-12);
    r.add_residual("closed boundary" + dir, std::abs(e_facets.sum()), 1e-12);
  }
  return r;
}

/// Shape-class cache for element operators. Elements that are translates of
/// each other share one entry; the cached operators are built with vertex 0
/// at the origin, so node coordinates must be offset by the element's first
/// vertex. Lookups take a shared lock, insertion an exclusive one.
template <int Dim>
class ElementOperatorCache {
public:
  explicit ElementOperatorCache(std::shared_ptr<const TPSSOperator<Dim>> op, double tol = 1e-12)
      : op_(std::move(op)), tol_(tol)
  {
  }

  std::shared_ptr<const ElementOperators<Dim>> get(const std::array<Point<Dim>, Dim + 1> &vertices)
  {
    const auto key = fingerprint(vertices);
    {
      std::shared_lock lock(mutex_);
      if (auto it = cache_.find(key); it != cache_.end())
        return it->second;
    }
    auto shifted = vertices;
    for (auto &v : shifted)
      for (int k = 0; k < Dim; ++k)
        v[k] -= vertices[0][k];
    auto built = std::make_shared<const ElementOperators<Dim>>(build_element_operators<Dim>(*op_, shifted));
    std::unique_lock lock(mutex_);
    auto [it, inserted] = cache_.emplace(key, std::move(built));
    return it->second;
  }

  std::size_t size() const
  {
    std::shared_lock lock(mutex_);
    return cache_.size();
  }

private:
  using Key = std::vector<long long>;

  Key fingerprint(const std::array<Point<Dim>, Dim + 1> &vertices) const
  {
    Key key;
    for (int a = 1; a <= Dim; ++a)
      for (int k = 0; k < Dim; ++k)
        key.push_back(std::llround((vertices[a][k] - vertices[0][k]) / tol_));
    return key;
  }

  std::shared_ptr<const TPSSOperator<Dim>> op_;
  double tol_;
  mutable std::shared_mutex mutex_;
  std::map<Key, std::shared_ptr<const ElementOperators<Dim>>> cache_;
};

} // namespace tpss
