#pragma once

#include "tpss/common.hpp"
#include "tpss/oned.hpp"
#include "tpss/split.hpp"
#include "tpss/tensor.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <string>

namespace tpss {

/// Node count of a TPSS operator built from n1 nodes per direction.
constexpr long tpss_node_count(int d, int n1)
{
  const long n = n1;
  long ddm2 = 1;
  for (int i = 0; i < d - 2; ++i)
    ddm2 *= d;
  long nd = 1, ndm1 = 1;
  for (int i = 0; i < d; ++i)
    nd *= n;
  for (int i = 0; i < d - 1; ++i)
    ndm1 *= n;
  return (d + 1) * nd - (d + ddm2) * ndm1 + (d - 2) * ((d + 1) * n - 2) + 1;
}

/// Estimated nonzeros per derivative matrix.
constexpr long tpss_nnz_estimate(int d, int n1) { return (static_cast<long>(n1) * d - d + 1) * tpss_node_count(d, n1); }

/// Closed-form sparsity 1 - nnz / n_p^2 of the derivative matrices.
inline double tpss_sparsity_formula(int d, int n1)
{
  const double n = n1;
  if (d == 2)
    return 1.0 - (2.0 * n - 1.0) / (3.0 * n * n - 3.0 * n + 1.0);
  return 1.0 - (3.0 * n - 2.0) / (4.0 * n * n * n - 6.0 * n * n + 4.0 * n - 1.0);
}

/// Per-subdomain SBP operators in reference-simplex coordinates.
template <int Dim>
struct SubdomainOperators {
  int ell = 0;
  Vector H;
  std::array<SparseMatrix, Dim> Q;
  std::array<Vector, Dim> E; ///< diagonal of Q + Q^T
};

/// Builds H, S, E and Q = S + E/2 on one subdomain from the tensor operators
/// and the node-wise metric terms.
template <int Dim>
SubdomainOperators<Dim> subdomain_operators(const SubdomainGeometry<Dim> &geom, const SubdomainMetrics<Dim> &metrics,
                                            const TensorOperatorSet<Dim> &tset)
{
  const int nv = tset.size();
  if (metrics.Jdet.size() != nv)
    throw Error(ErrorKind::assembly, "metric data does not match tensor operator size");

  SubdomainOperators<Dim> out;
  out.ell = geom.ell;
  out.H = tset.H.cwiseProduct(metrics.Jdet);
  for (int i = 0; i < Dim; ++i) {
    SparseMatrix lq(nv, nv);
    for (int j = 0; j < Dim; ++j)
      lq += metrics.Lambda[j][i].asDiagonal() * tset.Q_eta[j];
    const SparseMatrix lqt = lq.transpose();
    SparseMatrix S = 0.5 * (lq - lqt);

    Vector e = Vector::Zero(nv);
    for (const auto &f : tset.facets)
      for (std::size_t a = 0; a < f.nodes.size(); ++a) {
        const int m = f.nodes[a];
        e(m) += f.B(static_cast<Eigen::Index>(a)) * f.side * metrics.Lambda[f.axis][i](m);
      }
    for (int m = 0; m < nv; ++m)
      S.coeffRef(m, m) += 0.5 * e(m);
    S.makeCompressed();
    out.Q[i] = std::move(S);
    out.E[i] = std::move(e);
  }
  return out;
}

/// Global numbering of the union of subdomain nodes.
template <int Dim>
struct AssemblyMap {
  /// Nodes of one tensor facet that lies on a simplex facet, mapped into the
  /// simplex facet's ordered node list.
  struct FacetPiece {
    int ell = 0;
    int tensor_facet = 0;
    std::vector<int> facet_position;
  };

  int n_p = 0;
  std::vector<Point<Dim>> coords;
  std::vector<std::vector<int>> local_to_global;
  std::array<std::vector<int>, Dim + 1> facet_nodes;
  std::array<std::vector<FacetPiece>, Dim + 1> facet_pieces;
};

/// Merges coincident subdomain nodes (distance <= tol) and numbers the unique
/// nodes in order of first appearance, subdomain by subdomain.
template <int Dim>
AssemblyMap<Dim> global_numbering(const std::vector<std::vector<Point<Dim>>> &sub_nodes, double tol)
{
  if (!(tol > 0.0))
    throw Error(ErrorKind::config, "merge tolerance must be positive");

  std::vector<Point<Dim>> flat;
  std::vector<std::size_t> offsets{0};
  for (const auto &s : sub_nodes) {
    flat.insert(flat.end(), s.begin(), s.end());
    offsets.push_back(flat.size());
  }

  std::vector<std::size_t> order(flat.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return flat[a][0] < flat[b][0]; });

  // Union-find with the smallest flat index as root, so numbering follows first appearance.
  std::vector<std::size_t> rep(flat.size());
  std::iota(rep.begin(), rep.end(), 0);
  auto find = [&](std::size_t a) {
    while (rep[a] != a)
      a = rep[a] = rep[rep[a]];
    return a;
  };
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const auto a = order[oi];
    for (std::size_t oj = oi; oj-- > 0;) {
      const auto b = order[oj];
      if (flat[a][0] - flat[b][0] > tol)
        break;
      double dist2 = 0.0;
      for (int k = 0; k < Dim; ++k)
        dist2 += (flat[a][k] - flat[b][k]) * (flat[a][k] - flat[b][k]);
      if (dist2 <= tol * tol) {
        const auto ra = find(a), rb = find(b);
        rep[std::max(ra, rb)] = std::min(ra, rb);
      }
    }
  }
  for (std::size_t a = 0; a < flat.size(); ++a)
    rep[a] = find(a);

  AssemblyMap<Dim> map;
  std::vector<int> gid(flat.size(), -1);
  for (std::size_t a = 0; a < flat.size(); ++a) {
    if (rep[a] == a) {
      gid[a] = map.n_p++;
      map.coords.push_back(flat[a]);
    } else {
      gid[a] = gid[rep[a]];
    }
  }
  map.local_to_global.resize(sub_nodes.size());
  for (std::size_t s = 0; s < sub_nodes.size(); ++s)
    map.local_to_global[s].assign(gid.begin() + static_cast<long>(offsets[s]), gid.begin() + static_cast<long>(offsets[s + 1]));

  if (!sub_nodes.empty() && !sub_nodes.front().empty()) {
    const int nv = static_cast<int>(sub_nodes.front().size());
    const int n1 = static_cast<int>(std::lround(std::pow(nv, 1.0 / Dim)));
    if (int_pow(n1, Dim) == nv && static_cast<int>(sub_nodes.size()) == Dim + 1) {
      const long expected = tpss_node_count(Dim, n1);
      if (map.n_p != expected)
        throw Error(ErrorKind::assembly, "node merge produced " + std::to_string(map.n_p) + " nodes, expected " +
                                             std::to_string(expected) + " for n1=" + std::to_string(n1));
    }
  }
  return map;
}

/// Scatter-add of a subdomain matrix into global numbering (the Z-matrix sum).
inline SparseMatrix scatter_subdomain(const SparseMatrix &local, const std::vector<int> &local_to_global, int n_p)
{
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(local.nonZeros()));
  for (int r = 0; r < local.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(local, r); it; ++it)
      t.emplace_back(local_to_global[static_cast<std::size_t>(r)], local_to_global[static_cast<std::size_t>(it.col())],
                     it.value());
  SparseMatrix g(n_p, n_p);
  g.setFromTriplets(t.begin(), t.end());
  return g;
}

/// Facet of the reference simplex. Facet gamma (1-based) is opposite vertex gamma.
template <int Dim>
struct SimplexFacet {
  int id = 0;
  std::vector<int> nodes; ///< global volume indices, lexicographic in xi
  Vector B;
  Point<Dim> normal{}; ///< outward unit normal
};

template <int Dim>
Point<Dim> reference_facet_normal(int gamma)
{
  Point<Dim> n{};
  if (gamma == 1) {
    n.fill(1.0 / std::sqrt(static_cast<double>(Dim)));
  } else {
    n[gamma - 2] = -1.0;
  }
  return n;
}

/// Assembled TPSS operator on the reference triangle/tetrahedron.
template <int Dim>
struct TPSSOperator {
  static constexpr int dimension = Dim;
  Family family = Family::lgl;
  int n1 = 0;
  int p1d = 0;
  int p = 0; ///< exactness degree, p1d - Dim + 1
  int n_p = 0;
  std::vector<Point<Dim>> nodes;
  Vector H;
  std::array<SparseMatrix, Dim> Q, D, E, S;
  std::array<SimplexFacet<Dim>, Dim + 1> facets;
  AssemblyMap<Dim> map;

  /// Diagonal of sum_gamma R^T B N_i R.
  Vector facet_boundary_diagonal(int i) const
  {
    Vector e = Vector::Zero(n_p);
    for (const auto &f : facets)
      for (std::size_t a = 0; a < f.nodes.size(); ++a)
        e(f.nodes[a]) += f.B(static_cast<Eigen::Index>(a)) * f.normal[i];
    return e;
  }
};

namespace detail {

template <int Dim>
bool lex_less(const Point<Dim> &a, const Point<Dim> &b, double tol)
{
  for (int k = 0; k < Dim; ++k) {
    if (a[k] < b[k] - tol)
      return true;
    if (a[k] > b[k] + tol)
      return false;
  }
  return false;
}

inline SparseMatrix diagonal_matrix(const Vector &d)
{
  SparseMatrix m(d.size(), d.size());
  m.reserve(Eigen::VectorXi::Constant(d.size(), 1));
  for (Eigen::Index i = 0; i < d.size(); ++i)
    m.insert(i, i) = d(i);
  m.makeCompressed();
  return m;
}

/// Fills D, S from H and Q, and E from the facet quadrature.
template <int Dim>
void derive_operators(TPSSOperator<Dim> &op)
{
  for (int i = 0; i < Dim; ++i) {
    op.E[i] = diagonal_matrix(op.facet_boundary_diagonal(i));
    op.S[i] = op.Q[i] - 0.5 * op.E[i];
    op.D[i] = op.H.cwiseInverse().asDiagonal() * op.Q[i];
  }
}

} // namespace detail

/// Assembles the TPSS operator from a 1D operator of degree p1d >= Dim - 1.
template <int Dim>
TPSSOperator<Dim> assemble(const Operator1D &op1d, double merge_tol = 1e-12)
{
  if (op1d.p1d < Dim - 1)
    throw Error(ErrorKind::config, "TPSS assembly in " + std::to_string(Dim) + "D needs a 1D operator of degree >= " +
                                       std::to_string(Dim - 1) + ", got " + std::to_string(op1d.p1d));

  const auto tset = tensor_product<Dim>(op1d);
  const auto geoms = split_vertices<Dim>();

  std::vector<SubdomainMetrics<Dim>> metrics;
  std::vector<std::vector<Point<Dim>>> sub_nodes;
  for (const auto &g : geoms) {
    metrics.push_back(jacobian_and_metrics(g, tset));
    sub_nodes.push_back(metrics.back().xi);
  }

  TPSSOperator<Dim> out;
  out.family = op1d.family;
  out.n1 = op1d.n1;
  out.p1d = op1d.p1d;
  out.p = op1d.p1d - Dim + 1;
  out.map = global_numbering<Dim>(sub_nodes, merge_tol);
  out.n_p = out.map.n_p;
  out.nodes = out.map.coords;

  out.H = Vector::Zero(out.n_p);
  std::array<std::vector<Triplet>, Dim> trip;
  for (std::size_t l = 0; l < geoms.size(); ++l) {
    const auto sub = subdomain_operators(geoms[l], metrics[l], tset);
    const auto &l2g = out.map.local_to_global[l];
    for (int m = 0; m < tset.size(); ++m)
      out.H(l2g[static_cast<std::size_t>(m)]) += sub.H(m);
    for (int i = 0; i < Dim; ++i)
      for (int r = 0; r < sub.Q[i].outerSize(); ++r)
        for (SparseMatrix::InnerIterator it(sub.Q[i], r); it; ++it)
          trip[i].emplace_back(l2g[static_cast<std::size_t>(r)], l2g[static_cast<std::size_t>(it.col())], it.value());
  }
  for (int i = 0; i < Dim; ++i) {
    out.Q[i].resize(out.n_p, out.n_p);
    out.Q[i].setFromTriplets(trip[i].begin(), trip[i].end());
  }

  // Facet quadrature: tensor facets lying on a simplex facet contribute their
  // mapped weights B * |scaled normal|.
  constexpr double on_facet_tol = 1e-12;
  std::array<std::map<int, double>, Dim + 1> facet_weight;
  for (std::size_t l = 0; l < geoms.size(); ++l) {
    const auto &l2g = out.map.local_to_global[l];
    for (const auto &tf : tset.facets) {
      for (int gamma = 1; gamma <= Dim + 1; ++gamma) {
        bool on = true;
        for (int m : tf.nodes)
          on = on && std::abs(reference_barycentric<Dim>(metrics[l].xi[static_cast<std::size_t>(m)])[gamma - 1]) <= on_facet_tol;
        if (!on)
          continue;
        const auto unit = reference_facet_normal<Dim>(gamma);
        typename AssemblyMap<Dim>::FacetPiece piece{geoms[l].ell, tf.id, {}};
        for (std::size_t a = 0; a < tf.nodes.size(); ++a) {
          const int m = tf.nodes[a];
          Point<Dim> sn{};
          double norm2 = 0.0;
          for (int i = 0; i < Dim; ++i) {
            sn[i] = tf.side * metrics[l].Lambda[tf.axis][i](m);
            norm2 += sn[i] * sn[i];
          }
          const double norm = std::sqrt(norm2);
          double dev = 0.0;
          for (int i = 0; i < Dim; ++i)
            dev = std::max(dev, std::abs(sn[i] / norm - unit[i]));
          if (dev > 1e-12)
            throw Error(ErrorKind::assembly, "subdomain facet normal disagrees with simplex facet " + std::to_string(gamma));
          facet_weight[gamma - 1][l2g[static_cast<std::size_t>(m)]] += tf.B(static_cast<Eigen::Index>(a)) * norm;
        }
        out.map.facet_pieces[gamma - 1].push_back(std::move(piece));
      }
    }
  }

  for (int gamma = 1; gamma <= Dim + 1; ++gamma) {
    auto &f = out.facets[gamma - 1];
    f.id = gamma;
    f.normal = reference_facet_normal<Dim>(gamma);
    for (const auto &[node, w] : facet_weight[gamma - 1])
      f.nodes.push_back(node);
    std::stable_sort(f.nodes.begin(), f.nodes.end(),
                     [&](int a, int b) { return detail::lex_less<Dim>(out.nodes[a], out.nodes[b], on_facet_tol); });
    f.B.resize(static_cast<Eigen::Index>(f.nodes.size()));
    for (std::size_t a = 0; a < f.nodes.size(); ++a)
      f.B(static_cast<Eigen::Index>(a)) = facet_weight[gamma - 1][f.nodes[a]];
    out.map.facet_nodes[gamma - 1] = f.nodes;

    std::map<int, int> position;
    for (std::size_t a = 0; a < f.nodes.size(); ++a)
      position[f.nodes[a]] = static_cast<int>(a);
    for (auto &piece : out.map.facet_pieces[gamma - 1]) {
      const auto &l2g = out.map.local_to_global[static_cast<std::size_t>(piece.ell - 1)];
      for (int m : tset.facets[static_cast<std::size_t>(piece.tensor_facet - 1)].nodes)
        piece.facet_position.push_back(position.at(l2g[static_cast<std::size_t>(m)]));
    }
  }

  detail::derive_operators(out);
  return out;
}

template <int Dim>
TPSSOperator<Dim> assemble(Family family, int n1)
{
  return assemble<Dim>(build_operator_1d(family, n1));
}

/// 1D node count giving a degree-p LGL-TPSS operator.
constexpr int lgl_n1_for_degree(int d, int p) { return p + d; }

/// Exact integral of xi^alpha over the reference simplex, from
/// xi_k = 2 lambda_k - 1 and the Dirichlet moments of the unit simplex.
template <int Dim>
double simplex_monomial_integral(const std::array<int, Dim> &alpha)
{
  auto fact = [](int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i)
      f *= i;
    return f;
  };
  auto binom = [&](int n, int k) { return fact(n) / (fact(k) * fact(n - k)); };

  double total = 0.0;
  std::array<int, Dim> b{};
  // iterate over all b <= alpha componentwise
  while (true) {
    double term = 1.0;
    int sum_b = 0;
    for (int k = 0; k < Dim; ++k) {
      term *= binom(alpha[k], b[k]) * ipow(2.0, b[k]) * (((alpha[k] - b[k]) % 2) ? -1.0 : 1.0) * fact(b[k]);
      sum_b += b[k];
    }
    total += term / fact(sum_b + Dim);
    int k = 0;
    while (k < Dim && ++b[k] > alpha[k])
      b[k++] = 0;
    if (k == Dim)
      break;
  }
  return total * ipow(2.0, Dim);
}

/// All exponent tuples of total degree q.
template <int Dim>
std::vector<std::array<int, Dim>> monomials_of_degree(int q)
{
  std::vector<std::array<int, Dim>> out;
  if constexpr (Dim == 2) {
    for (int a = q; a >= 0; --a)
      out.push_back({a, q - a});
  } else {
    for (int a = q; a >= 0; --a)
      for (int b = q - a; b >= 0; --b)
        out.push_back({a, b, q - a - b});
  }
  return out;
}

template <int Dim>
double monomial(const Point<Dim> &x, const std::array<int, Dim> &alpha)
{
  double v = 1.0;
  for (int k = 0; k < Dim; ++k)
    v *= ipow(x[k], alpha[k]);
  return v;
}

template <int Dim>
double monomial_derivative(const Point<Dim> &x, const std::array<int, Dim> &alpha, int i)
{
  if (alpha[i] == 0)
    return 0.0;
  auto a = alpha;
  a[i] -= 1;
  return alpha[i] * monomial<Dim>(x, a);
}

/// max over nodes, directions and monomials of total degree q of |D_i x^a - d/dx_i x^a|.
template <int Dim>
double derivative_error_at_degree(const std::array<SparseMatrix, Dim> &D, const std::vector<Point<Dim>> &nodes, int q)
{
  const auto n = static_cast<Eigen::Index>(nodes.size());
  double err = 0.0;
  for (const auto &alpha : monomials_of_degree<Dim>(q)) {
    Vector u(n);
    for (Eigen::Index m = 0; m < n; ++m)
      u(m) = monomial<Dim>(nodes[static_cast<std::size_t>(m)], alpha);
    for (int i = 0; i < Dim; ++i) {
      const Vector du = D[i] * u;
      for (Eigen::Index m = 0; m < n; ++m)
        err = std::max(err, std::abs(du(m) - monomial_derivative<Dim>(nodes[static_cast<std::size_t>(m)], alpha, i)));
    }
  }
  return err;
}

/// max over monomials of total degree q of |sum H x^a - integral| / max(1, |integral|).
template <int Dim>
double quadrature_error_at_degree(const Vector &H, const std::vector<Point<Dim>> &nodes, int q)
{
  double err = 0.0;
  for (const auto &alpha : monomials_of_degree<Dim>(q)) {
    double s = 0.0;
    for (std::size_t m = 0; m < nodes.size(); ++m)
      s += H(static_cast<Eigen::Index>(m)) * monomial<Dim>(nodes[m], alpha);
    const double exact = simplex_monomial_integral<Dim>(alpha);
    err = std::max(err, std::abs(s - exact) / std::max(1.0, std::abs(exact)));
  }
  return err;
}

struct SparsityStats {
  int n_p = 0;
  long nnz_actual = 0; ///< max over directions
  long nnz_estimate = 0;
  double s_actual = 0.0;
  double s_formula = 0.0;
};

inline long count_nonzeros(const SparseMatrix &m, double drop_tol = 1e-14)
{
  long c = 0;
  for (int r = 0; r < m.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(m, r); it; ++it)
      if (std::abs(it.value()) > drop_tol)
        ++c;
  return c;
}

template <int Dim>
SparsityStats sparsity_stats(const TPSSOperator<Dim> &op)
{
  SparsityStats s;
  s.n_p = op.n_p;
  for (int i = 0; i < Dim; ++i)
    s.nnz_actual = std::max(s.nnz_actual, count_nonzeros(op.D[i]));
  s.nnz_estimate = tpss_nnz_estimate(Dim, op.n1);
  const double np2 = static_cast<double>(op.n_p) * op.n_p;
  s.s_actual = 1.0 - static_cast<double>(s.nnz_actual) / np2;
  s.s_formula = tpss_sparsity_formula(Dim, op.n1);
  return s;
}

/// Tolerances of the assembled-operator invariant suite.
struct TPSSTolerances {
  double sbp = 1e-12;
  double decomposition = 1e-13;
  double skew = 1e-13;
  double exact = 1e-10;
  double sharp = 1e-6;
  double quadrature = 1e-12;
};

/// Full invariant suite for an assembled operator. The derivative sweep checks
/// exactness through degree p and requires some degree p+1 monomial to fail.
template <int Dim>
VerificationReport verify_tpss(const TPSSOperator<Dim> &op, const TPSSTolerances &tol = {})
{
  VerificationReport report;
  report.add_condition("node count formula", op.n_p, op.n_p == tpss_node_count(Dim, op.n1));
  report.add_condition("H positive", op.H.minCoeff(), op.H.minCoeff() > 0.0);
  report.add_residual("H sum", std::abs(op.H.sum() - reference_simplex_measure<Dim>()), 1e-12);

  std::vector<bool> on_boundary(static_cast<std::size_t>(op.n_p), false);
  for (const auto &f : op.facets)
    for (int m : f.nodes)
      on_boundary[static_cast<std::size_t>(m)] = true;

  for (int i = 0; i < Dim; ++i) {
    const std::string dir = " xi" + std::to_string(i + 1);
    const SparseMatrix qt = op.Q[i].transpose();
    report.add_residual("SBP property" + dir, max_abs(SparseMatrix(op.Q[i] + qt - op.E[i])), tol.sbp);

    double offdiag = 0.0, interior = 0.0;
    for (int r = 0; r < op.E[i].outerSize(); ++r)
      for (SparseMatrix::InnerIterator it(op.E[i], r); it; ++it) {
        if (it.col() != r)
          offdiag = std::max(offdiag, std::abs(it.value()));
        else if (!on_boundary[static_cast<std::size_t>(r)])
          interior = std::max(interior, std::abs(it.value()));
      }
    report.add_residual("E diagonal" + dir, offdiag, tol.decomposition);
    report.add_residual("E zero at interior nodes" + dir, interior, tol.decomposition);

    const Vector e_facets = op.facet_boundary_diagonal(i);
    report.add_residual("E decomposition" + dir, (Vector(op.E[i].diagonal()) - e_facets).cwiseAbs().maxCoeff(),
                        tol.decomposition);

    const SparseMatrix st = op.S[i].transpose();
    report.add_residual("S antisymmetric" + dir, max_abs(SparseMatrix(op.S[i] + st)), tol.skew);
    report.add_residual("D = H^-1 Q" + dir,
                        max_abs(SparseMatrix(op.H.asDiagonal() * op.D[i] - op.Q[i])), tol.decomposition);
  }

  double worst_exact = 0.0;
  for (int q = 0; q <= op.p; ++q)
    worst_exact = std::max(worst_exact, derivative_error_at_degree<Dim>(op.D, op.nodes, q));
  report.add_residual("derivative exact through degree p", worst_exact, tol.exact);
  const double next = derivative_error_at_degree<Dim>(op.D, op.nodes, op.p + 1);
  report.add_condition("derivative inexact at degree p+1", next, next > tol.sharp);

  double worst_quad = 0.0;
  for (int q = 0; q <= 2 * op.p - 1; ++q)
    worst_quad = std::max(worst_quad, quadrature_error_at_degree<Dim>(op.H, op.nodes, q));
  report.add_residual("norm quadrature through degree 2p-1", worst_quad, tol.quadrature);
  return report;
}

} // namespace tpss
