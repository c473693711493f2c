#pragma once

#include "tpss/common.hpp"
#include "tpss/oned.hpp"

#include <string>

namespace tpss {

/// Node ordering on the reference quad/hex [-1,1]^Dim is lexicographic with
/// eta_1 varying fastest: volume index m = i_1 + n1*i_2 + n1^2*i_3.
template <int Dim>
constexpr int tensor_index(const std::array<int, Dim> &i, int n1)
{
  int m = 0;
  for (int k = Dim - 1; k >= 0; --k)
    m = m * n1 + i[k];
  return m;
}

template <int Dim>
constexpr std::array<int, Dim> tensor_multi_index(int m, int n1)
{
  std::array<int, Dim> i{};
  for (int k = 0; k < Dim; ++k) {
    i[k] = m % n1;
    m /= n1;
  }
  return i;
}

constexpr int int_pow(int b, int e)
{
  int r = 1;
  for (int i = 0; i < e; ++i)
    r *= b;
  return r;
}

/// One facet of the reference quad/hex. Facet id 2k-1 is {eta_k = -1} and
/// 2k is {eta_k = +1}, k = 1..Dim. Extrapolation is the gather
/// u_facet[f] = u[nodes[f]].
template <int Dim>
struct FacetData {
  int id = 0;
  int axis = 0; ///< zero-based k
  int side = -1;
  std::vector<int> nodes;
  Vector B;
  Point<Dim> normal{};
};

template <int Dim>
struct TensorOperatorSet {
  static_assert(Dim == 2 || Dim == 3);

  Operator1D op;
  int n1 = 0;
  std::vector<Point<Dim>> nodes;
  Vector H;
  std::array<SparseMatrix, Dim> Q_eta;
  std::array<SparseMatrix, Dim> D_eta;
  std::array<FacetData<Dim>, 2 * Dim> facets;

  int size() const { return static_cast<int>(nodes.size()); }
};

template <int Dim>
std::array<FacetData<Dim>, 2 * Dim> facet_layout(const Operator1D &op)
{
  const int n1 = op.n1;
  const int nv = int_pow(n1, Dim);
  std::array<FacetData<Dim>, 2 * Dim> facets;
  for (int k = 0; k < Dim; ++k) {
    for (int s = 0; s < 2; ++s) {
      auto &f = facets[2 * k + s];
      f.id = 2 * k + s + 1;
      f.axis = k;
      f.side = s == 0 ? -1 : 1;
      f.normal = {};
      f.normal[k] = f.side;
      const int fixed = s == 0 ? 0 : n1 - 1;
      std::vector<double> weights;
      for (int m = 0; m < nv; ++m) {
        const auto idx = tensor_multi_index<Dim>(m, n1);
        if (idx[k] != fixed)
          continue;
        double b = 1.0;
        for (int l = 0; l < Dim; ++l)
          if (l != k)
            b *= op.H(idx[l]);
        f.nodes.push_back(m);
        weights.push_back(b);
      }
      f.B = Eigen::Map<Vector>(weights.data(), static_cast<Eigen::Index>(weights.size()));
    }
  }
  return facets;
}

/// Facet layout for an LGL operator with n1 nodes; a convenience for callers
/// that only need the index structure.
template <int Dim>
std::array<FacetData<Dim>, 2 * Dim> facet_layout(int n1)
{
  return facet_layout<Dim>(build_lgl_operator(n1));
}

/// Lifts a 1D operator to [-1,1]^Dim: H = H1 (x) ... (x) H1 and
/// Q_eta_k = H1 (x) ... (x) Q1 (x) ... (x) H1 with Q1 in slot k (slot 0 is
/// the fastest index, i.e. the rightmost Kronecker factor).
template <int Dim>
TensorOperatorSet<Dim> tensor_product(const Operator1D &op)
{
  TensorOperatorSet<Dim> t;
  t.op = op;
  t.n1 = op.n1;
  const int n1 = op.n1;
  const int nv = int_pow(n1, Dim);

  t.nodes.resize(nv);
  t.H.resize(nv);
  for (int m = 0; m < nv; ++m) {
    const auto idx = tensor_multi_index<Dim>(m, n1);
    double h = 1.0;
    for (int k = 0; k < Dim; ++k) {
      t.nodes[m][k] = op.nodes(idx[k]);
      h *= op.H(idx[k]);
    }
    t.H(m) = h;
  }

  for (int k = 0; k < Dim; ++k) {
    std::vector<Triplet> q, d;
    q.reserve(static_cast<std::size_t>(nv) * n1);
    d.reserve(static_cast<std::size_t>(nv) * n1);
    for (int m = 0; m < nv; ++m) {
      auto idx = tensor_multi_index<Dim>(m, n1);
      double h_other = 1.0;
      for (int l = 0; l < Dim; ++l)
        if (l != k)
          h_other *= op.H(idx[l]);
      const int row = idx[k];
      for (int col = 0; col < n1; ++col) {
        idx[k] = col;
        const int mc = tensor_index<Dim>(idx, n1);
        if (op.Q(row, col) != 0.0)
          q.emplace_back(m, mc, h_other * op.Q(row, col));
        if (op.D(row, col) != 0.0)
          d.emplace_back(m, mc, op.D(row, col));
      }
    }
    t.Q_eta[k].resize(nv, nv);
    t.Q_eta[k].setFromTriplets(q.begin(), q.end());
    t.D_eta[k].resize(nv, nv);
    t.D_eta[k].setFromTriplets(d.begin(), d.end());
  }
  t.facets = facet_layout<Dim>(op);
  return t;
}

/// Runtime-dimension entry point; only 2 and 3 are meaningful.
inline void check_dimension(int d)
{
  if (d != 2 && d != 3)
    throw Error(ErrorKind::config, "dimension must be 2 or 3, got " + std::to_string(d));
}

/// Dense Sum_facets R^T B n_k R, the boundary operator of direction k.
template <int Dim>
Vector facet_boundary_diagonal(const TensorOperatorSet<Dim> &t, int k)
{
  Vector e = Vector::Zero(t.size());
  for (const auto &f : t.facets)
    for (std::size_t j = 0; j < f.nodes.size(); ++j)
      e(f.nodes[j]) += f.B(static_cast<Eigen::Index>(j)) * f.normal[k];
  return e;
}

template <int Dim>
VerificationReport verify_tensor(const TensorOperatorSet<Dim> &t)
{
  VerificationReport report;
  report.add_condition("H positive", t.H.minCoeff(), t.H.minCoeff() > 0.0);
  report.add_residual("H sum", std::abs(t.H.sum() - int_pow(2, Dim)), 1e-12);
  for (int k = 0; k < Dim; ++k) {
    const std::string dir = " eta" + std::to_string(k + 1);
    const SparseMatrix sym = SparseMatrix(t.Q_eta[k].transpose()) + t.Q_eta[k];
    const Vector e = facet_boundary_diagonal(t, k);
    SparseMatrix diff = sym;
    for (int m = 0; m < t.size(); ++m)
      diff.coeffRef(m, m) -= e(m);
    report.add_residual("E decomposition" + dir, max_abs(diff), 1e-13);
  }
  for (const auto &f : t.facets)
    report.add_residual("facet " + std::to_string(f.id) + " B sum", std::abs(f.B.sum() - int_pow(2, Dim - 1)), 1e-12);
  return report;
}

} // namespace tpss
