#pragma once

#include "tpss/common.hpp"

#include <algorithm>
#include <numbers>
#include <string>
#include <utility>

namespace tpss {

enum class Family { lgl, csbp };

inline const char *to_string(Family f) { return f == Family::lgl ? "lgl" : "csbp"; }

/// Diagonal-norm, diagonal-E SBP first-derivative operator on [-1, 1].
///
/// Nodes are strictly increasing with both endpoints present, so the boundary
/// extrapolation vectors tL and tR select the first and last node.
struct Operator1D {
  Family family = Family::lgl;
  int n1 = 0;
  int p1d = 0; ///< polynomial exactness degree of D
  Vector nodes;
  Vector H; ///< diagonal of the norm matrix
  Matrix Q;
  Matrix D;
  Vector E; ///< diagonal of the boundary operator, diag(-1, 0, ..., 0, 1)
  Vector tL;
  Vector tR;
};

namespace detail {

/// Legendre polynomial P_n and its first derivative at x.
inline std::pair<double, double> legendre_with_derivative(int n, double x)
{
  if (n == 0)
    return {1.0, 0.0};
  double p_prev = 1.0, p = x;
  double dp_prev = 0.0, dp = 1.0;
  for (int k = 2; k <= n; ++k) {
    const double p_next = ((2 * k - 1) * x * p - (k - 1) * p_prev) / k;
    const double dp_next = dp_prev + (2 * k - 1) * p;
    p_prev = p;
    p = p_next;
    dp_prev = dp;
    dp = dp_next;
  }
  return {p, dp};
}

/// Lagrange differentiation matrix on distinct nodes (barycentric form).
inline Matrix lagrange_differentiation(const Vector &x)
{
  const auto n = x.size();
  Vector bary = Vector::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j)
        bary(i) /= (x(i) - x(j));

  Matrix D = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j)
        continue;
      D(i, j) = (bary(j) / bary(i)) / (x(i) - x(j));
      row_sum += D(i, j);
    }
    D(i, i) = -row_sum;
  }
  return D;
}

inline Vector boundary_diagonal(int n1)
{
  Vector e = Vector::Zero(n1);
  e(0) = -1.0;
  e(n1 - 1) = 1.0;
  return e;
}

inline void set_extrapolation(Operator1D &op)
{
  op.tL = Vector::Zero(op.n1);
  op.tR = Vector::Zero(op.n1);
  op.tL(0) = 1.0;
  op.tR(op.n1 - 1) = 1.0;
  op.E = boundary_diagonal(op.n1);
}

} // namespace detail

/// Legendre-Gauss-Lobatto nodes and weights on [-1, 1].
///
/// Interior nodes are the roots of P'_{n1-1}, found by Newton iteration from
/// Chebyshev-Gauss-Lobatto guesses. Only the left half is solved; the right
/// half is mirrored so the rule is exactly symmetric.
inline std::pair<Vector, Vector> lgl_nodes_weights(int n1)
{
  if (n1 < 2)
    throw Error(ErrorKind::construction, "LGL rule needs at least 2 nodes, got " + std::to_string(n1));

  constexpr int max_iterations = 100;
  constexpr double tolerance = 1e-15;
  const int N = n1 - 1;

  Vector x(n1);
  x(0) = -1.0;
  x(N) = 1.0;
  for (int j = 1; j <= N / 2; ++j) {
    double xj = -std::cos(std::numbers::pi * j / N);
    bool converged = false;
    for (int it = 0; it < max_iterations; ++it) {
      const auto [p, dp] = detail::legendre_with_derivative(N, xj);
      // (1 - x^2) P'' = 2x P' - N(N+1) P
      const double d2p = (2.0 * xj * dp - N * (N + 1.0) * p) / (1.0 - xj * xj);
      const double dx = dp / d2p;
      xj -= dx;
      if (std::abs(dx) <= tolerance) {
        converged = true;
        break;
      }
    }
    if (!converged)
      throw Error(ErrorKind::construction,
                  "LGL Newton iteration did not converge for node " + std::to_string(j) + " of n1=" + std::to_string(n1));
    x(j) = xj;
    x(N - j) = -xj;
  }
  if (N % 2 == 0)
    x(N / 2) = 0.0;

  Vector w(n1);
  for (int j = 0; j < n1; ++j) {
    const double p = detail::legendre_with_derivative(N, x(j)).first;
    w(j) = 2.0 / (n1 * (n1 - 1.0) * p * p);
  }
  return {x, w};
}

/// LGL collocation operator: D differentiates the Lagrange interpolant.
inline Operator1D build_lgl_operator(int n1)
{
  auto [x, w] = lgl_nodes_weights(n1);
  Operator1D op;
  op.family = Family::lgl;
  op.n1 = n1;
  op.p1d = n1 - 1;
  op.nodes = std::move(x);
  op.H = std::move(w);
  op.D = detail::lagrange_differentiation(op.nodes);
  op.Q = op.H.asDiagonal() * op.D;
  detail::set_extrapolation(op);
  return op;
}

/// Classical second-order SBP operator (central interior, first-order
/// one-sided closure) on a uniform grid.
inline Operator1D build_csbp_operator(int n1)
{
  if (n1 < 3)
    throw Error(ErrorKind::construction, "CSBP operator needs at least 3 nodes, got " + std::to_string(n1));

  const double dx = 2.0 / (n1 - 1);
  Operator1D op;
  op.family = Family::csbp;
  op.n1 = n1;
  op.p1d = 1;
  op.nodes = Vector::LinSpaced(n1, -1.0, 1.0);
  op.nodes(0) = -1.0;
  op.nodes(n1 - 1) = 1.0;
  op.H = Vector::Constant(n1, dx);
  op.H(0) = op.H(n1 - 1) = 0.5 * dx;

  op.Q = Matrix::Zero(n1, n1);
  for (int i = 0; i + 1 < n1; ++i) {
    op.Q(i, i + 1) = 0.5;
    op.Q(i + 1, i) = -0.5;
  }
  op.Q(0, 0) = -0.5;
  op.Q(n1 - 1, n1 - 1) = 0.5;
  op.D = op.H.cwiseInverse().asDiagonal() * op.Q;
  detail::set_extrapolation(op);
  return op;
}

inline Operator1D build_operator_1d(Family family, int n1)
{
  return family == Family::lgl ? build_lgl_operator(n1) : build_csbp_operator(n1);
}

/// Largest k such that D x^j is exact (within tol) for all j <= k.
inline int exactness_degree(const Operator1D &op, double tol = 1e-10, int max_degree = 40)
{
  int degree = -1;
  for (int k = 0; k <= max_degree; ++k) {
    double err = 0.0;
    for (int i = 0; i < op.n1; ++i) {
      double du = 0.0;
      for (int j = 0; j < op.n1; ++j)
        du += op.D(i, j) * ipow(op.nodes(j), k);
      const double exact = k == 0 ? 0.0 : k * ipow(op.nodes(i), k - 1);
      err = std::max(err, std::abs(du - exact));
    }
    if (err > tol)
      break;
    degree = k;
  }
  return degree;
}

/// Largest k such that sum_i H_i x_i^j matches the integral over [-1, 1] for all j <= k.
inline int quadrature_degree(const Operator1D &op, double tol = 1e-12, int max_degree = 60)
{
  int degree = -1;
  for (int k = 0; k <= max_degree; ++k) {
    double q = 0.0;
    for (int i = 0; i < op.n1; ++i)
      q += op.H(i) * ipow(op.nodes(i), k);
    const double exact = (k % 2 == 1) ? 0.0 : 2.0 / (k + 1);
    if (std::abs(q - exact) > tol)
      break;
    degree = k;
  }
  return degree;
}

/// Runs every Operator1D invariant and records the residuals.
inline VerificationReport verify_operator_1d(const Operator1D &op)
{
  VerificationReport report;
  const int n = op.n1;

  report.add_condition("node count", n, n >= 2 && op.nodes.size() == n && op.H.size() == n);
  if (op.nodes.size() != n || op.H.size() != n || op.Q.rows() != n || op.D.rows() != n)
    return report;

  bool increasing = op.nodes(0) == -1.0 && op.nodes(n - 1) == 1.0;
  for (int i = 1; i < n; ++i)
    increasing = increasing && op.nodes(i) > op.nodes(i - 1);
  report.add_condition("nodes increasing with endpoints", 0.0, increasing);

  report.add_condition("H positive", op.H.minCoeff(), op.H.minCoeff() > 0.0);
  report.add_residual("H sum", std::abs(op.H.sum() - 2.0), 1e-13);

  const Matrix E = detail::boundary_diagonal(n).asDiagonal();
  report.add_residual("SBP property", max_abs(Matrix(op.Q + op.Q.transpose() - E)), 1e-13);
  report.add_residual("D = H^-1 Q", max_abs(Matrix(op.H.asDiagonal() * op.D - op.Q)), 1e-13);

  const int exact = exactness_degree(op);
  report.add_condition("derivative exactness degree", exact, exact >= op.p1d);
  const int quad = quadrature_degree(op);
  report.add_condition("quadrature degree", quad, quad >= 2 * op.p1d - 1);

  const double left = op.tL.size() == n ? std::abs(op.tL.dot(op.nodes) + 1.0) : 1.0;
  const double right = op.tR.size() == n ? std::abs(op.tR.dot(op.nodes) - 1.0) : 1.0;
  report.add_residual("extrapolation", std::max(left, right), 1e-15);
  return report;
}

} // namespace tpss
