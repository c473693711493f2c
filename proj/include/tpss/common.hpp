#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace tpss {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// Row-major compressed storage; columns within a row are kept sorted, which
/// fixes a canonical entry order for exported operators.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
using Triplet = Eigen::Triplet<double, int>;

template <int Dim>
using Point = std::array<double, static_cast<std::size_t>(Dim)>;

enum class ErrorKind { construction, geometry, assembly, mesh, config, numerical };

inline const char *to_string(ErrorKind kind)
{
  switch (kind) {
  case ErrorKind::construction: return "construction";
  case ErrorKind::geometry: return "geometry";
  case ErrorKind::assembly: return "assembly";
  case ErrorKind::mesh: return "mesh";
  case ErrorKind::config: return "config";
  case ErrorKind::numerical: return "numerical";
  }
  return "unknown";
}

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind)
  {
  }

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

/// One named check: a measured residual against its tolerance.
struct Check {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Result of running an invariant suite. Integer-valued checks (degrees,
/// counts) are stored as doubles with an exact comparison.
struct VerificationReport {
  std::vector<Check> checks;

  void add_residual(std::string name, double value, double tolerance)
  {
    checks.push_back({std::move(name), value, tolerance, std::isfinite(value) && value <= tolerance});
  }

  void add_condition(std::string name, double value, bool ok)
  {
    checks.push_back({std::move(name), value, 0.0, ok});
  }

  bool passed() const
  {
    for (const auto &c : checks)
      if (!c.passed)
        return false;
    return true;
  }

  const Check *find(const std::string &name) const
  {
    for (const auto &c : checks)
      if (c.name == name)
        return &c;
    return nullptr;
  }

  /// First failing check, or nullptr.
  const Check *first_failure() const
  {
    for (const auto &c : checks)
      if (!c.passed)
        return &c;
    return nullptr;
  }

  void append(const VerificationReport &other, const std::string &prefix = {})
  {
    for (auto c : other.checks) {
      c.name = prefix + c.name;
      checks.push_back(std::move(c));
    }
  }
};

inline double max_abs(const Matrix &m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline double max_abs(const SparseMatrix &m)
{
  double r = 0.0;
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it)
      r = std::max(r, std::abs(it.value()));
  return r;
}

/// Integer power used for monomial evaluation; exponent 0 gives 1 even at 0.
inline double ipow(double x, int k)
{
  double r = 1.0;
  for (int i = 0; i < k; ++i)
    r *= x;
  return r;
}

} // namespace tpss
