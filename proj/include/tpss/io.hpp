#pragma once

#include "tpss/advect.hpp"
#include "tpss/assembly.hpp"
#include "tpss/mesh.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <string>

namespace tpss {

/// Shortest round-trip decimal form used in every machine-readable file.
inline std::string fmt17(double x)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Operator exchange format, see docs/formats.md. Entries are written in
/// row-major order with sorted columns, so identical operators give
/// identical bytes.
template <int Dim>
void write_operator(std::ostream &os, const TPSSOperator<Dim> &op)
{
  os << "tpss-operator 1\n";
  os << "dim " << Dim << "\n";
  os << "family " << to_string(op.family) << "\n";
  os << "n1 " << op.n1 << "\n";
  os << "p1d " << op.p1d << "\n";
  os << "p " << op.p << "\n";
  os << "n_p " << op.n_p << "\n";
  os << "nodes\n";
  for (const auto &x : op.nodes) {
    for (int i = 0; i < Dim; ++i)
      os << (i ? " " : "") << fmt17(x[i]);
    os << "\n";
  }
  os << "H\n";
  for (int m = 0; m < op.n_p; ++m)
    os << fmt17(op.H(m)) << "\n";
  for (int i = 0; i < Dim; ++i) {
    os << "Q " << i + 1 << " " << op.Q[i].nonZeros() << "\n";
    for (int r = 0; r < op.Q[i].outerSize(); ++r)
      for (SparseMatrix::InnerIterator it(op.Q[i], r); it; ++it)
        os << r << " " << it.col() << " " << fmt17(it.value()) << "\n";
  }
  for (int i = 0; i < Dim; ++i) {
    const Vector e = op.E[i].diagonal();
    int count = 0;
    for (int m = 0; m < op.n_p; ++m)
      count += e(m) != 0.0;
    os << "E " << i + 1 << " " << count << "\n";
    for (int m = 0; m < op.n_p; ++m)
      if (e(m) != 0.0)
        os << m << " " << fmt17(e(m)) << "\n";
  }
  for (const auto &f : op.facets) {
    os << "facet " << f.id << " " << f.nodes.size() << " normal";
    for (int i = 0; i < Dim; ++i)
      os << " " << fmt17(f.normal[i]);
    os << "\n";
    for (std::size_t a = 0; a < f.nodes.size(); ++a)
      os << f.nodes[a] << " " << fmt17(f.B(static_cast<Eigen::Index>(a))) << "\n";
  }
}

inline int read_operator_dimension(std::istream &is)
{
  std::string tag;
  int version = 0, d = 0;
  if (!(is >> tag >> version) || tag != "tpss-operator" || version != 1)
    throw Error(ErrorKind::config, "not a tpss-operator file");
  if (!(is >> tag >> d) || tag != "dim")
    throw Error(ErrorKind::config, "missing dim line in operator file");
  check_dimension(d);
  return d;
}

/// Reads the body after read_operator_dimension. D and S are derived from
/// the stored H, Q and E, so a corrupted entry shows up in the invariant suite.
template <int Dim>
TPSSOperator<Dim> read_operator_body(std::istream &is)
{
  TPSSOperator<Dim> op;
  std::string tag, word;
  auto expect = [&](const char *name) {
    if (!(is >> tag) || tag != name)
      throw Error(ErrorKind::config, std::string("operator file: expected '") + name + "'");
  };
  expect("family");
  is >> word;
  if (word == "lgl")
    op.family = Family::lgl;
  else if (word == "csbp")
    op.family = Family::csbp;
  else
    throw Error(ErrorKind::config, "operator file: unknown family '" + word + "'");
  expect("n1");
  is >> op.n1;
  expect("p1d");
  is >> op.p1d;
  expect("p");
  is >> op.p;
  expect("n_p");
  is >> op.n_p;
  if (!is || op.n_p <= 0)
    throw Error(ErrorKind::config, "operator file: bad header");
  expect("nodes");
  op.nodes.resize(static_cast<std::size_t>(op.n_p));
  for (auto &x : op.nodes)
    for (auto &c : x)
      is >> c;
  expect("H");
  op.H.resize(op.n_p);
  for (int m = 0; m < op.n_p; ++m)
    is >> op.H(m);
  for (int i = 0; i < Dim; ++i) {
    int dir = 0;
    long nnz = 0;
    expect("Q");
    is >> dir >> nnz;
    std::vector<Triplet> t;
    for (long e = 0; e < nnz; ++e) {
      int r = 0, c = 0;
      double v = 0.0;
      is >> r >> c >> v;
      if (r < 0 || r >= op.n_p || c < 0 || c >= op.n_p)
        throw Error(ErrorKind::config, "operator file: Q index out of range");
      t.emplace_back(r, c, v);
    }
    op.Q[dir - 1].resize(op.n_p, op.n_p);
    op.Q[dir - 1].setFromTriplets(t.begin(), t.end());
  }
  for (int i = 0; i < Dim; ++i) {
    int dir = 0, count = 0;
    expect("E");
    is >> dir >> count;
    std::vector<Triplet> t;
    for (int e = 0; e < count; ++e) {
      int m = 0;
      double v = 0.0;
      is >> m >> v;
      if (m < 0 || m >= op.n_p)
        throw Error(ErrorKind::config, "operator file: E index out of range");
      t.emplace_back(m, m, v);
    }
    op.E[dir - 1].resize(op.n_p, op.n_p);
    op.E[dir - 1].setFromTriplets(t.begin(), t.end());
  }
  for (int g = 0; g <= Dim; ++g) {
    std::size_t count = 0;
    auto &f = op.facets[static_cast<std::size_t>(g)];
    expect("facet");
    is >> f.id >> count;
    expect("normal");
    for (auto &n : f.normal)
      is >> n;
    f.nodes.resize(count);
    f.B.resize(static_cast<Eigen::Index>(count));
    for (std::size_t a = 0; a < count; ++a)
      is >> f.nodes[a] >> f.B(static_cast<Eigen::Index>(a));
  }
  if (!is)
    throw Error(ErrorKind::config, "operator file: truncated");
  for (int i = 0; i < Dim; ++i) {
    op.D[i] = SparseMatrix(op.H.cwiseInverse().asDiagonal() * op.Q[i]);
    op.S[i] = op.Q[i] - 0.5 * op.E[i];
  }
  return op;
}

template <int Dim>
TPSSOperator<Dim> read_operator(std::istream &is)
{
  const int d = read_operator_dimension(is);
  if (d != Dim)
    throw Error(ErrorKind::config, "operator dimension " + std::to_string(d) + " does not match " + std::to_string(Dim));
  return read_operator_body<Dim>(is);
}

// CSV writers; schemas are listed in docs/formats.md.

inline void write_error_table_csv(std::ostream &os, const ConvergenceTable &t)
{
  os << "mesh,n_e,dof,h,h_norm_error,linf_error,rate\n";
  for (const auto &r : t.rows)
    os << r.mesh << ',' << r.n_e << ',' << r.dof << ',' << fmt17(r.h) << ',' << fmt17(r.h_norm_error) << ','
       << fmt17(r.linf_error) << ',' << (std::isfinite(r.rate) ? fmt17(r.rate) : "undefined") << "\n";
}

inline void write_energy_csv(std::ostream &os, const SolveReport &rep)
{
  os << "t,energy\n";
  for (const auto &[t, e] : rep.energy)
    os << fmt17(t) << ',' << fmt17(e) << "\n";
}

inline void write_maxdt_trace_csv(std::ostream &os, const MaxDtResult &res)
{
  os << "eval,dt,energy_change,stable\n";
  for (std::size_t i = 0; i < res.trace.size(); ++i)
    os << i << ',' << fmt17(res.trace[i].dt) << ',' << fmt17(res.trace[i].energy_change) << ','
       << (res.trace[i].stable ? 1 : 0) << "\n";
}

inline void write_quality_csv(std::ostream &os, const MeshQuality &q)
{
  const bool angles = !q.max_angle.empty();
  os << "element,aspect_ratio" << (angles ? ",max_angle_deg" : "") << "\n";
  for (std::size_t k = 0; k < q.aspect_ratio.size(); ++k) {
    os << k << ',' << fmt17(q.aspect_ratio[k]);
    if (angles)
      os << ',' << fmt17(q.max_angle[k]);
    os << "\n";
  }
}

} // namespace tpss
