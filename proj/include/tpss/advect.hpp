#pragma once

#include "tpss/assembly.hpp"
#include "tpss/common.hpp"
#include "tpss/mesh.hpp"
#include "tpss/physmap.hpp"

#include <chrono>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <optional>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tpss {

enum class SatKind { upwind, central };

inline const char *to_string(SatKind s) { return s == SatKind::upwind ? "upwind" : "central"; }

template <int Dim>
Point<Dim> default_wave_speed()
{
  if constexpr (Dim == 2)
    return {5.0 / 4.0, std::sqrt(7.0) / 4.0};
  else
    return {1.5, 0.5, 1.0 / std::sqrt(2.0)};
}

template <int Dim>
struct AdvectionConfig {
  Point<Dim> c = default_wave_speed<Dim>();
  int omega = Dim == 2 ? 8 : 2;
  double T_final = 1.0;
  double cfl = 0.0; ///< <= 0 selects 0.1 / (p + 1)
  double dt = 0.0;  ///< > 0 overrides cfl
  SatKind sat = SatKind::upwind;
  int p = 1;
  Family family = Family::lgl;
  int n1 = 0; ///< 0 derives n1 from p (LGL) or uses 8 (CSBP)
  double energy_growth_limit = 10.0;
  bool record_energy = true;

  double speed() const
  {
    double s = 0.0;
    for (double ci : c)
      s += ci * ci;
    return std::sqrt(s);
  }

  double effective_cfl() const { return cfl > 0.0 ? cfl : 0.1 / (p + 1); }

  int effective_n1() const
  {
    if (n1 > 0)
      return n1;
    return family == Family::lgl ? lgl_n1_for_degree(Dim, p) : 8;
  }
};

template <int Dim>
double exact_solution(const Point<Dim> &x, double t, const Point<Dim> &c, int omega)
{
  double u = 1.0;
  for (int i = 0; i < Dim; ++i)
    u *= std::sin(omega * std::numbers::pi * (x[i] - c[i] * t));
  return u;
}

template <int Dim>
double exact_solution(const Point<Dim> &x, double t, const AdvectionConfig<Dim> &cfg)
{
  return exact_solution<Dim>(x, t, cfg.c, cfg.omega);
}

/// Reference operator for a config, built once per (family, n1).
template <int Dim>
std::shared_ptr<const TPSSOperator<Dim>> operator_for(const AdvectionConfig<Dim> &cfg)
{
  return std::make_shared<const TPSSOperator<Dim>>(assemble<Dim>(cfg.family, cfg.effective_n1()));
}

/// Everything the residual needs, precomputed from a mesh and an operator.
/// State vectors are element-major: u[k * n_p + m].
template <int Dim>
struct AdvectionSystem {
  struct FacetLink {
    int neighbor = -1;
    int table = -1;  ///< index into node_tables: neighbor volume index per facet node
    double cn = 0.0; ///< c . N_x of this facet
  };

  std::shared_ptr<const TPSSOperator<Dim>> op;
  Point<Dim> c{};
  int n_e = 0;
  int n_p = 0;
  // Shared sparsity pattern of D_xi_1..D_xi_d with one value array per direction.
  std::vector<int> row_ptr, col;
  std::array<std::vector<double>, Dim> val;
  std::vector<std::array<double, Dim>> coef; ///< sum_i c_i d xi_j / d x_i per element
  std::vector<double> Jdet;
  Vector Hinv;
  std::vector<std::array<FacetLink, Dim + 1>> links;
  std::vector<std::vector<int>> node_tables;
  std::vector<Point<Dim>> nodes; ///< physical node coordinates, element-major
  Vector Hk;                     ///< diagonal of the global norm
  double h_min = 0.0;

  long dof() const { return static_cast<long>(n_e) * n_p; }
};

namespace detail {

/// Barycentric coordinates of reference facet nodes w.r.t. the facet's
/// vertices in increasing local order.
template <int Dim>
std::vector<std::array<double, Dim>> facet_barycentric(const TPSSOperator<Dim> &op, int gamma)
{
  std::vector<std::array<double, Dim>> out;
  for (int m : op.facets[gamma - 1].nodes) {
    const auto lam = reference_barycentric<Dim>(op.nodes[static_cast<std::size_t>(m)]);
    std::array<double, Dim> b{};
    int pos = 0;
    for (int a = 0; a <= Dim; ++a)
      if (a != gamma - 1)
        b[pos++] = lam[a];
    out.push_back(b);
  }
  return out;
}

/// Node correspondence across a facet: entry f is the volume index on side B
/// of side A's facet node f.
template <int Dim>
std::vector<int> facet_node_table(const TPSSOperator<Dim> &op, int gamma_a, int gamma_b, const std::array<int, Dim> &perm)
{
  const auto ba = facet_barycentric(op, gamma_a);
  const auto bb = facet_barycentric(op, gamma_b);
  const auto &nodes_b = op.facets[gamma_b - 1].nodes;
  std::vector<int> table(ba.size(), -1);
  for (std::size_t f = 0; f < ba.size(); ++f) {
    std::array<double, Dim> target{};
    for (int a = 0; a < Dim; ++a)
      target[perm[a]] = ba[f][a];
    for (std::size_t g = 0; g < bb.size(); ++g) {
      double dev = 0.0;
      for (int a = 0; a < Dim; ++a)
        dev = std::max(dev, std::abs(bb[g][a] - target[a]));
      if (dev <= 1e-10) {
        table[f] = nodes_b[g];
        break;
      }
    }
    if (table[f] < 0)
      throw Error(ErrorKind::config, "facet node permutation mismatch between facets " + std::to_string(gamma_a) +
                                         " and " + std::to_string(gamma_b));
  }
  return table;
}

} // namespace detail

template <int Dim>
AdvectionSystem<Dim> build_system(const Mesh<Dim> &mesh, std::shared_ptr<const TPSSOperator<Dim>> op, const Point<Dim> &c)
{
  AdvectionSystem<Dim> s;
  s.op = op;
  s.c = c;
  s.n_e = mesh.num_elements();
  s.n_p = op->n_p;
  s.Hinv = op->H.cwiseInverse();

  // Union pattern of the reference derivative operators.
  const double drop = 1e-14;
  s.row_ptr.assign(1, 0);
  for (int r = 0; r < s.n_p; ++r) {
    std::map<int, std::array<double, Dim>> row;
    for (int j = 0; j < Dim; ++j)
      for (SparseMatrix::InnerIterator it(op->D[j], r); it; ++it)
        if (std::abs(it.value()) > drop)
          row[it.col()][j] = it.value();
    for (const auto &[cidx, v] : row) {
      s.col.push_back(cidx);
      for (int j = 0; j < Dim; ++j)
        s.val[j].push_back(v[j]);
    }
    s.row_ptr.push_back(static_cast<int>(s.col.size()));
  }

  s.coef.resize(s.n_e);
  s.Jdet.resize(s.n_e);
  s.links.resize(s.n_e);
  s.nodes.resize(static_cast<std::size_t>(s.dof()));
  s.Hk.resize(s.dof());
  s.h_min = std::numeric_limits<double>::infinity();
  std::vector<AffineGeometry<Dim>> geo;
  geo.reserve(s.n_e);
  for (int k = 0; k < s.n_e; ++k) {
    const auto verts = mesh.element_vertices(k);
    geo.push_back(affine_geometry<Dim>(verts, k));
    const auto &g = geo.back();
    s.Jdet[k] = g.Jdet;
    s.h_min = std::min(s.h_min, nominal_size<Dim>(verts));
    for (int j = 0; j < Dim; ++j) {
      double a = 0.0;
      for (int i = 0; i < Dim; ++i)
        a += c[i] * g.G[j][i];
      s.coef[k][j] = a;
    }
    for (int m = 0; m < s.n_p; ++m) {
      const auto idx = static_cast<std::size_t>(k) * s.n_p + m;
      s.nodes[idx] = g.map(op->nodes[static_cast<std::size_t>(m)]);
      s.Hk(static_cast<Eigen::Index>(idx)) = g.Jdet * op->H(m);
    }
    for (int f = 0; f <= Dim; ++f) {
      const auto N = g.scaled_normal(f + 1);
      double cn = 0.0;
      for (int i = 0; i < Dim; ++i)
        cn += c[i] * N[i];
      s.links[k][f].cn = cn;
    }
  }

  std::map<std::tuple<int, int, std::array<int, Dim>>, int> table_index;
  auto table_for = [&](int ga, int gb, const std::array<int, Dim> &perm) {
    const auto key = std::make_tuple(ga, gb, perm);
    if (auto it = table_index.find(key); it != table_index.end())
      return it->second;
    s.node_tables.push_back(detail::facet_node_table<Dim>(*op, ga, gb, perm));
    const int id = static_cast<int>(s.node_tables.size()) - 1;
    table_index.emplace(key, id);
    return id;
  };

  std::vector<int> linked(static_cast<std::size_t>(s.n_e) * (Dim + 1), 0);
  const double tol = 1e-10 * mesh.box_size();
  for (const auto &itf : mesh.interfaces) {
    std::array<int, Dim> inv{};
    for (int a = 0; a < Dim; ++a)
      inv[itf.perm[a]] = a;
    auto &la = s.links[itf.elem_a][itf.facet_a];
    la.neighbor = itf.elem_b;
    la.table = table_for(itf.facet_a + 1, itf.facet_b + 1, itf.perm);
    auto &lb = s.links[itf.elem_b][itf.facet_b];
    lb.neighbor = itf.elem_a;
    lb.table = table_for(itf.facet_b + 1, itf.facet_a + 1, inv);
    ++linked[static_cast<std::size_t>(itf.elem_a) * (Dim + 1) + itf.facet_a];
    ++linked[static_cast<std::size_t>(itf.elem_b) * (Dim + 1) + itf.facet_b];

    // Physical check of the node correspondence.
    const auto &fa = op->facets[itf.facet_a].nodes;
    const auto &tab = s.node_tables[static_cast<std::size_t>(la.table)];
    for (std::size_t f = 0; f < fa.size(); ++f) {
      const auto &xa = s.nodes[static_cast<std::size_t>(itf.elem_a) * s.n_p + fa[f]];
      const auto &xb = s.nodes[static_cast<std::size_t>(itf.elem_b) * s.n_p + tab[f]];
      for (int i = 0; i < Dim; ++i)
        if (std::abs(xa[i] + itf.shift[i] - xb[i]) > tol)
          throw Error(ErrorKind::config, "interface nodes of elements " + std::to_string(itf.elem_a) + " and " +
                                             std::to_string(itf.elem_b) + " do not coincide");
    }
  }
  for (std::size_t i = 0; i < linked.size(); ++i)
    if (linked[i] != 1)
      throw Error(ErrorKind::config, "element " + std::to_string(i / (Dim + 1)) + " facet " +
                                         std::to_string(i % (Dim + 1)) + " has no unique interface");
  return s;
}

/// du/dt = -sum_i c_i D_x_i u + H_k^{-1} sum_gamma R^T tau (u_nb - u) per element.
/// Rows of D_xi sum to zero, so the volume term is evaluated as
/// sum_e w_e (u_col - u_row); constant states then give an exactly zero residual.
template <int Dim>
void residual(const AdvectionSystem<Dim> &s, SatKind sat, const Vector &u, Vector &r)
{
  const int np = s.n_p;
  const auto &facets = s.op->facets;
  r.resize(u.size());
#pragma omp parallel for schedule(static)
  for (int k = 0; k < s.n_e; ++k) {
    const double *uk = u.data() + static_cast<std::ptrdiff_t>(k) * np;
    double *rk = r.data() + static_cast<std::ptrdiff_t>(k) * np;
    const auto &a = s.coef[k];
    for (int m = 0; m < np; ++m) {
      double acc = 0.0;
      for (int e = s.row_ptr[m]; e < s.row_ptr[m + 1]; ++e) {
        double w = 0.0;
        for (int j = 0; j < Dim; ++j)
          w += a[j] * s.val[j][e];
        acc += w * (uk[s.col[e]] - uk[m]);
      }
      rk[m] = -acc;
    }
    const double inv_j = 1.0 / s.Jdet[k];
    for (int f = 0; f <= Dim; ++f) {
      const auto &link = s.links[k][f];
      const auto &fn = facets[f].nodes;
      const auto &B = facets[f].B;
      const auto &tab = s.node_tables[static_cast<std::size_t>(link.table)];
      const double *un = u.data() + static_cast<std::ptrdiff_t>(link.neighbor) * np;
      for (std::size_t q = 0; q < fn.size(); ++q) {
        const double an = B(static_cast<Eigen::Index>(q)) * link.cn;
        const double tau = sat == SatKind::upwind ? std::max(-an, 0.0) : -0.5 * an;
        const int m = fn[q];
        rk[m] += tau * (un[tab[q]] - uk[m]) * inv_j * s.Hinv(m);
      }
    }
  }
}

template <int Dim>
double energy(const AdvectionSystem<Dim> &s, const Vector &u)
{
  return u.dot(s.Hk.cwiseProduct(u));
}

/// Workspace of the low-storage classical RK4 update.
struct RK4Workspace {
  Vector acc, tmp, k;
};

/// Classical 4-stage Runge-Kutta step u <- u + dt/6 (k1 + 2 k2 + 2 k3 + k4).
template <class F>
void rk4_step(Vector &u, double dt, F &&f, RK4Workspace &w)
{
  if (!(dt >= 0.0))
    throw Error(ErrorKind::config, "time step must be nonnegative");
  w.acc = u;
  f(u, w.k);
  w.acc += (dt / 6.0) * w.k;
  w.tmp = u + (0.5 * dt) * w.k;
  f(w.tmp, w.k);
  w.acc += (dt / 3.0) * w.k;
  w.tmp = u + (0.5 * dt) * w.k;
  f(w.tmp, w.k);
  w.acc += (dt / 3.0) * w.k;
  w.tmp = u + dt * w.k;
  f(w.tmp, w.k);
  w.acc += (dt / 6.0) * w.k;
  u.swap(w.acc);
  if (!u.allFinite())
    throw Error(ErrorKind::numerical, "non-finite state after RK4 step");
}

template <int Dim>
Vector project_exact(const AdvectionSystem<Dim> &s, double t, int omega)
{
  Vector u(s.dof());
  for (Eigen::Index i = 0; i < u.size(); ++i)
    u(i) = exact_solution<Dim>(s.nodes[static_cast<std::size_t>(i)], t, s.c, omega);
  return u;
}

struct SolveReport {
  double h_norm_error = 0.0;
  double linf_error = 0.0;
  std::vector<std::pair<double, double>> energy; ///< (t, E)
  double wall_seconds = 0.0;
  long steps = 0;
  double dt = 0.0;
  double t_final = 0.0;
  bool aborted = false;
  int n_e = 0;
  long dof = 0;
};

/// Constant-dt march of n steps from the projected initial condition.
template <int Dim>
SolveReport march(const AdvectionSystem<Dim> &s, const AdvectionConfig<Dim> &cfg, double dt, long steps)
{
  const auto t0 = std::chrono::steady_clock::now();
  SolveReport rep;
  rep.dt = dt;
  rep.n_e = s.n_e;
  rep.dof = s.dof();
  Vector u = project_exact(s, 0.0, cfg.omega);
  const double e0 = energy(s, u);
  rep.energy.emplace_back(0.0, e0);
  RK4Workspace w;
  auto f = [&](const Vector &x, Vector &out) { residual(s, cfg.sat, x, out); };
  double t = 0.0;
  for (long n = 0; n < steps; ++n) {
    try {
      rk4_step(u, dt, f, w);
    } catch (const Error &) {
      rep.aborted = true;
      break;
    }
    t = dt * static_cast<double>(n + 1);
    ++rep.steps;
    const double e = energy(s, u);
    if (cfg.record_energy || n + 1 == steps)
      rep.energy.emplace_back(t, e);
    if (!std::isfinite(e) || e > cfg.energy_growth_limit * e0) {
      if (!cfg.record_energy)
        rep.energy.emplace_back(t, e);
      rep.aborted = true;
      break;
    }
  }
  rep.t_final = t;
  const Vector err = u - project_exact(s, t, cfg.omega);
  rep.h_norm_error = std::sqrt(err.dot(s.Hk.cwiseProduct(err)));
  rep.linf_error = err.cwiseAbs().maxCoeff();
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

/// Runs to T_final with dt = cfg.dt, or CFL h_min / |c| shortened to land on T_final.
template <int Dim>
SolveReport solve(const AdvectionSystem<Dim> &s, const AdvectionConfig<Dim> &cfg)
{
  if (!(cfg.T_final >= 0.0))
    throw Error(ErrorKind::config, "final time must be nonnegative");
  const double dt_req = cfg.dt > 0.0 ? cfg.dt : cfg.effective_cfl() * s.h_min / cfg.speed();
  if (!(dt_req > 0.0))
    throw Error(ErrorKind::config, "time step must be positive");
  const long steps = static_cast<long>(std::ceil(cfg.T_final / dt_req - 1e-12));
  const double dt = steps > 0 ? cfg.T_final / static_cast<double>(steps) : 0.0;
  return march(s, cfg, dt, steps);
}

template <int Dim>
SolveReport solve(const Mesh<Dim> &mesh, const AdvectionConfig<Dim> &cfg)
{
  return solve(build_system<Dim>(mesh, operator_for(cfg), cfg.c), cfg);
}

struct ConvergenceRow {
  std::string mesh;
  int n_e = 0;
  long dof = 0;
  double h = 0.0; ///< n_e^{-1/d}
  double h_norm_error = 0.0;
  double linf_error = 0.0;
  double rate = std::numeric_limits<double>::quiet_NaN();
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  double slope = std::numeric_limits<double>::quiet_NaN();
  bool defined = false;
};

/// Per-pair rates and the least-squares slope of log(error) against log(h).
/// Non-positive or non-finite errors leave the rates undefined.
inline void fill_rates(ConvergenceTable &t)
{
  bool ok = t.rows.size() >= 2;
  for (const auto &r : t.rows)
    ok = ok && std::isfinite(r.h_norm_error) && r.h_norm_error > 0.0;
  t.defined = ok;
  if (!ok)
    return;
  for (std::size_t i = 1; i < t.rows.size(); ++i) {
    auto &a = t.rows[i - 1];
    auto &b = t.rows[i];
    b.rate = std::log(a.h_norm_error / b.h_norm_error) / std::log(a.h / b.h);
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(t.rows.size());
  for (const auto &r : t.rows) {
    const double x = std::log(r.h), y = std::log(r.h_norm_error);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  t.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

template <int Dim>
ConvergenceTable convergence_study(const AdvectionConfig<Dim> &cfg, const std::vector<std::pair<std::string, Mesh<Dim>>> &meshes)
{
  if (meshes.size() < 3)
    throw Error(ErrorKind::config, "a convergence study needs at least 3 meshes");
  const auto op = operator_for(cfg);
  ConvergenceTable t;
  for (const auto &[name, mesh] : meshes) {
    const auto sys = build_system<Dim>(mesh, op, cfg.c);
    auto run_cfg = cfg;
    run_cfg.record_energy = false;
    const auto rep = solve(sys, run_cfg);
    if (rep.aborted)
      throw Error(ErrorKind::numerical, "unstable run on mesh " + name);
    ConvergenceRow row;
    row.mesh = name;
    row.n_e = sys.n_e;
    row.dof = sys.dof();
    row.h = std::pow(static_cast<double>(sys.n_e), -1.0 / Dim);
    row.h_norm_error = rep.h_norm_error;
    row.linf_error = rep.linf_error;
    t.rows.push_back(row);
  }
  fill_rates(t);
  return t;
}

struct MaxDtProbe {
  double dt = 0.0;
  double energy_change = 0.0;
  bool stable = false;
};

struct MaxDtResult {
  double dt_max = 0.0;
  double lo = 0.0, hi = 0.0;
  std::vector<MaxDtProbe> trace;
};

/// Energy predicate E(T_test) - E(0) <= 0 with constant dt over ceil(T_test/dt) steps.
template <int Dim>
MaxDtProbe energy_probe(const AdvectionSystem<Dim> &s, const AdvectionConfig<Dim> &cfg, double dt, double T_test)
{
  auto run_cfg = cfg;
  run_cfg.record_energy = false;
  const long steps = static_cast<long>(std::ceil(T_test / dt - 1e-12));
  const auto rep = march(s, run_cfg, dt, steps);
  MaxDtProbe p;
  p.dt = dt;
  p.energy_change = rep.energy.back().second - rep.energy.front().second;
  p.stable = !rep.aborted && std::isfinite(p.energy_change) && p.energy_change <= 0.0;
  return p;
}

/// Golden-section search on f(dt) = -dt if stable, +dt otherwise, whose
/// minimiser is the stability boundary. The bracket is widened by doubling
/// (or halving) until lo is stable and hi unstable.
template <int Dim>
MaxDtResult max_stable_dt(const AdvectionSystem<Dim> &s, const AdvectionConfig<Dim> &cfg, double T_test, double lo,
                          double hi, double rel_width = 1e-3)
{
  if (!(lo > 0.0) || !(hi > lo))
    throw Error(ErrorKind::config, "max-dt bracket needs 0 < dt_lo < dt_hi");
  if (!(T_test > 0.0))
    throw Error(ErrorKind::config, "test time must be positive");
  MaxDtResult res;
  auto probe = [&](double dt) {
    res.trace.push_back(energy_probe(s, cfg, dt, T_test));
    return res.trace.back();
  };
  auto value = [](const MaxDtProbe &p) { return p.stable ? -p.dt : p.dt; };

  double best = 0.0;
  int expand = 0;
  while (!probe(lo).stable) {
    if (++expand > 60)
      throw Error(ErrorKind::numerical, "no stable time step found while shrinking the bracket");
    hi = lo;
    lo *= 0.5;
  }
  best = lo;
  expand = 0;
  while (true) {
    const auto p = probe(hi);
    if (!p.stable)
      break;
    if (++expand > 60)
      throw Error(ErrorKind::numerical, "bracket expansion failed after 60 doublings");
    best = hi;
    lo = hi;
    hi *= 2.0;
  }

  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - ratio * (b - a), d = a + ratio * (b - a);
  auto pc = probe(c), pd = probe(d);
  while ((b - a) / b > rel_width) {
    if (pc.stable)
      best = std::max(best, c);
    if (pd.stable)
      best = std::max(best, d);
    if (value(pc) <= value(pd)) {
      b = d;
      d = c;
      pd = pc;
      c = b - ratio * (b - a);
      pc = probe(c);
    } else {
      a = c;
      c = d;
      pc = pd;
      d = a + ratio * (b - a);
      pd = probe(d);
    }
  }
  if (pc.stable)
    best = std::max(best, c);
  if (pd.stable)
    best = std::max(best, d);
  res.lo = a;
  res.hi = b;
  res.dt_max = best;
  return res;
}

/// Sets the OpenMP thread count; 0 leaves the runtime default.
inline void set_threads(int n)
{
#ifdef _OPENMP
  if (n > 0)
    omp_set_num_threads(n);
#else
  (void)n;
#endif
}

} // namespace tpss
