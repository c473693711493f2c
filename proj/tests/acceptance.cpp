// Acceptance run: one PASS/FAIL line per criterion, details indented below.
// Usage: acceptance [criterion numbers...]   (default: all)

#include "oracles.hpp"
#include "tpss/tpss.hpp"

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <set>
#include <string>

using namespace tpss;

namespace {

struct Outcome {
  bool passed = true;
  std::vector<std::string> details;

  void note(const char *fmt, ...) __attribute__((format(printf, 2, 3)))
  {
    char buf[512];
    va_list ap;
    va_start(ap, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, ap);
    va_end(ap);
    details.emplace_back(buf);
  }

  void require(bool ok, const char *fmt, ...) __attribute__((format(printf, 3, 4)))
  {
    char buf[512];
    va_list ap;
    va_start(ap, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, ap);
    va_end(ap);
    details.emplace_back(std::string(ok ? "ok   " : "FAIL ") + buf);
    passed = passed && ok;
  }
};

struct OperatorSet {
  std::vector<TPSSOperator<2>> d2;
  std::vector<TPSSOperator<3>> d3;
};

const OperatorSet &operators()
{
  static const OperatorSet set = [] {
    OperatorSet s;
    for (int p = 1; p <= 4; ++p) {
      s.d2.push_back(assemble<2>(Family::lgl, lgl_n1_for_degree(2, p)));
      s.d3.push_back(assemble<3>(Family::lgl, lgl_n1_for_degree(3, p)));
    }
    s.d2.push_back(assemble<2>(Family::csbp, 8));
    s.d2.push_back(assemble<2>(Family::csbp, 16));
    return s;
  }();
  return set;
}

template <int Dim>
std::string label(const TPSSOperator<Dim> &op)
{
  return std::string(to_string(op.family)) + " d=" + std::to_string(Dim) + " n1=" + std::to_string(op.n1) +
         " p=" + std::to_string(op.p);
}

template <class F>
void for_each_operator(F &&f)
{
  for (const auto &op : operators().d2)
    f(op);
  for (const auto &op : operators().d3)
    f(op);
}

// 1. SBP property, diagonal E, facet decomposition.
Outcome sbp_property()
{
  Outcome o;
  for_each_operator([&](const auto &op) {
    const auto r = verify_tpss(op);
    double sbp = 0, diag = 0, interior = 0, decomp = 0;
    for (const auto &c : r.checks) {
      if (c.name.rfind("SBP property", 0) == 0)
        sbp = std::max(sbp, c.value);
      else if (c.name.rfind("E diagonal", 0) == 0)
        diag = std::max(diag, c.value);
      else if (c.name.rfind("E zero at interior", 0) == 0)
        interior = std::max(interior, c.value);
      else if (c.name.rfind("E decomposition", 0) == 0)
        decomp = std::max(decomp, c.value);
    }
    o.require(sbp <= 1e-12 && diag == 0.0 && interior == 0.0 && decomp <= 1e-13,
              "%-22s |Q+Q^T-E| %.2e  offdiag(E) %.1e  interior(E) %.1e  |E-sum RBNR| %.2e", label(op).c_str(), sbp,
              diag, interior, decomp);
  });
  return o;
}

// 2. Exact through degree p, inexact at p+1.
Outcome accuracy_sharpness()
{
  Outcome o;
  for_each_operator([&](const auto &op) {
    constexpr int Dim = std::decay_t<decltype(op)>::dimension;
    double exact = 0.0;
    for (int q = 0; q <= op.p; ++q)
      exact = std::max(exact, derivative_error_at_degree<Dim>(op.D, op.nodes, q));
    const double next = derivative_error_at_degree<Dim>(op.D, op.nodes, op.p + 1);
    o.require(exact <= 1e-10 && next > 1e-6, "%-22s err(deg<=p) %.2e  err(deg p+1) %.2e", label(op).c_str(), exact,
              next);
  });
  o.note("csbp operators have degree p1d - d + 1 = 0 with p1d = 1");
  return o;
}

// 3. Node-count golden values.
Outcome node_counts()
{
  Outcome o;
  struct Case {
    int d, n1, expected;
    Family family;
  };
  for (const Case c : {Case{2, 3, 19, Family::lgl}, Case{2, 6, 91, Family::lgl}, Case{3, 4, 175, Family::lgl},
                       Case{2, 8, 169, Family::csbp}, Case{2, 16, 721, Family::csbp}}) {
    const int formula = tpss_node_count(c.d, c.n1);
    const int built = c.d == 2 ? assemble<2>(c.family, c.n1).n_p : assemble<3>(c.family, c.n1).n_p;
    o.require(formula == c.expected && built == c.expected, "%s d=%d n1=%d: formula %d, assembled %d, expected %d",
              to_string(c.family), c.d, c.n1, formula, built, c.expected);
  }
  return o;
}

// 4. Worked example on subdomain 2 of the n1 = 2 triangle build.
Outcome worked_example()
{
  Outcome o;
  const Matrix printed_local = (Matrix(4, 4) << -0.1667, 0.2083, -0.0417, 0, //
                              -0.2083, 0.25, 0, -0.0417,                   //
                              0.0417, 0, -0.25, 0.2083,                    //
                              0, 0.0417, -0.2083, 0.1667)
                                 .finished();
  const Matrix printed_global = (Matrix(7, 7) << 0, 0, 0, 0, 0, 0, 0, //
                               0, -0.1667, 0, -0.0417, 0.2083, 0, 0, //
                               0, 0, 0, 0, 0, 0, 0,                  //
                               0, 0.0417, 0, -0.25, 0, 0.2083, 0,    //
                               0, -0.2083, 0, 0, 0.25, -0.0417, 0,   //
                               0, 0, 0, -0.2083, 0.0417, 0.1667, 0,  //
                               0, 0, 0, 0, 0, 0, 0)
                                  .finished();
  const auto t = tensor_product<2>(build_lgl_operator(2));
  const auto geom = split_vertices<2>()[1];
  const auto sub = subdomain_operators<2>(geom, jacobian_and_metrics<2>(geom, t), t);
  const double local = (Matrix(sub.Q[0]) - printed_local).cwiseAbs().maxCoeff();
  o.require(local < 5e-5, "Q_xi1 on subdomain %d: max deviation %.2e", geom.ell, local);

  // Global labels used by the printed matrix, by reference coordinate.
  const auto op = assemble<2>(Family::lgl, 2);
  const std::array<Point<2>, 7> labels{{{-1, -1}, {0, -1}, {-1, 0}, {-1.0 / 3, -1.0 / 3}, {1, -1}, {0, 0}, {-1, 1}}};
  std::vector<int> to_label(7, -1);
  for (int g = 0; g < op.n_p; ++g)
    for (int l = 0; l < 7; ++l)
      if (std::abs(op.nodes[g][0] - labels[l][0]) < 1e-12 && std::abs(op.nodes[g][1] - labels[l][1]) < 1e-12)
        to_label[g] = l;
  bool mapped = op.n_p == 7;
  for (int l : to_label)
    mapped = mapped && l >= 0;
  if (!mapped) {
    o.require(false, "global node relabeling could not be built");
    return o;
  }
  const Matrix Qg = scatter_subdomain(sub.Q[0], op.map.local_to_global[1], op.n_p);
  Matrix relabeled = Matrix::Zero(7, 7);
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j)
      relabeled(to_label[i], to_label[j]) = Qg(i, j);
  const double global = (relabeled - printed_global).cwiseAbs().maxCoeff();
  o.require(global < 5e-5, "scattered Q_g: max deviation %.2e", global);
  o.note("global labels: 1(-1,-1) 2(0,-1) 3(-1,0) 4(centroid) 5(1,-1) 6(0,0) 7(-1,1)");
  return o;
}

// 5. Norm quadrature through degree 2p - 1 against collapsed Gauss quadrature.
Outcome norm_quadrature()
{
  Outcome o;
  for_each_operator([&](const auto &op) {
    constexpr int Dim = std::decay_t<decltype(op)>::dimension;
    double worst = 0.0;
    for (int q = 0; q <= 2 * op.p - 1; ++q)
      for (const auto &a : monomials_of_degree<Dim>(q)) {
        double s = 0.0, scale = 0.0;
        for (int m = 0; m < op.n_p; ++m) {
          const double v = op.H(m) * monomial<Dim>(op.nodes[m], a);
          s += v;
          scale += std::abs(v);
        }
        const double exact = oracle::simplex_integral<Dim>(a, 2 * op.p + 4);
        worst = std::max(worst, std::abs(s - exact) / std::max(std::abs(exact), scale));
      }
    o.require(worst <= 1e-12, "%-22s degree <= %d: relative error %.2e", label(op).c_str(), 2 * op.p - 1, worst);
  });
  return o;
}

// 6. Metric identity per subdomain and freestream on distorted meshes.
Outcome freestream()
{
  Outcome o;
  auto subdomains = [&](auto dim_tag, Family family, int n1) {
    constexpr int Dim = decltype(dim_tag)::value;
    const auto t = tensor_product<Dim>(build_operator_1d(family, n1));
    double worst = 0.0;
    for (const auto &g : split_vertices<Dim>())
      worst = std::max(worst, metric_identity_residual<Dim>(jacobian_and_metrics<Dim>(g, t), t));
    o.require(worst <= 1e-12, "metric identity %s d=%d n1=%d: %.2e", to_string(family), Dim, n1, worst);
  };
  for (int p = 1; p <= 4; ++p) {
    subdomains(std::integral_constant<int, 2>{}, Family::lgl, p + 2);
    subdomains(std::integral_constant<int, 3>{}, Family::lgl, p + 3);
  }
  subdomains(std::integral_constant<int, 2>{}, Family::csbp, 8);

  const auto base2 = uniform_tri_mesh(10, 100);
  const char *names2[] = {"M1^2", "M2^2", "M3^2"};
  const double alpha2[] = {0.25, 2.5, 5.0};
  for (int m = 0; m < 3; ++m) {
    const auto mesh = perturb_mesh_2d(base2, alpha2[m]);
    for (int p = 1; p <= 4; ++p) {
      AdvectionConfig<2> cfg;
      cfg.p = p;
      const auto s = build_system<2>(mesh, operator_for(cfg), cfg.c);
      Vector r;
      residual(s, SatKind::upwind, Vector::Ones(s.dof()), r);
      const double res = r.cwiseAbs().maxCoeff();
      o.require(res <= 1e-12, "%s (alpha %.2f) p=%d: |r(1)| %.2e", names2[m], alpha2[m], p, res);
    }
  }
  const auto base3 = uniform_tet_mesh(6);
  const char *names3[] = {"M1^3", "M2^3"};
  const double alpha3[] = {0.03, 3.0};
  for (int m = 0; m < 2; ++m) {
    const auto mesh = perturb_mesh_3d(base3, alpha3[m]);
    for (int p = 1; p <= 2; ++p) {
      AdvectionConfig<3> cfg;
      cfg.p = p;
      const auto s = build_system<3>(mesh, operator_for(cfg), cfg.c);
      Vector r;
      residual(s, SatKind::upwind, Vector::Ones(s.dof()), r);
      const double res = r.cwiseAbs().maxCoeff();
      o.require(res <= 1e-12, "%s (alpha %.2f) p=%d: |r(1)| %.2e", names3[m], alpha3[m], p, res);
    }
  }
  return o;
}

// 7. Semi-discrete energy and conservation for random states.
template <int Dim>
void energy_cases(Outcome &o, const Mesh<Dim> &mesh, const char *name, int p_max)
{
  for (int p = 1; p <= p_max; ++p) {
    AdvectionConfig<Dim> cfg;
    cfg.p = p;
    const auto s = build_system<Dim>(mesh, operator_for(cfg), cfg.c);
    std::mt19937_64 rng(12345 + p);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    double central = 0.0, upwind = -std::numeric_limits<double>::infinity(), conservation = 0.0;
    Vector u(s.dof()), r;
    for (int k = 0; k < 100; ++k) {
      for (long i = 0; i < u.size(); ++i)
        u(i) = dist(rng);
      const double norm = u.dot(s.Hk.cwiseProduct(u));
      residual(s, SatKind::central, u, r);
      central = std::max(central, std::abs(2.0 * u.dot(s.Hk.cwiseProduct(r))) / norm);
      conservation = std::max(conservation, std::abs(s.Hk.dot(r)));
      residual(s, SatKind::upwind, u, r);
      upwind = std::max(upwind, 2.0 * u.dot(s.Hk.cwiseProduct(r)) / norm);
      conservation = std::max(conservation, std::abs(s.Hk.dot(r)));
    }
    o.require(central <= 1e-12 && upwind <= 1e-12 && conservation <= 1e-12,
              "%s p=%d, 100 states: central |2u'Hr|/|u|^2 %.2e, upwind max 2u'Hr/|u|^2 %.2e, |1'Hr| %.2e", name, p,
              central, upwind, conservation);
  }
}

Outcome semi_discrete_energy()
{
  Outcome o;
  energy_cases<2>(o, uniform_tri_mesh(4, 4), "tri(4,4)", 4);
  energy_cases<3>(o, uniform_tet_mesh(2), "tet(2)", 3);
  return o;
}

// 8. Convergence rates on the reference mesh rows.
template <int Dim>
ConvergenceTable run_rows(int p, const std::vector<int> &sizes)
{
  AdvectionConfig<Dim> cfg;
  cfg.p = p;
  cfg.record_energy = false;
  const auto op = operator_for(cfg);
  ConvergenceTable t;
  for (int n : sizes) {
    Mesh<Dim> mesh;
    if constexpr (Dim == 2)
      mesh = uniform_tri_mesh(n, n, {1.0, 1.0}, TriDiagonal::falling);
    else
      mesh = uniform_tet_mesh(n);
    const auto sys = build_system<Dim>(mesh, op, cfg.c);
    const auto rep = solve(sys, cfg);
    if (rep.aborted)
      throw Error(ErrorKind::numerical, "unstable run on mesh " + std::to_string(n));
    ConvergenceRow row;
    row.mesh = std::to_string(n) + (Dim == 2 ? "^2x2" : "^3x6");
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

Outcome convergence()
{
  Outcome o;
  struct Study {
    int d, p;
    std::vector<std::pair<int, double>> rows; // mesh size, reference H-norm error
  };
  // 2D p=1 has no second row at or below 40^2, so its first two rows are used.
  const std::vector<Study> studies{
      {2, 1, {{35, 2.9708e-03}, {46, 1.5749e-03}}},
      {2, 2, {{30, 2.8152e-04}, {40, 1.1773e-04}}},
      {2, 3, {{25, 2.7340e-05}, {34, 7.9314e-06}}},
      {3, 1, {{5, 1.8802e-03}, {10, 2.8595e-04}}},
      {3, 2, {{5, 1.5247e-04}, {10, 1.4808e-05}}},
  };
  for (const auto &st : studies) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<int> sizes;
    for (const auto &r : st.rows)
      sizes.push_back(r.first);
    const auto t = st.d == 2 ? run_rows<2>(st.p, sizes) : run_rows<3>(st.p, sizes);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double lo = st.p - 0.2, hi = st.p + 1.3;
    const double reference_rate = std::log(st.rows[0].second / st.rows[1].second) /
                                  std::log(t.rows[0].h / t.rows[1].h);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const auto &r = t.rows[i];
      const double ref = st.rows[i].second;
      if (i == 0)
        o.note("d=%d p=%d %-8s H-error %.4e  reference %.4e (ratio %.4f)", st.d, st.p, r.mesh.c_str(),
               r.h_norm_error, ref, r.h_norm_error / ref);
      else
        o.require(r.rate >= lo && r.rate <= hi,
                  "d=%d p=%d %-8s H-error %.4e  reference %.4e (ratio %.4f)  rate %.2f in [%.1f, %.1f], reference %.2f",
                  st.d, st.p, r.mesh.c_str(), r.h_norm_error, ref, r.h_norm_error / ref, r.rate, lo, hi,
                  reference_rate);
    }
    o.note("d=%d p=%d: %.1f s", st.d, st.p, secs);
    if (st.d == 3 && st.p == 2) {
      const double e = t.rows.front().h_norm_error, ref = 1.5247e-04;
      o.require(e <= 2 * ref && e >= ref / 2, "d=3 p=2 5^3x6 H-error %.4e within factor 2 of %.4e", e, ref);
    }
  }
  o.note("2D meshes use the falling cell diagonal");
  return o;
}

// 9. Maximum stable time step (soft).
Outcome max_dt()
{
  Outcome o;
  const double ref = 0.0312;
  for (const auto diag : {TriDiagonal::falling, TriDiagonal::rising}) {
    AdvectionConfig<2> cfg;
    cfg.p = 1;
    const auto s = build_system<2>(uniform_tri_mesh(4, 4, {1.0, 1.0}, diag), operator_for(cfg), cfg.c);
    const auto res = max_stable_dt(s, cfg, 5.0, 1e-3, 0.1);
    const double rel = std::abs(res.dt_max - ref) / ref;
    if (diag == TriDiagonal::falling)
      o.require(rel <= 0.2, "4x4 %s diagonal: dt_max %.5f vs %.4f (%.1f%%, %zu probes)", to_string(diag), res.dt_max,
                ref, 100 * rel, res.trace.size());
    else
      o.note("4x4 %s diagonal: dt_max %.5f vs %.4f (%.1f%%, %zu probes)", to_string(diag), res.dt_max, ref,
             100 * rel, res.trace.size());
  }
  return o;
}

// 10. Sparsity accounting.
template <int Dim>
void sparsity_case(Outcome &o, int p)
{
  const int n1 = lgl_n1_for_degree(Dim, p);
  const auto op = assemble<Dim>(Family::lgl, n1);
  const auto s = sparsity_stats(op);
  const double np = static_cast<double>(s.n_p);
  const double from_estimate = 1.0 - static_cast<double>(tpss_nnz_estimate(Dim, n1)) / (np * np);
  const double ratio = static_cast<double>(s.nnz_actual) / static_cast<double>(s.nnz_estimate);
  o.require(s.s_formula == tpss_sparsity_formula(Dim, n1) && std::abs(s.s_formula - from_estimate) <= 1e-15 &&
                ratio <= 1.5 && ratio >= 1.0 / 1.5,
            "d=%d p=%d n_p=%d: s formula %.6f, counted s %.6f, nnz %ld vs estimate %ld (x%.3f)", Dim, p, s.n_p,
            s.s_formula, s.s_actual, s.nnz_actual, s.nnz_estimate, ratio);
}

Outcome sparsity()
{
  Outcome o;
  for (int p = 1; p <= 4; ++p) {
    sparsity_case<2>(o, p);
    sparsity_case<3>(o, p);
  }
  const double s31 = tpss_sparsity_formula(3, lgl_n1_for_degree(3, 1));
  const double s310 = tpss_sparsity_formula(3, lgl_n1_for_degree(3, 10));
  o.require(s31 > 0.94, "d=3 p=1 sparsity %.4f > 0.94", s31);
  o.require(s310 > 0.995, "d=3 p=10 sparsity %.5f > 0.995", s310);
  return o;
}

struct Criterion {
  int id;
  const char *name;
  bool soft;
  Outcome (*run)();
};

} // namespace

int main(int argc, char **argv)
{
  const std::vector<Criterion> all{
      {1, "SBP property and diagonal E", false, sbp_property},
      {2, "accuracy degree is sharp", false, accuracy_sharpness},
      {3, "node-count golden values", false, node_counts},
      {4, "worked example Q^(2)", false, worked_example},
      {5, "norm quadrature degree 2p-1", false, norm_quadrature},
      {6, "metric invariants and freestream", false, freestream},
      {7, "semi-discrete energy and conservation", false, semi_discrete_energy},
      {8, "convergence rates", false, convergence},
      {9, "maximum stable time step (soft)", true, max_dt},
      {10, "sparsity accounting", false, sparsity},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i)
    selected.insert(std::atoi(argv[i]));

  int hard_failures = 0;
  for (const auto &c : all) {
    if (!selected.empty() && !selected.count(c.id))
      continue;
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception &e) {
      out.passed = false;
      out.note("exception: %s", e.what());
    }
    const char *tag = out.passed ? "PASS" : (c.soft ? "SOFT-FAIL" : "FAIL");
    std::printf("[%s] criterion %d: %s\n", tag, c.id, c.name);
    for (const auto &d : out.details)
      std::printf("    %s\n", d.c_str());
    std::fflush(stdout);
    if (!out.passed && !c.soft)
      ++hard_failures;
  }
  std::printf("%d hard failure(s)\n", hard_failures);
  return hard_failures == 0 ? 0 : 1;
}
