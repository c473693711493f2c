// Command-line driver: build, verify, mesh, solve, converge, maxdt, sparsity.

#include "tpss/tpss.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace tpss;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_validation = 1;
constexpr int exit_numerical = 2;

struct Options {
  int dim = 2;
  std::string family = "lgl";
  int p = 1;
  int n1 = 0;
  int threads = 0;
  std::string out_dir;

  // build / verify
  std::string out_path;
  std::string operator_file;

  // mesh
  int N = 4;
  int Ny = 0;
  double alpha = -1.0;
  std::string diagonal = "rising";
  std::string mesh_file;

  // advection
  int omega = 0;
  double T = 1.0;
  double cfl = 0.0;
  double dt = 0.0;
  std::string sat = "upwind";
  std::vector<int> meshes;

  // maxdt
  double T_test = 5.0;
  double dt_lo = 1e-3;
  double dt_hi = 0.1;
  double rel_width = 1e-3;

  // sparsity
  int p_max = 0;
};

std::string default_out_dir()
{
  if (const char *env = std::getenv("TPSS_OUTPUT_DIR"); env && *env)
    return env;
  return ".";
}

fs::path output_path(const Options &o, const std::string &name)
{
  fs::path dir = o.out_dir.empty() ? default_out_dir() : o.out_dir;
  fs::create_directories(dir);
  return dir / name;
}

void write_file(const fs::path &path, const std::function<void(std::ostream &)> &body)
{
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw Error(ErrorKind::config, "cannot open " + path.string() + " for writing");
  body(os);
}

Family parse_family(const std::string &s)
{
  if (s == "lgl")
    return Family::lgl;
  if (s == "csbp")
    return Family::csbp;
  throw Error(ErrorKind::config, "unknown family '" + s + "'");
}

/// 1D node count for the requested family and degree. CSBP is only offered
/// at its interior order 2, which the CLI labels p = 1.
int resolve_n1(const Options &o)
{
  const Family f = parse_family(o.family);
  if (f == Family::csbp) {
    if (o.p != 1)
      throw Error(ErrorKind::config, "CSBP-TPSS is limited to p = 1");
    return o.n1 > 0 ? o.n1 : 8;
  }
  if (o.p < 1)
    throw Error(ErrorKind::config, "LGL-TPSS needs p >= 1");
  return o.n1 > 0 ? o.n1 : lgl_n1_for_degree(o.dim, o.p);
}

std::string tag(const Options &o)
{
  return o.family + "_d" + std::to_string(o.dim) + "_p" + std::to_string(o.p);
}

void print_report(const VerificationReport &r)
{
  for (const auto &c : r.checks)
    std::printf("  %-4s %-42s value %.4e  tol %.1e\n", c.passed ? "ok" : "FAIL", c.name.c_str(), c.value, c.tolerance);
}

template <int Dim>
int cmd_build(const Options &o)
{
  const auto op = assemble<Dim>(parse_family(o.family), resolve_n1(o));
  const auto sp = sparsity_stats(op);
  const fs::path path = o.out_path.empty() ? output_path(o, "operator_" + tag(o) + ".txt") : fs::path(o.out_path);
  write_file(path, [&](std::ostream &os) { write_operator(os, op); });
  std::printf("family %s  d = %d  n1 = %d  degree p = %d\n", to_string(op.family), Dim, op.n1, op.p);
  std::printf("n_p = %d\n", op.n_p);
  std::printf("nnz(D) = %ld  (estimate %ld)\n", sp.nnz_actual, sp.nnz_estimate);
  std::printf("sparsity = %.4f  (formula %.4f)\n", sp.s_actual, sp.s_formula);
  std::printf("written %s\n", path.string().c_str());
  return exit_ok;
}

template <int Dim>
int cmd_verify(const Options &o, TPSSOperator<Dim> op)
{
  std::printf("verify family %s  d = %d  n1 = %d  p = %d  n_p = %d\n", to_string(op.family), Dim, op.n1, op.p, op.n_p);
  const auto rep = verify_tpss(op);
  print_report(rep);
  for (int q = 0; q <= op.p + 1; ++q) {
    const double e = derivative_error_at_degree<Dim>(op.D, op.nodes, q);
    std::printf("  degree %d monomials: max derivative error %.3e (%s)\n", q, e, e <= 1e-10 ? "exact" : "inexact");
  }
  (void)o;
  if (const auto *bad = rep.first_failure()) {
    std::printf("FAILED: %s\n", bad->name.c_str());
    return exit_numerical;
  }
  std::printf("all checks passed\n");
  return exit_ok;
}

Mesh<2> make_mesh_2d(const Options &o)
{
  if (!o.mesh_file.empty()) {
    std::ifstream is(o.mesh_file);
    if (!is)
      throw Error(ErrorKind::config, "cannot open mesh file " + o.mesh_file);
    return read_mesh<2>(is);
  }
  TriDiagonal diag = TriDiagonal::rising;
  if (o.diagonal == "falling")
    diag = TriDiagonal::falling;
  else if (o.diagonal != "rising")
    throw Error(ErrorKind::config, "diagonal must be rising or falling");
  auto m = uniform_tri_mesh(o.N, o.Ny > 0 ? o.Ny : o.N, {1.0, 1.0}, diag);
  return o.alpha >= 0.0 ? perturb_mesh_2d(m, o.alpha) : m;
}

Mesh<3> make_mesh_3d(const Options &o)
{
  if (!o.mesh_file.empty()) {
    std::ifstream is(o.mesh_file);
    if (!is)
      throw Error(ErrorKind::config, "cannot open mesh file " + o.mesh_file);
    return read_mesh<3>(is);
  }
  auto m = uniform_tet_mesh(o.N);
  return o.alpha >= 0.0 ? perturb_mesh_3d(m, o.alpha) : m;
}

template <int Dim>
Mesh<Dim> make_mesh(const Options &o)
{
  if constexpr (Dim == 2)
    return make_mesh_2d(o);
  else
    return make_mesh_3d(o);
}

template <int Dim>
int cmd_mesh(const Options &o)
{
  const auto m = make_mesh<Dim>(o);
  const auto rep = verify_mesh(m);
  const auto q = quality_report(m);
  const std::string base = "mesh_d" + std::to_string(Dim) + "_N" + std::to_string(o.N) +
                           (o.alpha >= 0.0 ? "_a" + fmt17(o.alpha) : std::string());
  const fs::path mpath = o.out_path.empty() ? output_path(o, base + ".txt") : fs::path(o.out_path);
  write_file(mpath, [&](std::ostream &os) { write_mesh(os, m); });
  const fs::path qpath = output_path(o, base + "_quality.csv");
  write_file(qpath, [&](std::ostream &os) { write_quality_csv(os, q); });
  std::printf("elements %d  interfaces %zu  vertices %zu\n", m.num_elements(), m.interfaces.size(), m.vertices.size());
  std::printf("max aspect ratio %.5g\n", q.max_aspect_ratio);
  if (Dim == 2)
    std::printf("max interior angle %.5g deg\n", q.max_interior_angle);
  print_report(rep);
  std::printf("written %s, %s\n", mpath.string().c_str(), qpath.string().c_str());
  return rep.passed() ? exit_ok : exit_numerical;
}

template <int Dim>
AdvectionConfig<Dim> advection_config(const Options &o)
{
  AdvectionConfig<Dim> cfg;
  cfg.family = parse_family(o.family);
  cfg.p = o.p;
  cfg.n1 = resolve_n1(o);
  if (o.omega > 0)
    cfg.omega = o.omega;
  cfg.T_final = o.T;
  cfg.cfl = o.cfl;
  cfg.dt = o.dt;
  if (o.sat == "upwind")
    cfg.sat = SatKind::upwind;
  else if (o.sat == "central")
    cfg.sat = SatKind::central;
  else
    throw Error(ErrorKind::config, "sat must be upwind or central");
  return cfg;
}

template <int Dim>
int cmd_solve(const Options &o)
{
  const auto cfg = advection_config<Dim>(o);
  const auto mesh = make_mesh<Dim>(o);
  const auto sys = build_system<Dim>(mesh, operator_for(cfg), cfg.c);
  const auto rep = solve(sys, cfg);
  const fs::path path = output_path(o, "energy_" + tag(o) + "_N" + std::to_string(o.N) + ".csv");
  write_file(path, [&](std::ostream &os) { write_energy_csv(os, rep); });
  std::printf("elements %d  dof %ld  steps %ld  dt %.4e  t %.4g\n", rep.n_e, rep.dof, rep.steps, rep.dt, rep.t_final);
  std::printf("H-norm error %.4e  Linf error %.4e\n", rep.h_norm_error, rep.linf_error);
  std::printf("energy change %.4e  wall %.3f s\n", rep.energy.back().second - rep.energy.front().second,
              rep.wall_seconds);
  std::printf("written %s\n", path.string().c_str());
  if (rep.aborted) {
    std::printf("run aborted: energy growth or non-finite state\n");
    return exit_numerical;
  }
  return exit_ok;
}

template <int Dim>
int cmd_converge(const Options &o)
{
  if (o.meshes.size() < 3)
    throw Error(ErrorKind::config, "--meshes needs at least 3 sizes");
  const auto cfg = advection_config<Dim>(o);
  std::vector<std::pair<std::string, Mesh<Dim>>> seq;
  for (int n : o.meshes) {
    auto oo = o;
    oo.N = n;
    oo.Ny = 0;
    seq.emplace_back(std::to_string(n), make_mesh<Dim>(oo));
  }
  const auto t = convergence_study(cfg, seq);
  const fs::path path = output_path(o, "errors_" + tag(o) + ".csv");
  write_file(path, [&](std::ostream &os) { write_error_table_csv(os, t); });
  std::printf("%6s %8s %10s %12s %12s %6s\n", "mesh", "n_e", "dof", "H-norm", "Linf", "rate");
  for (const auto &r : t.rows)
    std::printf("%6s %8d %10ld %12.4e %12.4e %6.2f\n", r.mesh.c_str(), r.n_e, r.dof, r.h_norm_error, r.linf_error,
                r.rate);
  if (t.defined)
    std::printf("least-squares rate %.3f\n", t.slope);
  else
    std::printf("least-squares rate undefined\n");
  std::printf("written %s\n", path.string().c_str());
  return exit_ok;
}

template <int Dim>
int cmd_maxdt(const Options &o)
{
  if (!(o.dt_hi > o.dt_lo))
    throw Error(ErrorKind::config, "--dt-hi must exceed --dt-lo");
  auto cfg = advection_config<Dim>(o);
  cfg.sat = SatKind::upwind;
  const auto mesh = make_mesh<Dim>(o);
  const auto sys = build_system<Dim>(mesh, operator_for(cfg), cfg.c);
  const auto res = max_stable_dt(sys, cfg, o.T_test, o.dt_lo, o.dt_hi, o.rel_width);
  const fs::path path = output_path(o, "maxdt_" + tag(o) + "_N" + std::to_string(o.N) + ".csv");
  write_file(path, [&](std::ostream &os) { write_maxdt_trace_csv(os, res); });
  std::printf("max stable dt %.4e  (bracket [%.6e, %.6e], %zu runs)\n", res.dt_max, res.lo, res.hi, res.trace.size());
  std::printf("written %s\n", path.string().c_str());
  return exit_ok;
}

template <int Dim>
int cmd_sparsity(const Options &o)
{
  const int p_hi = std::max(o.p, o.p_max);
  const fs::path path = output_path(o, "sparsity_" + o.family + "_d" + std::to_string(Dim) + ".csv");
  std::ostringstream csv;
  csv << "p,n1,n_p,nnz,nnz_estimate,sparsity,sparsity_formula\n";
  std::printf("%4s %4s %7s %9s %9s %9s %9s\n", "p", "n1", "n_p", "nnz", "estimate", "s", "formula");
  for (int p = o.p; p <= p_hi; ++p) {
    auto oo = o;
    oo.p = p;
    const auto op = assemble<Dim>(parse_family(o.family), resolve_n1(oo));
    const auto sp = sparsity_stats(op);
    std::printf("%4d %4d %7d %9ld %9ld %9.4f %9.4f\n", p, op.n1, op.n_p, sp.nnz_actual, sp.nnz_estimate, sp.s_actual,
                sp.s_formula);
    csv << p << ',' << op.n1 << ',' << op.n_p << ',' << sp.nnz_actual << ',' << sp.nnz_estimate << ','
        << fmt17(sp.s_actual) << ',' << fmt17(sp.s_formula) << "\n";
  }
  write_file(path, [&](std::ostream &os) { os << csv.str(); });
  std::printf("written %s\n", path.string().c_str());
  return exit_ok;
}

template <int Dim>
int dispatch(const std::string &cmd, const Options &o)
{
  set_threads(o.threads);
  if (cmd == "build")
    return cmd_build<Dim>(o);
  if (cmd == "verify") {
    if (!o.operator_file.empty()) {
      std::ifstream is(o.operator_file);
      if (!is)
        throw Error(ErrorKind::config, "cannot open operator file " + o.operator_file);
      if (read_operator_dimension(is) != Dim)
        throw Error(ErrorKind::config, "operator file dimension differs from -d");
      return cmd_verify<Dim>(o, read_operator_body<Dim>(is));
    }
    return cmd_verify<Dim>(o, assemble<Dim>(parse_family(o.family), resolve_n1(o)));
  }
  if (cmd == "mesh")
    return cmd_mesh<Dim>(o);
  if (cmd == "solve")
    return cmd_solve<Dim>(o);
  if (cmd == "converge")
    return cmd_converge<Dim>(o);
  if (cmd == "maxdt")
    return cmd_maxdt<Dim>(o);
  if (cmd == "sparsity")
    return cmd_sparsity<Dim>(o);
  throw Error(ErrorKind::config, "unknown command " + cmd);
}

void add_operator_options(CLI::App *sub, Options &o)
{
  sub->add_option("-d,--dim", o.dim, "spatial dimension (2 or 3)")->check(CLI::IsMember({2, 3}));
  sub->add_option("--family", o.family, "lgl or csbp")->check(CLI::IsMember({"lgl", "csbp"}));
  sub->add_option("-p,--degree", o.p, "TPSS degree (CSBP: 1 only)");
  sub->add_option("--n1", o.n1, "1D node count override");
  sub->add_option("--threads", o.threads, "OpenMP threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
  sub->add_option("-o,--out-dir", o.out_dir, "output directory (default $TPSS_OUTPUT_DIR or .)");
}

void add_mesh_options(CLI::App *sub, Options &o)
{
  sub->add_option("-N,--cells", o.N, "cells per direction (x1 for 2D)")->check(CLI::PositiveNumber);
  sub->add_option("--ny", o.Ny, "cells in x2 (2D, default = N)");
  sub->add_option("--alpha", o.alpha, "perturbation parameter alpha_m (omit for uniform)");
  sub->add_option("--diagonal", o.diagonal, "2D cell split: rising or falling")
      ->check(CLI::IsMember({"rising", "falling"}));
  sub->add_option("--mesh", o.mesh_file, "read the mesh from a file instead");
}

void add_advection_options(CLI::App *sub, Options &o)
{
  sub->add_option("--omega", o.omega, "wavenumber (default 8 in 2D, 2 in 3D)");
  sub->add_option("--T", o.T, "final time");
  sub->add_option("--cfl", o.cfl, "dt = cfl h_min / |c| (default 0.1/(p+1))");
  sub->add_option("--dt", o.dt, "fixed time step (overrides --cfl)");
  sub->add_option("--sat", o.sat, "upwind or central")->check(CLI::IsMember({"upwind", "central"}));
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Tensor-product split-simplex SBP operators: construction, verification and advection studies"};
  app.set_config("--config", "", "TOML/INI configuration file; command-line flags take precedence");
  app.require_subcommand(1);
  Options o;

  auto *build = app.add_subcommand("build", "assemble an operator and write it in exchange format");
  add_operator_options(build, o);
  build->add_option("--out", o.out_path, "operator file path");

  auto *verify = app.add_subcommand("verify", "run the invariant suite on a fresh or stored operator");
  add_operator_options(verify, o);
  verify->add_option("--operator", o.operator_file, "operator file to verify");

  auto *mesh = app.add_subcommand("mesh", "generate a periodic mesh, write it and its quality table");
  add_operator_options(mesh, o);
  add_mesh_options(mesh, o);
  mesh->add_option("--out", o.out_path, "mesh file path");

  auto *solve_cmd = app.add_subcommand("solve", "advect the sine-product wave to the final time");
  add_operator_options(solve_cmd, o);
  add_mesh_options(solve_cmd, o);
  add_advection_options(solve_cmd, o);

  auto *converge = app.add_subcommand("converge", "grid convergence study over uniform meshes");
  add_operator_options(converge, o);
  add_advection_options(converge, o);
  converge->add_option("--meshes", o.meshes, "cells per direction, comma separated")->delimiter(',')->required();
  converge->add_option("--diagonal", o.diagonal, "2D cell split: rising or falling")
      ->check(CLI::IsMember({"rising", "falling"}));

  auto *maxdt = app.add_subcommand("maxdt", "golden-section search for the largest energy-stable dt");
  add_operator_options(maxdt, o);
  add_mesh_options(maxdt, o);
  add_advection_options(maxdt, o);
  maxdt->add_option("--T-test", o.T_test, "test time of the energy criterion");
  maxdt->add_option("--dt-lo", o.dt_lo, "lower bracket");
  maxdt->add_option("--dt-hi", o.dt_hi, "upper bracket");
  maxdt->add_option("--rel-width", o.rel_width, "relative bracket width at termination")->check(CLI::PositiveNumber);

  auto *sparsity = app.add_subcommand("sparsity", "nonzero counts and sparsity of D");
  add_operator_options(sparsity, o);
  sparsity->add_option("--p-max", o.p_max, "sweep p up to this degree");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_validation;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    return o.dim == 2 ? dispatch<2>(cmd, o) : dispatch<3>(cmd, o);
  } catch (const Error &e) {
    std::fprintf(stderr, "%s\n", e.what());
    return e.kind() == ErrorKind::config || e.kind() == ErrorKind::mesh ? exit_validation : exit_numerical;
  } catch (const std::exception &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_numerical;
  }
}
