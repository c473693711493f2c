#pragma once

#include "tpss/common.hpp"
#include "tpss/split.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

namespace tpss {

/// One facet pairing. Facet f of an element is the facet opposite local
/// vertex f (0-based). The facet vertex list is the element's vertices
/// without f in increasing local order; `perm[a]` is the position in B's list
/// of the vertex matching A's vertex a, and x_B = x_A + shift.
template <int Dim>
struct Interface {
  int elem_a = -1, facet_a = -1, elem_b = -1, facet_b = -1;
  std::array<int, Dim> perm{};
  Point<Dim> shift{};
};

/// Fully periodic simplicial mesh on the box [0, L_1] x ... x [0, L_d].
template <int Dim>
struct Mesh {
  Point<Dim> box{};
  std::vector<Point<Dim>> vertices;
  std::vector<std::array<int, Dim + 1>> elements;
  std::vector<Interface<Dim>> interfaces;

  int num_elements() const { return static_cast<int>(elements.size()); }

  std::array<Point<Dim>, Dim + 1> element_vertices(int k) const
  {
    std::array<Point<Dim>, Dim + 1> v{};
    for (int a = 0; a <= Dim; ++a)
      v[a] = vertices[static_cast<std::size_t>(elements[k][a])];
    return v;
  }

  /// Facet vertex coordinates in facet-local order.
  std::array<Point<Dim>, Dim> facet_vertices(int k, int f) const
  {
    std::array<Point<Dim>, Dim> out{};
    int pos = 0;
    for (int a = 0; a <= Dim; ++a)
      if (a != f)
        out[pos++] = vertices[static_cast<std::size_t>(elements[k][a])];
    return out;
  }

  double box_size() const { return *std::max_element(box.begin(), box.end()); }
};

template <int Dim>
double simplex_volume(const std::array<Point<Dim>, Dim + 1> &v)
{
  std::array<std::array<double, Dim>, Dim> J{};
  for (int i = 0; i < Dim; ++i)
    for (int j = 0; j < Dim; ++j)
      J[i][j] = v[j + 1][i] - v[0][i];
  return determinant<Dim>(J) / (Dim == 2 ? 2.0 : 6.0);
}

/// Nominal element size (d! vol)^{1/d}; equals 1/N on the uniform meshes.
template <int Dim>
double nominal_size(const std::array<Point<Dim>, Dim + 1> &v)
{
  return std::pow((Dim == 2 ? 2.0 : 6.0) * simplex_volume<Dim>(v), 1.0 / Dim);
}

namespace detail {

template <int Dim>
Point<Dim> facet_centroid(const std::array<Point<Dim>, Dim> &fv)
{
  Point<Dim> c{};
  for (const auto &p : fv)
    for (int i = 0; i < Dim; ++i)
      c[i] += p[i] / Dim;
  return c;
}

/// Pairs every facet with its periodic partner. The key is the facet
/// centroid wrapped into the box, which identifies a facet uniquely in a
/// conforming complex even when the lattice is one cell wide.
template <int Dim>
void build_interfaces(Mesh<Dim> &mesh)
{
  const double scale = mesh.box_size();
  const double qtol = 1e-8 * scale;
  using Key = std::array<long long, Dim>;
  std::map<Key, std::pair<int, int>> open;
  mesh.interfaces.clear();

  auto key_of = [&](Point<Dim> c) {
    Key k{};
    for (int i = 0; i < Dim; ++i) {
      double w = std::fmod(c[i], mesh.box[i]);
      if (w < 0)
        w += mesh.box[i];
      long long q = std::llround(w / qtol);
      if (q == std::llround(mesh.box[i] / qtol))
        q = 0;
      k[i] = q;
    }
    return k;
  };

  for (int k = 0; k < mesh.num_elements(); ++k)
    for (int f = 0; f <= Dim; ++f) {
      const auto key = key_of(facet_centroid<Dim>(mesh.facet_vertices(k, f)));
      auto it = open.find(key);
      if (it == open.end()) {
        open.emplace(key, std::make_pair(k, f));
        continue;
      }
      const auto [kb, fb] = it->second;
      open.erase(it);
      // A is the later facet, B its earlier partner.
      Interface<Dim> itf;
      itf.elem_a = k;
      itf.facet_a = f;
      itf.elem_b = kb;
      itf.facet_b = fb;
      const auto va = mesh.facet_vertices(k, f);
      const auto vb = mesh.facet_vertices(kb, fb);
      const auto ca = facet_centroid<Dim>(va), cb = facet_centroid<Dim>(vb);
      for (int i = 0; i < Dim; ++i)
        itf.shift[i] = mesh.box[i] * std::round((cb[i] - ca[i]) / mesh.box[i]);
      for (int a = 0; a < Dim; ++a) {
        itf.perm[a] = -1;
        for (int b = 0; b < Dim; ++b) {
          double dev = 0.0;
          for (int i = 0; i < Dim; ++i)
            dev = std::max(dev, std::abs(va[a][i] + itf.shift[i] - vb[b][i]));
          if (dev <= 1e-10 * scale)
            itf.perm[a] = b;
        }
        if (itf.perm[a] < 0)
          throw Error(ErrorKind::mesh, "facet vertices of elements " + std::to_string(k) + " and " +
                                           std::to_string(kb) + " do not match");
      }
      mesh.interfaces.push_back(itf);
    }
  if (!open.empty())
    throw Error(ErrorKind::mesh, std::to_string(open.size()) + " unpaired facets");
}

template <int Dim>
void check_orientation(const Mesh<Dim> &mesh)
{
  for (int k = 0; k < mesh.num_elements(); ++k)
    if (!(simplex_volume<Dim>(mesh.element_vertices(k)) > 0.0))
      throw Error(ErrorKind::mesh, "element " + std::to_string(k) + " is inverted or degenerate");
}

} // namespace detail

/// Cut direction of the quad cells: rising is lower-left to upper-right,
/// falling is upper-left to lower-right.
enum class TriDiagonal { rising, falling };

inline const char *to_string(TriDiagonal d) { return d == TriDiagonal::rising ? "rising" : "falling"; }

/// 2 Nx Ny triangles, two per cell. Vertices form the full (Nx+1) x (Ny+1) lattice.
inline Mesh<2> uniform_tri_mesh(int Nx, int Ny, Point<2> box = {1.0, 1.0}, TriDiagonal diag = TriDiagonal::rising)
{
  if (Nx < 1 || Ny < 1)
    throw Error(ErrorKind::config, "mesh needs at least one cell per direction");
  Mesh<2> m;
  m.box = box;
  auto vid = [&](int i, int j) { return i + (Nx + 1) * j; };
  for (int j = 0; j <= Ny; ++j)
    for (int i = 0; i <= Nx; ++i)
      m.vertices.push_back({box[0] * i / Nx, box[1] * j / Ny});
  for (int j = 0; j < Ny; ++j)
    for (int i = 0; i < Nx; ++i) {
      if (diag == TriDiagonal::rising) {
        m.elements.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
        m.elements.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
      } else {
        m.elements.push_back({vid(i, j), vid(i + 1, j), vid(i, j + 1)});
        m.elements.push_back({vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)});
      }
    }
  detail::build_interfaces(m);
  return m;
}

/// 6 N^3 tetrahedra from the Freudenthal split of each cube along its
/// (0,0,0)-(1,1,1) diagonal.
inline Mesh<3> uniform_tet_mesh(int N, Point<3> box = {1.0, 1.0, 1.0})
{
  if (N < 1)
    throw Error(ErrorKind::config, "mesh needs at least one cell per direction");
  Mesh<3> m;
  m.box = box;
  auto vid = [&](int i, int j, int k) { return i + (N + 1) * (j + (N + 1) * k); };
  for (int k = 0; k <= N; ++k)
    for (int j = 0; j <= N; ++j)
      for (int i = 0; i <= N; ++i)
        m.vertices.push_back({box[0] * i / N, box[1] * j / N, box[2] * k / N});
  std::array<int, 3> perm{0, 1, 2};
  std::vector<std::array<int, 3>> perms;
  do
    perms.push_back(perm);
  while (std::next_permutation(perm.begin(), perm.end()));

  for (int k = 0; k < N; ++k)
    for (int j = 0; j < N; ++j)
      for (int i = 0; i < N; ++i)
        for (const auto &s : perms) {
          std::array<int, 3> c{i, j, k};
          std::array<int, 4> tet{};
          tet[0] = vid(c[0], c[1], c[2]);
          for (int a = 0; a < 3; ++a) {
            ++c[s[a]];
            tet[a + 1] = vid(c[0], c[1], c[2]);
          }
          std::array<Point<3>, 4> v{};
          for (int a = 0; a < 4; ++a)
            v[a] = m.vertices[tet[a]];
          if (simplex_volume<3>(v) < 0.0)
            std::swap(tet[2], tet[3]);
          m.elements.push_back(tet);
        }
  detail::build_interfaces(m);
  return m;
}

/// Maps every vertex; topology and interface permutations are unchanged,
/// the periodic shifts stay box multiples because the maps fix the boundary.
template <int Dim, class F>
Mesh<Dim> map_vertices(const Mesh<Dim> &mesh, F &&f)
{
  Mesh<Dim> out = mesh;
  for (auto &v : out.vertices)
    v = f(v);
  detail::check_orientation(out);
  return out;
}

/// x1 = x1 exp(0.5 (x1 - 1)) + 0.4 sin(pi x1) sin(pi x2), x2 = x2 exp(alpha (x2 - 1)).
inline Mesh<2> perturb_mesh_2d(const Mesh<2> &mesh, double alpha)
{
  using std::numbers::pi;
  return map_vertices(mesh, [alpha](const Point<2> &x) {
    return Point<2>{x[0] * std::exp(0.5 * (x[0] - 1.0)) + 0.4 * std::sin(pi * x[0]) * std::sin(pi * x[1]),
                    x[1] * std::exp(alpha * (x[1] - 1.0))};
  });
}

/// 3D analogue: x1, x2 with exponent 0.5 plus 0.4 sin sin sin, x3 with alpha.
inline Mesh<3> perturb_mesh_3d(const Mesh<3> &mesh, double alpha)
{
  using std::numbers::pi;
  return map_vertices(mesh, [alpha](const Point<3> &x) {
    const double s = 0.4 * std::sin(pi * x[0]) * std::sin(pi * x[1]) * std::sin(pi * x[2]);
    return Point<3>{x[0] * std::exp(0.5 * (x[0] - 1.0)) + s, x[1] * std::exp(0.5 * (x[1] - 1.0)) + s,
                    x[2] * std::exp(alpha * (x[2] - 1.0))};
  });
}

template <int Dim>
double regular_simplex_edge_to_inradius()
{
  return Dim == 2 ? 2.0 * std::sqrt(3.0) : 2.0 * std::sqrt(6.0);
}

struct MeshQuality {
  std::vector<double> aspect_ratio;
  std::vector<double> max_angle; ///< degrees, 2D only
  double max_aspect_ratio = 0.0;
  double max_interior_angle = 0.0;
  double min_volume = 0.0;
};

/// Aspect ratio = longest edge / (c_d * inradius) with c_2 = 2 sqrt(3),
/// c_3 = 2 sqrt(6), so the regular simplex scores exactly 1.
template <int Dim>
MeshQuality quality_report(const Mesh<Dim> &mesh)
{
  MeshQuality q;
  q.min_volume = std::numeric_limits<double>::infinity();
  auto dist = [](const Point<Dim> &a, const Point<Dim> &b) {
    double s = 0.0;
    for (int i = 0; i < Dim; ++i)
      s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  };
  for (int k = 0; k < mesh.num_elements(); ++k) {
    const auto v = mesh.element_vertices(k);
    const double vol = simplex_volume<Dim>(v);
    q.min_volume = std::min(q.min_volume, vol);
    double longest = 0.0;
    for (int a = 0; a <= Dim; ++a)
      for (int b = a + 1; b <= Dim; ++b)
        longest = std::max(longest, dist(v[a], v[b]));
    double boundary = 0.0;
    if constexpr (Dim == 2) {
      for (int a = 0; a < 3; ++a)
        boundary += dist(v[a], v[(a + 1) % 3]);
    } else {
      for (int f = 0; f < 4; ++f) {
        std::array<Point<3>, 3> t{};
        int pos = 0;
        for (int a = 0; a < 4; ++a)
          if (a != f)
            t[pos++] = v[a];
        const Point<3> e1{t[1][0] - t[0][0], t[1][1] - t[0][1], t[1][2] - t[0][2]};
        const Point<3> e2{t[2][0] - t[0][0], t[2][1] - t[0][1], t[2][2] - t[0][2]};
        const Point<3> n{e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2], e1[0] * e2[1] - e1[1] * e2[0]};
        boundary += 0.5 * std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
      }
    }
    const double inradius = Dim * vol / boundary;
    const double ar = longest / (regular_simplex_edge_to_inradius<Dim>() * inradius);
    q.aspect_ratio.push_back(ar);
    q.max_aspect_ratio = std::max(q.max_aspect_ratio, ar);
    if constexpr (Dim == 2) {
      double amax = 0.0;
      for (int a = 0; a < 3; ++a) {
        const auto &p = v[a], &r = v[(a + 1) % 3], &s = v[(a + 2) % 3];
        const double ux = r[0] - p[0], uy = r[1] - p[1], wx = s[0] - p[0], wy = s[1] - p[1];
        const double ang = std::atan2(std::abs(ux * wy - uy * wx), ux * wx + uy * wy) * 180.0 / std::numbers::pi;
        amax = std::max(amax, ang);
      }
      q.max_angle.push_back(amax);
      q.max_interior_angle = std::max(q.max_interior_angle, amax);
    }
  }
  return q;
}

/// Invariants of a periodic mesh; see docs/formats.md for the checks.
template <int Dim>
VerificationReport verify_mesh(const Mesh<Dim> &mesh)
{
  VerificationReport r;
  const double scale = mesh.box_size();
  std::vector<int> seen(static_cast<std::size_t>(mesh.num_elements()) * (Dim + 1), 0);
  double worst = 0.0;
  for (const auto &itf : mesh.interfaces) {
    ++seen[static_cast<std::size_t>(itf.elem_a) * (Dim + 1) + itf.facet_a];
    ++seen[static_cast<std::size_t>(itf.elem_b) * (Dim + 1) + itf.facet_b];
    const auto va = mesh.facet_vertices(itf.elem_a, itf.facet_a);
    const auto vb = mesh.facet_vertices(itf.elem_b, itf.facet_b);
    for (int a = 0; a < Dim; ++a)
      for (int i = 0; i < Dim; ++i)
        worst = std::max(worst, std::abs(va[a][i] + itf.shift[i] - vb[itf.perm[a]][i]));
  }
  const bool once = std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; });
  r.add_condition("every facet paired once", static_cast<double>(mesh.interfaces.size()), once);
  r.add_residual("interface coordinates match", worst, 1e-10 * scale);
  double vmin = std::numeric_limits<double>::infinity();
  for (int k = 0; k < mesh.num_elements(); ++k)
    vmin = std::min(vmin, simplex_volume<Dim>(mesh.element_vertices(k)));
  r.add_condition("positive volumes", vmin, vmin > 0.0);
  return r;
}

/// Plain-text mesh format, see docs/formats.md.
template <int Dim>
void write_mesh(std::ostream &os, const Mesh<Dim> &mesh)
{
  char buf[64];
  auto num = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  os << "tpss-mesh 1\n";
  os << "dim " << Dim << "\n";
  os << "box";
  for (double b : mesh.box)
    os << ' ' << num(b);
  os << "\nvertices " << mesh.vertices.size() << "\n";
  for (const auto &v : mesh.vertices) {
    for (int i = 0; i < Dim; ++i)
      os << (i ? " " : "") << num(v[i]);
    os << "\n";
  }
  os << "elements " << mesh.elements.size() << "\n";
  for (const auto &e : mesh.elements) {
    for (int a = 0; a <= Dim; ++a)
      os << (a ? " " : "") << e[a];
    os << "\n";
  }
  os << "interfaces " << mesh.interfaces.size() << "\n";
  for (const auto &itf : mesh.interfaces) {
    os << itf.elem_a << ' ' << itf.facet_a << ' ' << itf.elem_b << ' ' << itf.facet_b;
    for (int a = 0; a < Dim; ++a)
      os << ' ' << itf.perm[a];
    for (int i = 0; i < Dim; ++i)
      os << ' ' << num(itf.shift[i]);
    os << "\n";
  }
}

inline int read_mesh_dimension(std::istream &is)
{
  std::string tag;
  int version = 0, d = 0;
  if (!(is >> tag >> version) || tag != "tpss-mesh" || version != 1)
    throw Error(ErrorKind::mesh, "not a tpss-mesh file");
  if (!(is >> tag >> d) || tag != "dim")
    throw Error(ErrorKind::mesh, "missing dim line");
  return d;
}

/// Reads the body after the header consumed by read_mesh_dimension.
template <int Dim>
Mesh<Dim> read_mesh_body(std::istream &is)
{
  Mesh<Dim> m;
  std::string tag;
  auto expect = [&](const char *name) {
    if (!(is >> tag) || tag != name)
      throw Error(ErrorKind::mesh, std::string("expected section '") + name + "'");
  };
  expect("box");
  for (auto &b : m.box)
    is >> b;
  std::size_t n = 0;
  expect("vertices");
  is >> n;
  m.vertices.resize(n);
  for (auto &v : m.vertices)
    for (auto &x : v)
      is >> x;
  expect("elements");
  is >> n;
  m.elements.resize(n);
  for (auto &e : m.elements)
    for (auto &a : e)
      is >> a;
  expect("interfaces");
  is >> n;
  m.interfaces.resize(n);
  for (auto &itf : m.interfaces) {
    is >> itf.elem_a >> itf.facet_a >> itf.elem_b >> itf.facet_b;
    for (auto &p : itf.perm)
      is >> p;
    for (auto &s : itf.shift)
      is >> s;
  }
  if (!is)
    throw Error(ErrorKind::mesh, "truncated mesh file");
  for (const auto &e : m.elements)
    for (int a : e)
      if (a < 0 || a >= static_cast<int>(m.vertices.size()))
        throw Error(ErrorKind::mesh, "element references missing vertex " + std::to_string(a));
  const auto rep = verify_mesh(m);
  if (const auto *bad = rep.first_failure())
    throw Error(ErrorKind::mesh, "imported mesh fails check '" + bad->name + "'");
  return m;
}

template <int Dim>
Mesh<Dim> read_mesh(std::istream &is)
{
  const int d = read_mesh_dimension(is);
  if (d != Dim)
    throw Error(ErrorKind::mesh, "mesh dimension " + std::to_string(d) + " does not match " + std::to_string(Dim));
  return read_mesh_body<Dim>(is);
}

} // namespace tpss
