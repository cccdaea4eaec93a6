#pragma once

// Triangle meshes with per-vertex UV. A closed surface cannot be atlased
// injectively without cuts, so charts duplicate vertices along seams; the
// positional weld below recovers the closed surface for normals, dilation
// and topology checks. Geometry is kept in double precision.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "hvtr/common.hpp"

namespace hvtr {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Eigen::Vector3i> faces;  // CCW, outward
  std::vector<Vec2> uv;                // per vertex, atlas coords in [0,1]^2
  std::vector<Vec3> normals;           // per vertex, unit (see compute_vertex_normals)

  int vertex_count() const { return (int)vertices.size(); }
  int face_count() const { return (int)faces.size(); }
};

// Maps every vertex to the representative index of its positional group.
// Seam duplicates are constructed by copying coordinates, so exact keys work.
inline std::vector<int> weld_map(const TriMesh& m) {
  struct Key {
    double x, y, z;
    bool operator<(const Key& o) const {
      if (x != o.x) return x < o.x;
      if (y != o.y) return y < o.y;
      return z < o.z;
    }
  };
  std::map<Key, int> first;
  std::vector<int> rep(m.vertices.size());
  for (int i = 0; i < (int)m.vertices.size(); ++i) {
    const Vec3& p = m.vertices[i];
    auto [it, inserted] = first.try_emplace(Key{p.x(), p.y(), p.z()}, i);
    rep[i] = it->second;
  }
  return rep;
}

// Area-weighted vertex normals accumulated over the welded surface, so seam
// duplicates carry identical normals and dilation cannot open cracks.
inline void compute_vertex_normals(TriMesh& m) {
  const std::vector<int> rep = weld_map(m);
  std::vector<Vec3> acc(m.vertices.size(), Vec3::Zero());
  for (const auto& f : m.faces) {
    const Vec3& a = m.vertices[f[0]];
    const Vec3 n = (m.vertices[f[1]] - a).cross(m.vertices[f[2]] - a);  // 2*area weighted
    acc[rep[f[0]]] += n;
    acc[rep[f[1]]] += n;
    acc[rep[f[2]]] += n;
  }
  m.normals.resize(m.vertices.size());
  for (int i = 0; i < (int)m.vertices.size(); ++i) {
    Vec3 n = acc[rep[i]];
    const double len = n.norm();
    if (!std::isfinite(len)) throw std::runtime_error("compute_vertex_normals: non-finite normal");
    m.normals[i] = len > 1e-20 ? Vec3(n / len) : Vec3(0, 0, 1);
  }
}

// Welded topology counts: every undirected edge must carry exactly two faces
// with opposite directions for a closed, consistently oriented surface.
struct MeshTopology {
  int welded_vertices = 0;
  int welded_edges = 0;
  int faces = 0;
  bool closed = false;
  bool oriented = false;
  int euler_characteristic() const { return welded_vertices - welded_edges + faces; }
};

inline MeshTopology analyze_topology(const TriMesh& m) {
  const std::vector<int> rep = weld_map(m);
  std::map<std::pair<int, int>, int> directed;
  std::map<std::pair<int, int>, int> undirected;
  std::vector<char> used(m.vertices.size(), 0);
  for (const auto& f : m.faces) {
    for (int e = 0; e < 3; ++e) {
      int a = rep[f[e]], b = rep[f[(e + 1) % 3]];
      used[a] = 1;
      directed[{a, b}] += 1;
      undirected[{std::min(a, b), std::max(a, b)}] += 1;
    }
  }
  MeshTopology t;
  t.faces = (int)m.faces.size();
  for (char u : used) t.welded_vertices += u;
  t.welded_edges = (int)undirected.size();
  t.closed = true;
  t.oriented = true;
  for (const auto& [e, c] : undirected)
    if (c != 2) t.closed = false;
  for (const auto& [e, c] : directed)
    if (c != 1) t.oriented = false;
  return t;
}

inline double signed_volume(const TriMesh& m) {
  double v = 0;
  for (const auto& f : m.faces)
    v += m.vertices[f[0]].dot(m.vertices[f[1]].cross(m.vertices[f[2]])) / 6.0;
  return v;
}

inline Vec3 face_normal(const TriMesh& m, int f) {
  const auto& t = m.faces[f];
  const Vec3 n = (m.vertices[t[1]] - m.vertices[t[0]]).cross(m.vertices[t[2]] - m.vertices[t[0]]);
  const double len = n.norm();
  return len > 1e-20 ? Vec3(n / len) : Vec3(0, 0, 0);
}

// ---------------------------------------------------------------------------
// OBJ interchange (v / vt / f with paired indices)

inline void save_obj(const TriMesh& m, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_obj: cannot write " + path);
  os.precision(12);
  for (const auto& v : m.vertices) os << "v " << v.x() << " " << v.y() << " " << v.z() << "\n";
  for (const auto& t : m.uv) os << "vt " << t.x() << " " << t.y() << "\n";
  for (const auto& f : m.faces)
    os << "f " << f[0] + 1 << "/" << f[0] + 1 << " " << f[1] + 1 << "/" << f[1] + 1 << " "
       << f[2] + 1 << "/" << f[2] + 1 << "\n";
}

inline TriMesh load_obj(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_obj: cannot read " + path);
  TriMesh m;
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 v;
      ls >> v.x() >> v.y() >> v.z();
      m.vertices.push_back(v);
    } else if (tag == "vt") {
      Vec2 t;
      ls >> t.x() >> t.y();
      m.uv.push_back(t);
    } else if (tag == "f") {
      Eigen::Vector3i f;
      for (int i = 0; i < 3; ++i) {
        std::string tok;
        ls >> tok;
        f[i] = std::stoi(tok.substr(0, tok.find('/'))) - 1;
      }
      m.faces.push_back(f);
    }
  }
  if (m.uv.empty()) m.uv.assign(m.vertices.size(), Vec2::Zero());
  if (m.uv.size() != m.vertices.size())
    throw std::runtime_error("load_obj: uv count does not match vertex count in " + path);
  compute_vertex_normals(m);
  return m;
}

// ---------------------------------------------------------------------------
// Primitives used by tests and the synthetic scenes

// Icosphere without a UV atlas (uv = 0); for geometry-only uses.
inline TriMesh make_icosphere(int subdivisions, double radius = 1.0, Vec3 center = Vec3::Zero()) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, phi, 0},  {1, phi, 0},  {-1, -phi, 0}, {1, -phi, 0},
                         {0, -1, phi},  {0, 1, phi},  {0, -1, -phi}, {0, 1, -phi},
                         {phi, 0, -1},  {phi, 0, 1},  {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<Eigen::Vector3i> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                    {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                    {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                    {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      Vec3 p = (v[a] + v[b]).normalized();
      v.push_back(p);
      mid[key] = (int)v.size() - 1;
      return (int)v.size() - 1;
    };
    std::vector<Eigen::Vector3i> nf;
    for (const auto& t : f) {
      int ab = midpoint(t[0], t[1]), bc = midpoint(t[1], t[2]), ca = midpoint(t[2], t[0]);
      nf.push_back({t[0], ab, ca});
      nf.push_back({t[1], bc, ab});
      nf.push_back({t[2], ca, bc});
      nf.push_back({ab, bc, ca});
    }
    f = std::move(nf);
  }
  TriMesh m;
  for (const auto& p : v) m.vertices.push_back(center + radius * p);
  m.faces = f;
  m.uv.assign(m.vertices.size(), Vec2::Zero());
  compute_vertex_normals(m);
  return m;
}

// Axis-aligned cube with one atlas chart per side. Corner positions are
// computed from sign triples so seam duplicates are bit-identical.
inline TriMesh make_cube(double half_extent = 1.0, Vec3 center = Vec3::Zero()) {
  TriMesh m;
  const double h = half_extent;
  auto chart = [](int idx, double u, double v) {
    const int cx = idx % 3, cy = idx / 3;
    return Vec2(0.03 + cx * 0.33 + u * 0.27, 0.03 + cy * 0.50 + v * 0.40);
  };
  auto corner = [&](int sx, int sy, int sz) { return center + Vec3(sx * h, sy * h, sz * h); };
  // per side: 4 corner sign-triples in CCW order from outside (quad corners
  // 00, 10, 01, 11 in chart coordinates)
  const int sides[6][4][3] = {
      {{-1, -1, 1}, {1, -1, 1}, {-1, 1, 1}, {1, 1, 1}},      // +z
      {{1, -1, -1}, {-1, -1, -1}, {1, 1, -1}, {-1, 1, -1}},  // -z
      {{1, -1, 1}, {1, -1, -1}, {1, 1, 1}, {1, 1, -1}},      // +x
      {{-1, -1, -1}, {-1, -1, 1}, {-1, 1, -1}, {-1, 1, 1}},  // -x
      {{-1, 1, 1}, {1, 1, 1}, {-1, 1, -1}, {1, 1, -1}},      // +y
      {{-1, -1, -1}, {1, -1, -1}, {-1, -1, 1}, {1, -1, 1}},  // -y
  };
  for (int s = 0; s < 6; ++s) {
    const int base = (int)m.vertices.size();
    for (int c = 0; c < 4; ++c) {
      m.vertices.push_back(corner(sides[s][c][0], sides[s][c][1], sides[s][c][2]));
      m.uv.push_back(chart(s, c % 2, c / 2));
    }
    m.faces.push_back({base + 0, base + 1, base + 3});
    m.faces.push_back({base + 0, base + 3, base + 2});
  }
  compute_vertex_normals(m);
  return m;
}

// Lat-long sphere with polar cap fans; non-overlapping atlas (main band plus
// two cap circles). Seam and cap-ring duplicates reuse the exact same
// position expressions so the positional weld holds bit-for-bit.
inline TriMesh make_uv_sphere(int n_lat, int n_lon, double radius = 1.0,
                              Vec3 center = Vec3::Zero()) {
  TriMesh m;
  const double kPi = 3.14159265358979323846;
  const double cap = 0.35;  // polar angle of the cap boundary
  auto row_theta = [&](int i) { return cap + (kPi - 2 * cap) * i / n_lat; };
  auto col_phi = [&](int j) { return 2 * kPi * (j % n_lon) / n_lon; };
  auto pos = [&](int i, int j) {
    const double theta = row_theta(i), phi = col_phi(j);
    return center + radius * Vec3(std::sin(theta) * std::cos(phi), std::cos(theta),
                                  std::sin(theta) * std::sin(phi));
  };
  // main band: theta in [cap, pi-cap], seam column j=n_lon duplicates j=0
  for (int i = 0; i <= n_lat; ++i)
    for (int j = 0; j <= n_lon; ++j) {
      m.vertices.push_back(pos(i, j));
      m.uv.push_back({0.03 + 0.70 * j / n_lon, 0.05 + 0.90 * i / n_lat});
    }
  auto band = [&](int i, int j) { return i * (n_lon + 1) + j; };
  for (int i = 0; i < n_lat; ++i)
    for (int j = 0; j < n_lon; ++j) {
      m.faces.push_back({band(i, j), band(i, j + 1), band(i + 1, j)});
      m.faces.push_back({band(i + 1, j), band(i, j + 1), band(i + 1, j + 1)});
    }
  // caps: apex + duplicated boundary ring laid out as a UV circle
  for (int top = 0; top < 2; ++top) {
    const int ring_row = top ? 0 : n_lat;
    const int apex = (int)m.vertices.size();
    m.vertices.push_back(center + Vec3(0, top ? radius : -radius, 0));
    const Vec2 c(0.85, top ? 0.75 : 0.25);
    m.uv.push_back(c);
    for (int j = 0; j < n_lon; ++j) {
      m.vertices.push_back(pos(ring_row, j));
      const double a = 2 * kPi * j / n_lon;
      m.uv.push_back(c + 0.10 * Vec2(std::cos(a), std::sin(a)));
    }
    for (int j = 0; j < n_lon; ++j) {
      const int r0 = apex + 1 + j, r1 = apex + 1 + (j + 1) % n_lon;
      if (top)
        m.faces.push_back({apex, r1, r0});
      else
        m.faces.push_back({apex, r0, r1});
    }
  }
  compute_vertex_normals(m);
  return m;
}

// Planar grid in the xy-plane with identity-like UVs; open surface for
// bake/analytic tests.
inline TriMesh make_plane(int nx, int ny, double extent = 1.0) {
  TriMesh m;
  for (int iy = 0; iy <= ny; ++iy)
    for (int ix = 0; ix <= nx; ++ix) {
      const double u = (double)ix / nx, v = (double)iy / ny;
      m.vertices.push_back({(u - 0.5) * 2 * extent, (v - 0.5) * 2 * extent, 0.0});
      m.uv.push_back({0.05 + 0.9 * u, 0.05 + 0.9 * v});
    }
  auto vid = [&](int ix, int iy) { return iy * (nx + 1) + ix; };
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) {
      m.faces.push_back({vid(ix, iy), vid(ix + 1, iy), vid(ix + 1, iy + 1)});
      m.faces.push_back({vid(ix, iy), vid(ix + 1, iy + 1), vid(ix, iy + 1)});
    }
  compute_vertex_normals(m);
  return m;
}

}  // namespace hvtr
