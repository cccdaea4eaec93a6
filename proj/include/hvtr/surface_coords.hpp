#pragma once

// UV-plus-height local coordinates: the nearest point on the posed mesh in
// barycentric form plus a signed height along the nearest face's normal.
// Two routes are provided: an exhaustive projector (the oracle) and a
// best-first BVH projector that must agree with it exactly under the
// documented tie rule (lowest face index on equidistant faces).

#include <cmath>
#include <queue>
#include <vector>

#include "hvtr/mesh.hpp"

namespace hvtr {

// (u, v) weight vertices b and c of the face; the a-weight is 1-u-v.
struct LocalCoord {
  double u = 0, v = 0;
  int face = -1;
  double h = 0;  // signed height, meters; positive outside (face normal side)
};

enum class TriRegion { kInterior, kEdge, kVertex };

struct TriClosest {
  Vec3 point;
  double u = 0, v = 0;
  TriRegion region = TriRegion::kInterior;
};

// Exact closest point on a (closed) triangle, region-classified.
inline TriClosest closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                                            const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a;
  check(ab.cross(ac).squaredNorm() >= 1e-24, "closest_point_on_triangle: degenerate triangle");
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return {a, 0, 0, TriRegion::kVertex};

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return {b, 1, 0, TriRegion::kVertex};

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return {c, 0, 1, TriRegion::kVertex};

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) {
    const double t = d1 / (d1 - d3);
    return {a + t * ab, t, 0, TriRegion::kEdge};
  }
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) {
    const double t = d2 / (d2 - d6);
    return {a + t * ac, 0, t, TriRegion::kEdge};
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    const double t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return {b + t * (c - b), 1 - t, t, TriRegion::kEdge};
  }
  const double denom = 1.0 / (va + vb + vc);
  const double u = vb * denom, v = vc * denom;
  return {a + ab * u + ac * v, u, v, TriRegion::kInterior};
}

namespace detail {

inline LocalCoord finish_local_coord(const Vec3& q, const TriMesh& mesh, int face,
                                     const TriClosest& cp, double dist2) {
  LocalCoord lc;
  lc.face = face;
  lc.u = cp.u;
  lc.v = cp.v;
  const double dist = std::sqrt(dist2);
  const Vec3 n = face_normal(mesh, face);
  lc.h = (q - cp.point).dot(n) >= 0 ? dist : -dist;
  return lc;
}

}  // namespace detail

// Exhaustive argmin over all faces; ties broken by lowest face index.
inline LocalCoord project_point_bruteforce(const Vec3& q, const TriMesh& mesh) {
  check(mesh.face_count() > 0, "project_point_bruteforce: empty mesh");
  double best_d2 = std::numeric_limits<double>::infinity();
  int best_face = -1;
  TriClosest best_cp;
  for (int f = 0; f < mesh.face_count(); ++f) {
    const auto& t = mesh.faces[f];
    const TriClosest cp =
        closest_point_on_triangle(q, mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
    const double d2 = (q - cp.point).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best_face = f;
      best_cp = cp;
    }
  }
  return detail::finish_local_coord(q, mesh, best_face, best_cp, best_d2);
}

// Axis-aligned bounding-box tree over faces, leaf size <= 4.
class TriangleBvh {
 public:
  explicit TriangleBvh(const TriMesh& mesh, int leaf_size = 4) : mesh_(&mesh) {
    const int F = mesh.face_count();
    check(F > 0, "TriangleBvh: empty mesh");
    for (int f = 0; f < F; ++f) {
      const auto& t = mesh.faces[f];
      check((mesh.vertices[t[1]] - mesh.vertices[t[0]])
                    .cross(mesh.vertices[t[2]] - mesh.vertices[t[0]])
                    .squaredNorm() >= 1e-24,
            "TriangleBvh: degenerate face " + std::to_string(f));
    }
    face_order_.resize(F);
    for (int f = 0; f < F; ++f) face_order_[f] = f;
    centroids_.resize(F);
    for (int f = 0; f < F; ++f) {
      const auto& t = mesh.faces[f];
      centroids_[f] = (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
    }
    nodes_.reserve(2 * F / leaf_size + 2);
    build(0, F, leaf_size);
    centroids_.clear();
  }

  const TriMesh* mesh() const { return mesh_; }
  int node_count() const { return (int)nodes_.size(); }

  struct Stats {
    int faces_tested = 0;
    int nodes_visited = 0;
  };

  LocalCoord project(const Vec3& q, Stats* stats = nullptr) const {
    double best_d2 = std::numeric_limits<double>::infinity();
    int best_face = -1;
    TriClosest best_cp;
    // best-first traversal ordered by box distance
    using Entry = std::pair<double, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;
    heap.push({box_dist2(q, nodes_[0]), 0});
    while (!heap.empty()) {
      const auto [d2, ni] = heap.top();
      heap.pop();
      if (d2 > best_d2) continue;  // equal distance still explored for the tie rule
      const Node& n = nodes_[ni];
      if (stats) ++stats->nodes_visited;
      if (n.left < 0) {
        for (int i = n.begin; i < n.end; ++i) {
          const int f = face_order_[i];
          const auto& t = mesh_->faces[f];
          const TriClosest cp = closest_point_on_triangle(
              q, mesh_->vertices[t[0]], mesh_->vertices[t[1]], mesh_->vertices[t[2]]);
          const double fd2 = (q - cp.point).squaredNorm();
          if (stats) ++stats->faces_tested;
          if (fd2 < best_d2 || (fd2 == best_d2 && f < best_face)) {
            best_d2 = fd2;
            best_face = f;
            best_cp = cp;
          }
        }
      } else {
        heap.push({box_dist2(q, nodes_[n.left]), n.left});
        heap.push({box_dist2(q, nodes_[n.right]), n.right});
      }
    }
    return detail::finish_local_coord(q, *mesh_, best_face, best_cp, best_d2);
  }

 private:
  struct Node {
    Vec3 lo, hi;
    int left = -1, right = -1;
    int begin = 0, end = 0;
  };

  static double box_dist2(const Vec3& q, const Node& n) {
    double d2 = 0;
    for (int k = 0; k < 3; ++k) {
      const double d = std::max({n.lo[k] - q[k], 0.0, q[k] - n.hi[k]});
      d2 += d * d;
    }
    return d2;
  }

  int build(int begin, int end, int leaf_size) {
    const int ni = (int)nodes_.size();
    nodes_.push_back({});
    Vec3 lo(1e300, 1e300, 1e300), hi = -lo;
    for (int i = begin; i < end; ++i) {
      const auto& t = mesh_->faces[face_order_[i]];
      for (int k = 0; k < 3; ++k) {
        lo = lo.cwiseMin(mesh_->vertices[t[k]]);
        hi = hi.cwiseMax(mesh_->vertices[t[k]]);
      }
    }
    nodes_[ni].lo = lo;
    nodes_[ni].hi = hi;
    if (end - begin <= leaf_size) {
      nodes_[ni].begin = begin;
      nodes_[ni].end = end;
      return ni;
    }
    int axis = 0;
    const Vec3 ext = hi - lo;
    if (ext.y() > ext.x()) axis = 1;
    if (ext.z() > ext[axis]) axis = 2;
    const int mid = (begin + end) / 2;
    std::nth_element(face_order_.begin() + begin, face_order_.begin() + mid,
                     face_order_.begin() + end, [&](int a, int b) {
                       const double ca = centroids_[a][axis], cb = centroids_[b][axis];
                       return ca < cb || (ca == cb && a < b);
                     });
    const int l = build(begin, mid, leaf_size);
    const int r = build(mid, end, leaf_size);
    nodes_[ni].left = l;
    nodes_[ni].right = r;
    return ni;
  }

  const TriMesh* mesh_;
  std::vector<Node> nodes_;
  std::vector<int> face_order_;
  std::vector<Vec3> centroids_;
};

inline LocalCoord project_point(const Vec3& q, const TriMesh& mesh, const TriangleBvh& bvh) {
  check(bvh.mesh() == &mesh, "project_point: BVH was built over a different mesh");
  return bvh.project(q);
}

// Barycentric atlas coordinates of a local coordinate's foot point.
inline Vec2 to_uv(const LocalCoord& lc, const TriMesh& mesh) {
  const auto& t = mesh.faces[lc.face];
  const double w = 1.0 - lc.u - lc.v;
  return w * mesh.uv[t[0]] + lc.u * mesh.uv[t[1]] + lc.v * mesh.uv[t[2]];
}

// Reconstructs the 3D foot point (for diagnostics and tests).
inline Vec3 foot_point(const LocalCoord& lc, const TriMesh& mesh) {
  const auto& t = mesh.faces[lc.face];
  const double w = 1.0 - lc.u - lc.v;
  return w * mesh.vertices[t[0]] + lc.u * mesh.vertices[t[1]] + lc.v * mesh.vertices[t[2]];
}

}  // namespace hvtr
