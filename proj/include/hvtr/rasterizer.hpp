#pragma once

// Perspective software rasterizer with z-buffering and perspective-correct
// barycentric interpolation. Back-face culling is off: meshes are closed and
// the nearest surface wins. Also provides normal-direction mesh dilation and
// the per-pixel near/far depth extrema used for geometry-guided ray bounds.

#include <cmath>
#include <limits>
#include <vector>

#include "hvtr/mesh.hpp"

namespace hvtr {

struct Camera {
  double fx = 0, fy = 0, cx = 0, cy = 0;  // pixels
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();  // world -> camera
  Vec3 t = Vec3::Zero();
  int width = 0, height = 0;

  void validate() const {
    check(fx > 0 && fy > 0, "camera: fx, fy must be positive");
    check(width > 0 && height > 0, "camera: image size must be positive");
    check((R * R.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-6,
          "camera: rotation not orthonormal");
  }

  Vec3 world_to_cam(const Vec3& p) const { return R * p + t; }
  Vec3 position() const { return -R.transpose() * t; }

  // ray through pixel coordinates (px, py); direction scaled so that the ray
  // parameter equals camera-space depth z
  Vec3 ray_dir_depth_scaled(double px, double py) const {
    return R.transpose() * Vec3((px - cx) / fx, (py - cy) / fy, 1.0);
  }

  // camera scaled for rendering at (width/S, height/S)
  Camera downsampled(int S) const {
    check(width % S == 0 && height % S == 0, "camera: size not divisible by downsample factor");
    Camera c = *this;
    c.fx /= S;
    c.fy /= S;
    c.cx /= S;
    c.cy /= S;
    c.width /= S;
    c.height /= S;
    return c;
  }

  // look-at constructor for ring placements (y-up world, camera z forward)
  static Camera look_at(const Vec3& eye, const Vec3& target, double focal_px, int w, int h,
                        const Vec3& up = Vec3(0, 1, 0)) {
    Camera c;
    const Vec3 fwd = (target - eye).normalized();
    const Vec3 right = fwd.cross(up).normalized();
    const Vec3 down = fwd.cross(right).normalized();
    c.R.row(0) = right.transpose();
    c.R.row(1) = down.transpose();
    c.R.row(2) = fwd.transpose();
    c.t = -c.R * eye;
    c.fx = c.fy = focal_px;
    c.cx = w / 2.0;
    c.cy = h / 2.0;
    c.width = w;
    c.height = h;
    return c;
  }
};

struct RasterOutput {
  int width = 0, height = 0;
  std::vector<double> uv;      // W*H*2, atlas coords
  std::vector<double> depth;   // camera z, +inf background
  std::vector<double> normal;  // W*H*3
  std::vector<uint8_t> mask;   // 1 on covered pixels
  std::vector<int> face_id;    // -1 background
  std::vector<double> bary;    // W*H*3, perspective-corrected
  int degenerate_skipped = 0;
  int near_clipped = 0;

  int covered() const {
    int n = 0;
    for (uint8_t m : mask) n += m;
    return n;
  }
};

namespace detail {

struct ProjectedTri {
  double sx[3], sy[3], z[3];
  bool ok = false;
};

inline ProjectedTri project_triangle(const TriMesh& mesh, const Eigen::Vector3i& f,
                                     const Camera& cam, double znear, int* near_clipped) {
  ProjectedTri pt;
  for (int i = 0; i < 3; ++i) {
    const Vec3 c = cam.world_to_cam(mesh.vertices[f[i]]);
    if (c.z() < znear) {
      if (near_clipped) ++*near_clipped;
      return pt;
    }
    pt.z[i] = c.z();
    pt.sx[i] = cam.fx * c.x() / c.z() + cam.cx;
    pt.sy[i] = cam.fy * c.y() / c.z() + cam.cy;
  }
  pt.ok = true;
  return pt;
}

}  // namespace detail

inline RasterOutput rasterize(const TriMesh& mesh, const Camera& cam) {
  cam.validate();
  check(!mesh.normals.empty(), "rasterize: mesh normals missing");
  const int W = cam.width, H = cam.height;
  RasterOutput out;
  out.width = W;
  out.height = H;
  out.uv.assign((size_t)W * H * 2, 0.0);
  out.depth.assign((size_t)W * H, std::numeric_limits<double>::infinity());
  out.normal.assign((size_t)W * H * 3, 0.0);
  out.mask.assign((size_t)W * H, 0);
  out.face_id.assign((size_t)W * H, -1);
  out.bary.assign((size_t)W * H * 3, 0.0);

  const double znear = 1e-4;
  for (int fi = 0; fi < mesh.face_count(); ++fi) {
    const auto& f = mesh.faces[fi];
    const auto pt = detail::project_triangle(mesh, f, cam, znear, &out.near_clipped);
    if (!pt.ok) continue;
    const double area = (pt.sx[1] - pt.sx[0]) * (pt.sy[2] - pt.sy[0]) -
                        (pt.sy[1] - pt.sy[0]) * (pt.sx[2] - pt.sx[0]);
    if (std::abs(area) < 1e-12) {
      ++out.degenerate_skipped;
      continue;
    }
    const int x0 = std::max(0, (int)std::floor(std::min({pt.sx[0], pt.sx[1], pt.sx[2]}) - 0.5));
    const int x1 = std::min(W - 1, (int)std::ceil(std::max({pt.sx[0], pt.sx[1], pt.sx[2]}) - 0.5));
    const int y0 = std::max(0, (int)std::floor(std::min({pt.sy[0], pt.sy[1], pt.sy[2]}) - 0.5));
    const int y1 = std::min(H - 1, (int)std::ceil(std::max({pt.sy[0], pt.sy[1], pt.sy[2]}) - 0.5));
    for (int py = y0; py <= y1; ++py)
      for (int px = x0; px <= x1; ++px) {
        const double x = px + 0.5, y = py + 0.5;
        const double l0 = ((pt.sx[1] - x) * (pt.sy[2] - y) - (pt.sy[1] - y) * (pt.sx[2] - x)) / area;
        const double l1 = ((pt.sx[2] - x) * (pt.sy[0] - y) - (pt.sy[2] - y) * (pt.sx[0] - x)) / area;
        const double l2 = 1.0 - l0 - l1;
        if (l0 < 0 || l1 < 0 || l2 < 0) continue;
        const double w0 = l0 / pt.z[0], w1 = l1 / pt.z[1], w2 = l2 / pt.z[2];
        const double wsum = w0 + w1 + w2;
        const double z = 1.0 / wsum;
        const size_t p = (size_t)py * W + px;
        if (z < out.depth[p] || (z == out.depth[p] && fi < out.face_id[p])) {
          out.depth[p] = z;
          out.face_id[p] = fi;
          out.mask[p] = 1;
          const double b0 = w0 * z, b1 = w1 * z, b2 = w2 * z;
          out.bary[p * 3 + 0] = b0;
          out.bary[p * 3 + 1] = b1;
          out.bary[p * 3 + 2] = b2;
          for (int k = 0; k < 2; ++k)
            out.uv[p * 2 + k] =
                b0 * mesh.uv[f[0]][k] + b1 * mesh.uv[f[1]][k] + b2 * mesh.uv[f[2]][k];
          Vec3 n = b0 * mesh.normals[f[0]] + b1 * mesh.normals[f[1]] + b2 * mesh.normals[f[2]];
          const double len = n.norm();
          if (len > 1e-12) n /= len;
          for (int k = 0; k < 3; ++k) out.normal[p * 3 + k] = n[k];
        }
      }
  }
  return out;
}

// Displaces every vertex by d along its unit vertex normal (the welded
// area-weighted normals the mesh carries; computed here only when absent).
// Connectivity is unchanged; self-intersection is permitted (the result is
// used for conservative ray bounds).
inline TriMesh dilate_mesh(const TriMesh& mesh, double d) {
  check(d >= 0, "dilate_mesh: dilation radius must be nonnegative");
  TriMesh out = mesh;
  if (out.normals.empty()) compute_vertex_normals(out);
  for (int v = 0; v < out.vertex_count(); ++v) {
    const Vec3& n = out.normals[v];
    check(std::isfinite(n.x()) && std::isfinite(n.y()) && std::isfinite(n.z()),
          "dilate_mesh: non-finite normal");
    out.vertices[v] = mesh.vertices[v] + d * n;
  }
  compute_vertex_normals(out);
  return out;
}

// Per-pixel min/max surface depth of (typically) the dilated mesh: one
// traversal maintaining both extrema, equivalent to min-z and max-z passes.
struct NearFarBuffers {
  int width = 0, height = 0;
  std::vector<double> near_depth;  // +inf where no hit
  std::vector<double> far_depth;   // -inf where no hit
  std::vector<uint8_t> hit;

  int hit_count() const {
    int n = 0;
    for (uint8_t h : hit) n += h;
    return n;
  }
};

inline NearFarBuffers near_far_buffers(const TriMesh& dilated, const Camera& cam) {
  cam.validate();
  const int W = cam.width, H = cam.height;
  NearFarBuffers out;
  out.width = W;
  out.height = H;
  out.near_depth.assign((size_t)W * H, std::numeric_limits<double>::infinity());
  out.far_depth.assign((size_t)W * H, -std::numeric_limits<double>::infinity());
  out.hit.assign((size_t)W * H, 0);

  const double znear = 1e-4;
  int clipped = 0;
  for (int fi = 0; fi < dilated.face_count(); ++fi) {
    const auto pt = detail::project_triangle(dilated, dilated.faces[fi], cam, znear, &clipped);
    if (!pt.ok) continue;
    const double area = (pt.sx[1] - pt.sx[0]) * (pt.sy[2] - pt.sy[0]) -
                        (pt.sy[1] - pt.sy[0]) * (pt.sx[2] - pt.sx[0]);
    if (std::abs(area) < 1e-12) continue;
    const int x0 = std::max(0, (int)std::floor(std::min({pt.sx[0], pt.sx[1], pt.sx[2]}) - 0.5));
    const int x1 = std::min(W - 1, (int)std::ceil(std::max({pt.sx[0], pt.sx[1], pt.sx[2]}) - 0.5));
    const int y0 = std::max(0, (int)std::floor(std::min({pt.sy[0], pt.sy[1], pt.sy[2]}) - 0.5));
    const int y1 = std::min(H - 1, (int)std::ceil(std::max({pt.sy[0], pt.sy[1], pt.sy[2]}) - 0.5));
    for (int py = y0; py <= y1; ++py)
      for (int px = x0; px <= x1; ++px) {
        const double x = px + 0.5, y = py + 0.5;
        const double l0 = ((pt.sx[1] - x) * (pt.sy[2] - y) - (pt.sy[1] - y) * (pt.sx[2] - x)) / area;
        const double l1 = ((pt.sx[2] - x) * (pt.sy[0] - y) - (pt.sy[2] - y) * (pt.sx[0] - x)) / area;
        const double l2 = 1.0 - l0 - l1;
        if (l0 < 0 || l1 < 0 || l2 < 0) continue;
        const double z = 1.0 / (l0 / pt.z[0] + l1 / pt.z[1] + l2 / pt.z[2]);
        const size_t p = (size_t)py * W + px;
        out.hit[p] = 1;
        out.near_depth[p] = std::min(out.near_depth[p], z);
        out.far_depth[p] = std::max(out.far_depth[p], z);
      }
  }
  // grazing pixels can see a single surface sample; keep near < far strict
  for (size_t p = 0; p < out.hit.size(); ++p)
    if (out.hit[p] && out.far_depth[p] <= out.near_depth[p])
      out.far_depth[p] = out.near_depth[p] + 1e-5;
  return out;
}

}  // namespace hvtr
