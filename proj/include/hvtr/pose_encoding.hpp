#pragma once

// UV-space pose encoding: bake posed vertex positions (and ground-truth
// normals) into the atlas, run the pose encoder over positional map +
// geometry latent, and assemble the pose-dependent feature map by
// concatenating the texture latent.

#include <vector>

#include "hvtr/mesh.hpp"
#include "hvtr/nn.hpp"

namespace hvtr {

struct UvPositionalMap {
  int size = 0;
  std::vector<double> data;    // U*U*3, zeros on invalid texels
  std::vector<uint8_t> valid;  // covered texels plus the 2-texel dilation ring
  int core_count = 0;          // covered texels before dilation
};

struct UvNormalMap {
  int size = 0;
  std::vector<double> data;  // U*U*3, unit on valid texels
  std::vector<uint8_t> valid;
};

namespace detail {

// Directed-edge boundary ownership: exactly one of (a->b), (b->a) includes
// points on the shared edge, so adjacent triangles never double-claim a
// texel and any double claim is a genuine atlas overlap.
inline bool boundary_owned(const Vec2& a, const Vec2& b) {
  return (b.y() > a.y()) || (b.y() == a.y() && b.x() < a.x());
}

// Bakes per-vertex attributes (fetch(vertex) -> Vec3) into the atlas.
template <typename Fetch>
void bake_attribute(const TriMesh& mesh, int U, Fetch&& fetch, std::vector<double>* out,
                    std::vector<uint8_t>* valid, int* core_count) {
  out->assign((size_t)U * U * 3, 0.0);
  valid->assign((size_t)U * U, 0);
  std::vector<int> owner((size_t)U * U, -1);
  for (int f = 0; f < mesh.face_count(); ++f) {
    const auto& t = mesh.faces[f];
    Vec2 p0 = mesh.uv[t[0]] * U, p1 = mesh.uv[t[1]] * U, p2 = mesh.uv[t[2]] * U;
    Vec3 a0 = fetch(t[0]), a1 = fetch(t[1]), a2 = fetch(t[2]);
    double area = (p1 - p0).x() * (p2 - p0).y() - (p1 - p0).y() * (p2 - p0).x();
    if (area == 0) continue;  // no atlas footprint
    if (area < 0) {           // normalize to CCW in UV space for the fill rule
      std::swap(p1, p2);
      std::swap(a1, a2);
      area = -area;
    }
    const int x0 = std::max(0, (int)std::floor(std::min({p0.x(), p1.x(), p2.x()}) - 0.5));
    const int x1 = std::min(U - 1, (int)std::ceil(std::max({p0.x(), p1.x(), p2.x()}) - 0.5));
    const int y0 = std::max(0, (int)std::floor(std::min({p0.y(), p1.y(), p2.y()}) - 0.5));
    const int y1 = std::min(U - 1, (int)std::ceil(std::max({p0.y(), p1.y(), p2.y()}) - 0.5));
    for (int iy = y0; iy <= y1; ++iy)
      for (int ix = x0; ix <= x1; ++ix) {
        const Vec2 q(ix + 0.5, iy + 0.5);
        const double e0 = (p1 - p0).x() * (q - p0).y() - (p1 - p0).y() * (q - p0).x();
        const double e1 = (p2 - p1).x() * (q - p1).y() - (p2 - p1).y() * (q - p1).x();
        const double e2 = (p0 - p2).x() * (q - p2).y() - (p0 - p2).y() * (q - p2).x();
        const bool inside = (e0 > 0 || (e0 == 0 && boundary_owned(p0, p1))) &&
                            (e1 > 0 || (e1 == 0 && boundary_owned(p1, p2))) &&
                            (e2 > 0 || (e2 == 0 && boundary_owned(p2, p0)));
        if (!inside) continue;
        const size_t px = (size_t)iy * U + ix;
        if (owner[px] >= 0)
          throw std::invalid_argument("bake: atlas overlap at texel (" + std::to_string(ix) + "," +
                                      std::to_string(iy) + ") between faces " +
                                      std::to_string(owner[px]) + " and " + std::to_string(f));
        owner[px] = f;
        const double l1 = e1 / area, l2 = e2 / area;  // weights of p0, p1
        const double l0 = 1.0 - l1 - l2;              // weight of p2
        const Vec3 val = l1 * a0 + l2 * a1 + l0 * a2;
        for (int k = 0; k < 3; ++k) (*out)[px * 3 + k] = val[k];
        (*valid)[px] = 1;
      }
  }
  if (core_count) {
    *core_count = 0;
    for (uint8_t v : *valid) *core_count += v;
  }
  // 2-texel morphological dilation: copy from the first valid neighbor in a
  // fixed scan order so chart borders survive bilinear lookups
  const int dxs[8] = {-1, 1, 0, 0, -1, 1, -1, 1};
  const int dys[8] = {0, 0, -1, 1, -1, -1, 1, 1};
  for (int pass = 0; pass < 2; ++pass) {
    std::vector<uint8_t> grown = *valid;
    for (int iy = 0; iy < U; ++iy)
      for (int ix = 0; ix < U; ++ix) {
        const size_t px = (size_t)iy * U + ix;
        if ((*valid)[px]) continue;
        for (int k = 0; k < 8; ++k) {
          const int nx = ix + dxs[k], ny = iy + dys[k];
          if (nx < 0 || nx >= U || ny < 0 || ny >= U) continue;
          const size_t np = (size_t)ny * U + nx;
          if (!(*valid)[np]) continue;
          for (int c = 0; c < 3; ++c) (*out)[px * 3 + c] = (*out)[np * 3 + c];
          grown[px] = 1;
          break;
        }
      }
    *valid = std::move(grown);
  }
}

}  // namespace detail

inline UvPositionalMap bake_positional_map(const TriMesh& mesh, int U) {
  check(U >= 4, "bake_positional_map: atlas size too small");
  check(mesh.uv.size() == mesh.vertices.size(), "bake_positional_map: mesh has no UV atlas");
  UvPositionalMap map;
  map.size = U;
  detail::bake_attribute(
      mesh, U, [&](int v) { return mesh.vertices[v]; }, &map.data, &map.valid, &map.core_count);
  return map;
}

inline UvNormalMap bake_normal_map_gt(const TriMesh& mesh, int U) {
  check(!mesh.normals.empty(), "bake_normal_map_gt: mesh normals missing");
  UvNormalMap map;
  map.size = U;
  int core = 0;
  detail::bake_attribute(
      mesh, U, [&](int v) { return mesh.normals[v]; }, &map.data, &map.valid, &core);
  // interpolated normals renormalized per texel
  for (size_t px = 0; px < map.valid.size(); ++px) {
    if (!map.valid[px]) continue;
    Vec3 n(map.data[px * 3], map.data[px * 3 + 1], map.data[px * 3 + 2]);
    const double len = n.norm();
    if (len > 1e-12) n /= len;
    for (int k = 0; k < 3; ++k) map.data[px * 3 + k] = n[k];
  }
  return map;
}

template <typename T>
TensorT<T> positional_map_tensor(const UvPositionalMap& map) {
  const int U = map.size;
  TensorT<T> t(Shape{1, 3, U, U});
  T* p = t.data();
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < U * U; ++i) p[(size_t)c * U * U + i] = (T)map.data[(size_t)i * 3 + c];
  return t;
}

template <typename T>
TensorT<T> normal_map_tensor(const UvNormalMap& map) {
  const int U = map.size;
  TensorT<T> t(Shape{1, 3, U, U});
  T* p = t.data();
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < U * U; ++i) p[(size_t)c * U * U + i] = (T)map.data[(size_t)i * 3 + c];
  return t;
}

template <typename T>
TensorT<T> valid_mask_tensor(const std::vector<uint8_t>& valid, int U) {
  TensorT<T> t(Shape{1, 1, U, U});
  T* p = t.data();
  for (int i = 0; i < U * U; ++i) p[i] = (T)valid[i];
  return t;
}

// Pose encoder: 3 encoder blocks (strides 1,2,2), 2 residual blocks, and
// 3 decoder blocks (2x, 2x, keep) back to UxU geometric features. The
// normal head decodes the bottleneck with 2 upsampling blocks.
template <typename T>
struct PoseEncoder {
  EncoderBlock<T> enc1, enc2, enc3;
  ResBlock<T> res1, res2;
  DecoderBlock<T> dec1, dec2, dec3;
  // normal head
  DecoderBlock<T> ndec1, ndec2;
  Conv2dLayer<T> nhead;

  struct Output {
    TensorT<T> geo_features;  // [1, c_geo, U, U]
    TensorT<T> uv_normals;    // [1, 3, U, U]
  };

  PoseEncoder() = default;
  PoseEncoder(ParamRegistry<T>& reg, const std::string& prefix, int in_ch, int base, int c_geo,
              NormMode nm, Rng& rng)
      : enc1(reg, prefix + ".enc1", in_ch, base, 1, nm, rng),
        enc2(reg, prefix + ".enc2", base, base * 3 / 2, 2, nm, rng),
        enc3(reg, prefix + ".enc3", base * 3 / 2, base * 2, 2, nm, rng),
        res1(reg, prefix + ".res1", base * 2, nm, rng),
        res2(reg, prefix + ".res2", base * 2, nm, rng),
        dec1(reg, prefix + ".dec1", base * 2, base * 3 / 2, true, nm, rng),
        dec2(reg, prefix + ".dec2", base * 3 / 2, base, true, nm, rng),
        dec3(reg, prefix + ".dec3", base, c_geo, false, nm, rng),
        ndec1(reg, prefix + ".ndec1", base * 2, base, true, nm, rng),
        ndec2(reg, prefix + ".ndec2", base, base / 2, true, nm, rng),
        nhead(reg, prefix + ".nhead", base / 2, 3, 3, 1, 1, rng, 0.01) {}

  Output forward(const TensorT<T>& posmap_with_latent) const {
    auto h = enc1.forward(posmap_with_latent);
    h = enc2.forward(h);
    h = enc3.forward(h);
    h = res1.forward(h);
    auto bottleneck = res2.forward(h);
    auto g = dec1.forward(bottleneck);
    g = dec2.forward(g);
    g = dec3.forward(g);
    auto n = ndec1.forward(bottleneck);
    n = ndec2.forward(n);
    Output out;
    out.geo_features = g;
    out.uv_normals = nhead.forward(relu(n));
    return out;
  }
};

// Channel-concat of geometric features and the texture latent.
template <typename T>
TensorT<T> assemble_pose_features(const TensorT<T>& geo_features, const TensorT<T>& z_t) {
  return concat_channels(geo_features, z_t);
}

}  // namespace hvtr
