#include <catch2/catch_amalgamated.hpp>

#include "hvtr/body_model.hpp"
#include "hvtr/losses.hpp"
#include "hvtr/pose_encoding.hpp"

using namespace hvtr;

namespace {

TriMesh translated(const TriMesh& m, const Vec3& t) {
  TriMesh out = m;
  for (auto& v : out.vertices) v += t;
  return out;
}

TriMesh rotated(const TriMesh& m, const Eigen::Matrix3d& R) {
  TriMesh out = m;
  for (auto& v : out.vertices) v = R * v;
  compute_vertex_normals(out);
  return out;
}

}  // namespace

TEST_CASE("bake: planar mesh reproduces analytic plane points") {
  const TriMesh plane = make_plane(4, 4, 1.0);
  const int U = 64;
  const UvPositionalMap map = bake_positional_map(plane, U);
  REQUIRE(map.core_count > 1000);
  // uv (0.05..0.95) maps linearly to x,y in (-1..1): invert per texel
  int checked = 0;
  for (int iy = 2; iy < U - 2; ++iy)
    for (int ix = 2; ix < U - 2; ++ix) {
      const size_t px = (size_t)iy * U + ix;
      if (!map.valid[px]) continue;
      const double u = (ix + 0.5) / U, v = (iy + 0.5) / U;
      if (u < 0.06 || u > 0.94 || v < 0.06 || v > 0.94) continue;  // outside chart or in the ring
      const double x = (u - 0.05) / 0.9 * 2.0 - 1.0;
      const double y = (v - 0.05) / 0.9 * 2.0 - 1.0;
      CHECK(map.data[px * 3 + 0] == Catch::Approx(x).margin(1e-6));
      CHECK(map.data[px * 3 + 1] == Catch::Approx(y).margin(1e-6));
      CHECK(map.data[px * 3 + 2] == Catch::Approx(0.0).margin(1e-12));
      ++checked;
    }
  CHECK(checked > 500);
}

TEST_CASE("bake: rigid translation shifts every valid texel exactly") {
  const SkinnedTemplate tpl = build_toy_humanoid();
  const int U = 128;
  const Vec3 t(0.37, -1.25, 2.0);
  const UvPositionalMap a = bake_positional_map(tpl.mesh, U);
  const UvPositionalMap b = bake_positional_map(translated(tpl.mesh, t), U);
  REQUIRE(a.valid == b.valid);
  int compared = 0;
  for (size_t px = 0; px < a.valid.size(); ++px) {
    if (!a.valid[px]) continue;
    for (int k = 0; k < 3; ++k)
      CHECK(b.data[px * 3 + k] - a.data[px * 3 + k] == Catch::Approx(t[k]).margin(1e-12));
    ++compared;
  }
  CHECK(compared > 4000);
}

TEST_CASE("bake: rotation equivariance within 1e-5 on valid texels") {
  const SkinnedTemplate tpl = build_toy_humanoid();
  const int U = 128;
  const Eigen::Matrix3d R =
      Eigen::AngleAxisd(0.6, Vec3(0.3, 1.0, 0.2).normalized()).toRotationMatrix();
  const UvPositionalMap a = bake_positional_map(tpl.mesh, U);
  const UvPositionalMap b = bake_positional_map(rotated(tpl.mesh, R), U);
  REQUIRE(a.valid == b.valid);
  for (size_t px = 0; px < a.valid.size(); px += 3) {
    if (!a.valid[px]) continue;
    const Vec3 pa(a.data[px * 3], a.data[px * 3 + 1], a.data[px * 3 + 2]);
    const Vec3 pb(b.data[px * 3], b.data[px * 3 + 1], b.data[px * 3 + 2]);
    CHECK((pb - R * pa).norm() <= 1e-5);
  }
}

TEST_CASE("bake: invalid texels are zero; atlas overlap rejected") {
  const SkinnedTemplate tpl = build_toy_humanoid();
  const UvPositionalMap map = bake_positional_map(tpl.mesh, 128);
  for (size_t px = 0; px < map.valid.size(); ++px)
    if (!map.valid[px])
      for (int k = 0; k < 3; ++k) CHECK(map.data[px * 3 + k] == 0.0);

  // two triangles covering the same atlas area must be rejected
  TriMesh bad;
  bad.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0),
                  Vec3(0, 0, 1), Vec3(1, 0, 1), Vec3(0, 1, 1)};
  bad.uv = {Vec2(0.1, 0.1), Vec2(0.9, 0.1), Vec2(0.1, 0.9),
            Vec2(0.1, 0.1), Vec2(0.9, 0.1), Vec2(0.1, 0.9)};
  bad.faces = {{0, 1, 2}, {3, 4, 5}};
  compute_vertex_normals(bad);
  CHECK_THROWS_WITH(bake_positional_map(bad, 32),
                    Catch::Matchers::ContainsSubstring("overlap"));
}

TEST_CASE("bake: seam dilation ring copies values and extends the valid mask") {
  const SkinnedTemplate tpl = build_toy_humanoid();
  const UvPositionalMap map = bake_positional_map(tpl.mesh, 128);
  CHECK(map.core_count > 0);
  int ring = 0;
  for (uint8_t v : map.valid) ring += v;
  CHECK(ring > map.core_count);  // dilation added a border
}

TEST_CASE("bake normals: sphere texels match analytic directions; unit length") {
  const TriMesh sphere = make_uv_sphere(24, 32, 1.0);
  const int U = 128;
  const UvNormalMap nm = bake_normal_map_gt(sphere, U);
  const UvPositionalMap pm = bake_positional_map(sphere, U);
  REQUIRE(nm.size == U);
  int checked = 0;
  for (size_t px = 0; px < nm.valid.size(); ++px) {
    if (!nm.valid[px] || !pm.valid[px]) continue;
    const Vec3 n(nm.data[px * 3], nm.data[px * 3 + 1], nm.data[px * 3 + 2]);
    CHECK(n.norm() == Catch::Approx(1.0).margin(1e-5));
    const Vec3 p(pm.data[px * 3], pm.data[px * 3 + 1], pm.data[px * 3 + 2]);
    if (p.norm() > 0.5) {  // skip dilation-ring copies near chart borders
      CHECK((n - p.normalized()).norm() <= 2e-2);
      ++checked;
    }
  }
  CHECK(checked > 3000);

  // planar mesh: constant normal everywhere
  const TriMesh plane = make_plane(3, 3);
  const UvNormalMap pn = bake_normal_map_gt(plane, 64);
  for (size_t px = 0; px < pn.valid.size(); ++px)
    if (pn.valid[px]) {
      CHECK(pn.data[px * 3 + 2] == Catch::Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("pose encoder: shapes, finiteness, latent gradient flow") {
  const int U = 64;
  ParamRegistry<float> reg;
  Rng rng(3);
  PoseEncoder<float> fp(reg, "fp", 3 + 8, 8, 16, NormMode::kInstance, rng);
  auto z_g = reg.create("latent.Z_G", {1, 8, U, U}, rng, 0.01);

  const SkinnedTemplate tpl = build_toy_humanoid();
  const UvPositionalMap pm = bake_positional_map(tpl.mesh, U);
  const UvNormalMap nm = bake_normal_map_gt(tpl.mesh, U);

  Tape tape;
  Tape::Scope scope(tape);
  auto input = concat_channels(positional_map_tensor<float>(pm), z_g);
  auto out = fp.forward(input);
  // symmetric encoder/decoder: output spatial dims equal input dims
  REQUIRE(out.geo_features.shape() == Shape{1, 16, U, U});
  REQUIRE(out.uv_normals.shape() == Shape{1, 3, U, U});
  for (int64_t i = 0; i < out.geo_features.numel(); ++i)
    REQUIRE(std::isfinite(out.geo_features.data()[i]));

  // one normal-loss backward puts nonzero gradient on Z_G
  auto loss = loss_norm(out.uv_normals, normal_map_tensor<float>(nm),
                        valid_mask_tensor<float>(nm.valid, U));
  backward(tape, loss);
  REQUIRE(z_g.grad_allocated());
  double gsum = 0;
  for (int64_t i = 0; i < z_g.numel(); ++i) gsum += std::abs(z_g.grad()[i]);
  CHECK(gsum > 0.0);
}

TEST_CASE("normal loss is masked: invalid texels cannot change it") {
  const int U = 32;
  const TriMesh plane = make_plane(3, 3);
  const UvNormalMap nm = bake_normal_map_gt(plane, U);
  auto gt = normal_map_tensor<float>(nm);
  auto mask = valid_mask_tensor<float>(nm.valid, U);
  auto pred = Tensor::full({1, 3, U, U}, 0.25f);
  const float base = loss_norm(pred, gt, mask).item();
  // perturb predictions on invalid texels only
  auto pred2 = pred.detached();
  for (int i = 0; i < U * U; ++i)
    if (!nm.valid[i])
      for (int c = 0; c < 3; ++c) pred2.data()[c * U * U + i] = 17.0f;
  CHECK(loss_norm(pred2, gt, mask).item() == base);

  // unit offset on valid texels raises the loss by exactly 1
  auto pred3 = pred.detached();
  for (int i = 0; i < U * U; ++i)
    if (nm.valid[i])
      for (int c = 0; c < 3; ++c) pred3.data()[c * U * U + i] += 1.0f;
  CHECK(loss_norm(pred3, gt, mask).item() == Catch::Approx(base + 1.0).margin(1e-5));
}

TEST_CASE("assemble_pose_features: channel sum and slice identity") {
  Rng rng(4);
  auto geo = Tensor::zeros({1, 32, 16, 16});
  auto z_t = Tensor::zeros({1, 16, 16, 16});
  for (int64_t i = 0; i < z_t.numel(); ++i) z_t.data()[i] = (float)rng.normal();
  auto psi = assemble_pose_features(geo, z_t);
  REQUIRE(psi.shape() == Shape{1, 48, 16, 16});
  // last 16 channels are exactly Z_T
  for (int64_t i = 0; i < z_t.numel(); ++i)
    CHECK(psi.data()[32 * 256 + i] == z_t.data()[i]);
}

TEST_CASE("pose features respond to pose changes with fixed latents") {
  const int U = 64;
  ParamRegistry<float> reg;
  Rng rng(5);
  PoseEncoder<float> fp(reg, "fp", 3 + 8, 8, 16, NormMode::kInstance, rng);
  auto z_g = reg.create("latent.Z_G", {1, 8, U, U}, rng, 0.01);
  auto z_t = reg.create("latent.Z_T", {1, 8, U, U}, rng, 0.01);

  const SkinnedTemplate tpl = build_toy_humanoid();
  PoseParams pose2 = PoseParams::identity(tpl.joint_count());
  pose2.rotations[4] = Quat(Eigen::AngleAxisd(0.7, Vec3(0, 0, 1)));

  auto features_for = [&](const PoseParams& p) {
    const UvPositionalMap pm = bake_positional_map(lbs_pose(tpl, p), U);
    auto enc = fp.forward(concat_channels(positional_map_tensor<float>(pm), z_g));
    return assemble_pose_features(enc.geo_features, z_t);
  };
  auto a = features_for(PoseParams::identity(tpl.joint_count()));
  auto b = features_for(pose2);
  double diff = 0;
  for (int64_t i = 0; i < a.numel(); ++i) diff = std::max<double>(diff, std::abs(a.data()[i] - b.data()[i]));
  CHECK(diff > 1e-4);
}
