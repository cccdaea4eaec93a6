#include <catch2/catch_amalgamated.hpp>

#include "hvtr/body_model.hpp"
#include "hvtr/rasterizer.hpp"

using namespace hvtr;

namespace {

Camera front_camera(int size, double focal, double dist = 3.0) {
  return Camera::look_at(Vec3(0, 0, -dist), Vec3(0, 0, 0), focal, size, size);
}

// single triangle spanning the whole frustum at constant uv
TriMesh big_triangle(double z, Vec2 uv) {
  TriMesh m;
  m.vertices = {Vec3(-50, -50, z), Vec3(50, -50, z), Vec3(0, 80, z)};
  m.faces = {{0, 2, 1}};
  m.uv = {uv, uv, uv};
  compute_vertex_normals(m);
  return m;
}

}  // namespace

TEST_CASE("camera validation") {
  Camera cam = front_camera(32, 40);
  CHECK_NOTHROW(cam.validate());
  Camera bad = cam;
  bad.fx = 0;
  CHECK_THROWS(bad.validate());
  bad = cam;
  bad.R(0, 0) += 0.01;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("rasterize: full-frustum triangle with constant uv covers everything") {
  Camera cam = front_camera(24, 30);
  const RasterOutput ro = rasterize(big_triangle(-1.0, Vec2(0.5, 0.5)), cam);
  CHECK(ro.covered() == 24 * 24);
  for (int p = 0; p < 24 * 24; ++p) {
    CHECK(ro.uv[p * 2 + 0] == Catch::Approx(0.5).margin(1e-9));
    CHECK(ro.uv[p * 2 + 1] == Catch::Approx(0.5).margin(1e-9));
    CHECK(ro.mask[p] == 1);
    CHECK(ro.face_id[p] == 0);
    CHECK(std::isfinite(ro.depth[p]));
    const double b = ro.bary[p * 3] + ro.bary[p * 3 + 1] + ro.bary[p * 3 + 2];
    CHECK(b == Catch::Approx(1.0).margin(1e-5));
    CHECK(ro.bary[p * 3] >= -1e-12);
  }
}

TEST_CASE("raster invariants: mask, face_id and depth agree") {
  Camera cam = front_camera(40, 55);
  const RasterOutput ro = rasterize(make_icosphere(2, 0.9), cam);
  for (int p = 0; p < 40 * 40; ++p) {
    CHECK((ro.mask[p] == 1) == (ro.face_id[p] >= 0));
    CHECK((ro.mask[p] == 1) == std::isfinite(ro.depth[p]));
  }
}

TEST_CASE("rasterize: z-buffer keeps the nearer of two parallel triangles") {
  TriMesh near_tri = big_triangle(-2.0, Vec2(0.25, 0.25));  // camera depth 1
  TriMesh far_tri = big_triangle(-1.0, Vec2(0.75, 0.75));   // camera depth 2
  TriMesh both = near_tri;
  const int base = both.vertex_count();
  for (const auto& v : far_tri.vertices) both.vertices.push_back(v);
  for (const auto& u : far_tri.uv) both.uv.push_back(u);
  for (auto f : far_tri.faces) both.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
  compute_vertex_normals(both);
  Camera cam = front_camera(16, 20);
  const RasterOutput ro = rasterize(both, cam);
  for (int p = 0; p < 16 * 16; ++p) {
    REQUIRE(ro.mask[p] == 1);
    CHECK(ro.face_id[p] == 0);
    CHECK(ro.uv[p * 2] == Catch::Approx(0.25).margin(1e-9));
    CHECK(ro.depth[p] == Catch::Approx(1.0).margin(1e-6));
  }
}

TEST_CASE("rasterize: unit-sphere center depth matches the analytic intersection") {
  // unit sphere at camera depth 3: first crossing at depth 2
  Camera cam = front_camera(64, 100);
  const RasterOutput ro = rasterize(make_icosphere(3, 1.0), cam);
  const size_t center = (size_t)32 * 64 + 32;
  REQUIRE(ro.mask[center] == 1);
  CHECK(ro.depth[center] == Catch::Approx(2.0).margin(1e-2));
  CHECK(ro.normal[center * 3 + 2] == Catch::Approx(-1.0).margin(1e-2));
}

TEST_CASE("rasterize: covered-pixel barycentric reconstruction within half a pixel") {
  Camera cam = front_camera(48, 60);
  const TriMesh sphere = make_icosphere(2, 0.8, Vec3(0.1, -0.05, 0.2));
  const RasterOutput ro = rasterize(sphere, cam);
  REQUIRE(ro.covered() > 100);
  for (int py = 0; py < 48; ++py)
    for (int px = 0; px < 48; ++px) {
      const size_t p = (size_t)py * 48 + px;
      if (!ro.mask[p]) continue;
      const auto& f = sphere.faces[ro.face_id[p]];
      const Vec3 world = ro.bary[p * 3 + 0] * sphere.vertices[f[0]] +
                         ro.bary[p * 3 + 1] * sphere.vertices[f[1]] +
                         ro.bary[p * 3 + 2] * sphere.vertices[f[2]];
      const Vec3 c = cam.world_to_cam(world);
      const double sx = cam.fx * c.x() / c.z() + cam.cx;
      const double sy = cam.fy * c.y() / c.z() + cam.cy;
      CHECK(std::abs(sx - (px + 0.5)) <= 0.5);
      CHECK(std::abs(sy - (py + 0.5)) <= 0.5);
    }
}

TEST_CASE("rasterize: degenerate triangles are skipped and counted") {
  TriMesh m = big_triangle(-1.0, Vec2(0.5, 0.5));
  const int base = m.vertex_count();
  m.vertices.push_back(Vec3(0, 0, -1));
  m.vertices.push_back(Vec3(0, 0, -1));
  m.vertices.push_back(Vec3(0, 1, -1));
  for (int i = 0; i < 3; ++i) m.uv.push_back(Vec2(0, 0));
  m.faces.push_back({base, base + 1, base + 2});
  m.normals.resize(m.vertices.size(), Vec3(0, 0, 1));
  Camera cam = front_camera(8, 10);
  const RasterOutput ro = rasterize(m, cam);
  CHECK(ro.degenerate_skipped == 1);
}

TEST_CASE("dilate_mesh: sphere grows radially; d=0 is identity") {
  const TriMesh sphere = make_icosphere(2, 1.0);
  const TriMesh grown = dilate_mesh(sphere, 0.12);
  for (const auto& v : grown.vertices) CHECK(v.norm() == Catch::Approx(1.12).margin(1e-6));
  const TriMesh same = dilate_mesh(sphere, 0.0);
  for (int v = 0; v < sphere.vertex_count(); ++v)
    CHECK((same.vertices[v] - sphere.vertices[v]).norm() < 1e-12);
  CHECK_THROWS(dilate_mesh(sphere, -0.1));
}

TEST_CASE("dilate_mesh: silhouette grows monotonically with d") {
  const SkinnedTemplate tpl = build_toy_humanoid();
  Camera cam = front_camera(96, 140, 3.0);
  const RasterOutput r0 = rasterize(dilate_mesh(tpl.mesh, 0.0), cam);
  const RasterOutput r1 = rasterize(dilate_mesh(tpl.mesh, 0.06), cam);
  const RasterOutput r2 = rasterize(dilate_mesh(tpl.mesh, 0.12), cam);
  for (int p = 0; p < 96 * 96; ++p) {
    if (r0.mask[p]) CHECK(r1.mask[p] == 1);
    if (r1.mask[p]) CHECK(r2.mask[p] == 1);
  }
  CHECK(r2.covered() > r1.covered());
  CHECK(r1.covered() > r0.covered());
}

TEST_CASE("near_far: dilated unit sphere center pixel matches the analytic chord") {
  Camera cam = front_camera(64, 100);
  const TriMesh dilated = dilate_mesh(make_icosphere(3, 1.0), 0.12);
  const NearFarBuffers nf = near_far_buffers(dilated, cam);
  const size_t center = (size_t)32 * 64 + 32;
  REQUIRE(nf.hit[center] == 1);
  CHECK(nf.near_depth[center] == Catch::Approx(3.0 - 1.12).margin(1e-2));
  CHECK(nf.far_depth[center] == Catch::Approx(3.0 + 1.12).margin(1e-2));
  CHECK(nf.hit[0] == 0);  // corner pixel misses the dilated mesh
  for (int p = 0; p < 64 * 64; ++p)
    if (nf.hit[p]) CHECK(nf.near_depth[p] < nf.far_depth[p]);
}

TEST_CASE("near_far: brackets every visible surface depth") {
  const SkinnedTemplate tpl = build_toy_humanoid();
  Camera cam = front_camera(48, 70, 3.0);
  const RasterOutput surface = rasterize(tpl.mesh, cam);
  const NearFarBuffers nf = near_far_buffers(dilate_mesh(tpl.mesh, 0.12), cam);
  for (int p = 0; p < 48 * 48; ++p) {
    if (!surface.mask[p]) continue;
    REQUIRE(nf.hit[p] == 1);
    CHECK(surface.depth[p] >= nf.near_depth[p] - 1e-9);
    CHECK(surface.depth[p] <= nf.far_depth[p] + 1e-9);
  }
}
