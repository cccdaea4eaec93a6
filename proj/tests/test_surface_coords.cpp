#include <catch2/catch_amalgamated.hpp>

#include "hvtr/body_model.hpp"
#include "hvtr/rasterizer.hpp"
#include "hvtr/rng.hpp"
#include "hvtr/surface_coords.hpp"

using namespace hvtr;

TEST_CASE("closest point on triangle: symmetry and corner cases") {
  const Vec3 a(0, 0, 0), b(2, 0, 0), c(0, 2, 0);
  // above the centroid: foot is the centroid
  const Vec3 centroid = (a + b + c) / 3.0;
  auto cp = closest_point_on_triangle(centroid + Vec3(0, 0, 1.5), a, b, c);
  CHECK((cp.point - centroid).norm() < 1e-12);
  CHECK(cp.u == Catch::Approx(1.0 / 3).margin(1e-12));
  CHECK(cp.v == Catch::Approx(1.0 / 3).margin(1e-12));
  CHECK(cp.region == TriRegion::kInterior);

  // exactly vertex a
  cp = closest_point_on_triangle(a, a, b, c);
  CHECK((cp.point - a).norm() == 0);
  CHECK(cp.u == 0);
  CHECK(cp.v == 0);
  CHECK(cp.region == TriRegion::kVertex);

  // degenerate triangle rejected
  CHECK_THROWS(closest_point_on_triangle(Vec3(1, 1, 1), a, a, c));
}

TEST_CASE("closest point beyond edge ab matches a dense sampling oracle") {
  const Vec3 a(0, 0, 0), b(2, 0.3, 0.1), c(0.4, 2, -0.2);
  const Vec3 q(1.0, -1.5, 0.7);
  const auto cp = closest_point_on_triangle(q, a, b, c);
  CHECK(cp.region == TriRegion::kEdge);
  // dense barycentric sweep (about 1e6 samples over the closed triangle)
  double best = 1e30;
  Vec3 best_pt;
  const int n = 1000;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n - i; ++j) {
      const double u = (double)i / n, v = (double)j / n;
      const Vec3 p = a + u * (b - a) + v * (c - a);
      const double d = (q - p).squaredNorm();
      if (d < best) {
        best = d;
        best_pt = p;
      }
    }
  CHECK((cp.point - best_pt).norm() <= 1e-3);  // oracle grid resolution
  CHECK(std::abs((q - cp.point).norm() - std::sqrt(best)) <= 1e-6);
}

TEST_CASE("brute-force projection: on-surface, offset and inside-sign cases") {
  const TriMesh sphere = make_icosphere(3, 1.0);
  // a point on the interior of face 0
  const auto& f = sphere.faces[0];
  const Vec3 on = (sphere.vertices[f[0]] + sphere.vertices[f[1]] + sphere.vertices[f[2]]) / 3.0;
  auto lc = project_point_bruteforce(on, sphere);
  CHECK(lc.face == 0);
  CHECK(std::abs(lc.h) <= 1e-7);
  CHECK(lc.u == Catch::Approx(1.0 / 3).margin(1e-9));
  CHECK(lc.v == Catch::Approx(1.0 / 3).margin(1e-9));

  // centroid + t * face normal lands on the same face at height t
  const Vec3 n = face_normal(sphere, 0);
  lc = project_point_bruteforce(on + 0.01 * n, sphere);
  CHECK(lc.face == 0);
  CHECK(lc.h == Catch::Approx(0.01).margin(1e-9));
  CHECK(lc.u == Catch::Approx(1.0 / 3).margin(1e-6));

  // inside the body: negative height
  lc = project_point_bruteforce(Vec3(0.3, 0.2, -0.1), sphere);
  CHECK(lc.h < 0);
  // far outside: positive height
  lc = project_point_bruteforce(Vec3(3, 0, 0), sphere);
  CHECK(lc.h > 0);
}

TEST_CASE("distance correctness: |h| equals distance to the reconstructed foot") {
  const SkinnedTemplate tpl = build_toy_humanoid();
  Rng rng(21);
  for (int i = 0; i < 200; ++i) {
    const Vec3 q(rng.uniform(-1, 1), rng.uniform(-1.1, 1.0), rng.uniform(-0.5, 0.5));
    const auto lc = project_point_bruteforce(q, tpl.mesh);
    const Vec3 foot = foot_point(lc, tpl.mesh);
    CHECK(std::abs((q - foot).norm() - std::abs(lc.h)) <= 1e-7);
    CHECK(lc.u >= -1e-9);
    CHECK(lc.v >= -1e-9);
    CHECK(lc.u + lc.v <= 1.0 + 1e-9);
  }
}

TEST_CASE("bvh agrees with brute force on humanoid, sphere and cube") {
  const SkinnedTemplate tpl = build_toy_humanoid();
  const TriMesh sphere = make_icosphere(3, 0.8, Vec3(0.1, 0.2, -0.1));
  const TriMesh cube = make_cube(0.6);
  REQUIRE(tpl.mesh.face_count() >= 600);
  struct Case {
    const TriMesh* mesh;
    Vec3 lo, hi;
  };
  const Case cases[3] = {
      {&tpl.mesh, Vec3(-1.0, -1.2, -0.6), Vec3(1.0, 1.1, 0.6)},
      {&sphere, Vec3(-1.2, -1.0, -1.4), Vec3(1.4, 1.6, 1.2)},
      {&cube, Vec3(-1.0, -1.0, -1.0), Vec3(1.0, 1.0, 1.0)},
  };
  Rng rng(31);
  for (const auto& c : cases) {
    const TriangleBvh bvh(*c.mesh);
    int agree = 0;
    for (int i = 0; i < 1000; ++i) {
      const Vec3 q(rng.uniform(c.lo.x(), c.hi.x()), rng.uniform(c.lo.y(), c.hi.y()),
                   rng.uniform(c.lo.z(), c.hi.z()));
      const LocalCoord fast = project_point(q, *c.mesh, bvh);
      const LocalCoord brute = project_point_bruteforce(q, *c.mesh);
      const bool ok = fast.face == brute.face && std::abs(fast.h - brute.h) <= 1e-6 &&
                      std::abs(fast.u - brute.u) <= 1e-6 && std::abs(fast.v - brute.v) <= 1e-6;
      agree += ok;
    }
    CHECK(agree == 1000);
  }
}

TEST_CASE("bvh: query far outside all boxes is still exact") {
  const TriMesh cube = make_cube(0.5);
  const TriangleBvh bvh(cube);
  const Vec3 q(250, -380, 520);
  const LocalCoord fast = project_point(q, cube, bvh);
  const LocalCoord brute = project_point_bruteforce(q, cube);
  CHECK(fast.face == brute.face);
  CHECK(fast.h == Catch::Approx(brute.h).margin(1e-9));
}

TEST_CASE("tie rule: equidistant faces resolve to the lowest index on both paths") {
  // two faces sharing the edge x=0 in the y=0 plane, bent symmetrically
  TriMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(0, 0, 1), Vec3(1, 1, 0), Vec3(-1, 1, 0)};
  m.faces = {{0, 2, 1}, {0, 1, 3}};
  m.uv = {Vec2(0.5, 0.1), Vec2(0.5, 0.9), Vec2(0.9, 0.5), Vec2(0.1, 0.5)};
  compute_vertex_normals(m);
  const TriangleBvh bvh(m);
  // a query on the symmetry plane, equidistant to both faces
  for (const Vec3 q : {Vec3(0, -1, 0.5), Vec3(0, 2, 0.3), Vec3(0, -2, -1.0)}) {
    const LocalCoord brute = project_point_bruteforce(q, m);
    const LocalCoord fast = project_point(q, m, bvh);
    CHECK(brute.face == 0);
    CHECK(fast.face == 0);
    CHECK(fast.h == brute.h);
  }
}

TEST_CASE("to_uv: corners, centroid, and raster cross-check") {
  const SkinnedTemplate tpl = build_toy_humanoid();
  const TriMesh& mesh = tpl.mesh;
  // corner coordinates give the vertex atlas uv exactly
  const auto& f = mesh.faces[10];
  LocalCoord lc;
  lc.face = 10;
  lc.u = 0;
  lc.v = 0;
  CHECK((to_uv(lc, mesh) - mesh.uv[f[0]]).norm() < 1e-12);
  lc.u = 1;
  CHECK((to_uv(lc, mesh) - mesh.uv[f[1]]).norm() < 1e-12);
  lc.u = 0;
  lc.v = 1;
  CHECK((to_uv(lc, mesh) - mesh.uv[f[2]]).norm() < 1e-12);
  lc.u = lc.v = 1.0 / 3;
  const Vec2 c = (mesh.uv[f[0]] + mesh.uv[f[1]] + mesh.uv[f[2]]) / 3.0;
  CHECK((to_uv(lc, mesh) - c).norm() < 1e-12);

  // projecting a visible surface point reproduces the rasterizer's uv
  Camera cam = Camera::look_at(Vec3(0, 0, -3), Vec3(0, 0, 0), 120, 64, 64);
  const RasterOutput ro = rasterize(mesh, cam);
  const TriangleBvh bvh(mesh);
  int tested = 0;
  for (int p = 0; p < 64 * 64 && tested < 50; p += 7) {
    if (!ro.mask[p]) continue;
    const auto& ft = mesh.faces[ro.face_id[p]];
    const Vec3 world = ro.bary[p * 3 + 0] * mesh.vertices[ft[0]] +
                       ro.bary[p * 3 + 1] * mesh.vertices[ft[1]] +
                       ro.bary[p * 3 + 2] * mesh.vertices[ft[2]];
    const LocalCoord plc = project_point(world, mesh, bvh);
    const Vec2 uv = to_uv(plc, mesh);
    // the projected uv must match the rasterized uv (same chart, same spot)
    CHECK(std::abs(uv.x() - ro.uv[p * 2 + 0]) <= 1e-5);
    CHECK(std::abs(uv.y() - ro.uv[p * 2 + 1]) <= 1e-5);
    ++tested;
  }
  CHECK(tested >= 30);
}

TEST_CASE("height is 1-Lipschitz in the query point") {
  const TriMesh sphere = make_icosphere(2, 0.9);
  const TriangleBvh bvh(sphere);
  Rng rng(41);
  for (int i = 0; i < 300; ++i) {
    const Vec3 q1(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5));
    const Vec3 q2 = q1 + Vec3(rng.normal(0, 0.2), rng.normal(0, 0.2), rng.normal(0, 0.2));
    const double h1 = project_point(q1, sphere, bvh).h;
    const double h2 = project_point(q2, sphere, bvh).h;
    CHECK(std::abs(h1 - h2) <= (q1 - q2).norm() + 1e-9);
  }
}
