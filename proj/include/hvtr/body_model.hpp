#pragma once

// Procedural articulated humanoid: a single closed genus-0 surface built as
// a quad-box tree (torso box with head/arm/leg tubes extruded from face
// patches), rounded onto an analytic capsule-union SDF, with per-limb UV
// charts, distance-falloff skinning weights, linear blendshapes and forward
// linear blend skinning.

#include <Eigen/Geometry>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "hvtr/mesh.hpp"

namespace hvtr {

using Quat = Eigen::Quaterniond;

struct SkinnedTemplate {
  TriMesh mesh;  // rest pose
  std::vector<std::string> joint_names;
  std::vector<Vec3> joints;     // rest positions
  std::vector<int> parents;     // -1 for the root
  std::vector<Vec3> bone_ends;  // child joint or extremity tip, per joint
  std::vector<double> bone_radii;
  Eigen::MatrixXd weights;                    // V x J, rows sum to 1
  std::vector<std::vector<Vec3>> shape_dirs;  // [B][V]

  int joint_count() const { return (int)joints.size(); }
  int blendshape_count() const { return (int)shape_dirs.size(); }
};

struct PoseParams {
  std::vector<Quat> rotations;  // unit, per joint
  Vec3 root_translation = Vec3::Zero();

  static PoseParams identity(int joint_count) {
    PoseParams p;
    p.rotations.assign(joint_count, Quat::Identity());
    return p;
  }
};

struct ShapeParams {
  std::vector<double> beta;  // |beta_i| <= 5
};

struct HumanoidSpec {
  // grid resolutions
  int torso_nx = 6, torso_ny = 8, torso_nz = 4;
  int arm_segments = 8, leg_segments = 8, head_segments = 3;
  // skeleton lengths (meters)
  double spine_len = 0.22, chest_len = 0.22, neck_len = 0.16, head_len = 0.18;
  double shoulder_x = 0.20, shoulder_y = 0.54;
  double arm_upper = 0.24, arm_fore = 0.22, hand_len = 0.10;
  double hip_x = 0.11, hip_y = -0.04;
  double leg_upper = 0.40, leg_lower = 0.38, foot_len = 0.10;
  // torso box half extents and vertical span
  double torso_hx = 0.19, torso_hz = 0.12, torso_y0 = -0.10, torso_y1 = 0.62;
};

namespace detail {

inline Vec3 closest_point_on_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 < 1e-300) return a;
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return a + t * ab;
}

struct CapsuleSdf {
  Vec3 a, b;
  double r;
  double eval(const Vec3& p) const { return (p - closest_point_on_segment(p, a, b)).norm() - r; }
};

struct RoundedBoxSdf {
  Vec3 center, half;
  double r;
  double eval(const Vec3& p) const {
    const Vec3 q = (p - center).cwiseAbs() - half;
    const Vec3 qp = q.cwiseMax(0.0);
    return qp.norm() + std::min(q.maxCoeff(), 0.0) - r;
  }
};

struct BodySdf {
  RoundedBoxSdf torso;
  std::vector<CapsuleSdf> capsules;
  double eval(const Vec3& p) const {
    double d = torso.eval(p);
    for (const auto& c : capsules) d = std::min(d, c.eval(p));
    return d;
  }
  Vec3 gradient(const Vec3& p) const {
    const double h = 1e-5;
    Vec3 g;
    for (int k = 0; k < 3; ++k) {
      Vec3 e = Vec3::Zero();
      e[k] = h;
      g[k] = (eval(p + e) - eval(p - e)) / (2 * h);
    }
    return g;
  }
};

// Mesh assembly buffer: quads expand to two CCW triangles.
struct SurfaceBuilder {
  std::vector<Vec3> verts;
  std::vector<Vec2> uvs;
  std::vector<Eigen::Vector3i> tris;

  int add_vertex(const Vec3& p, const Vec2& uv) {
    verts.push_back(p);
    uvs.push_back(uv);
    return (int)verts.size() - 1;
  }
  void add_quad(int a, int b, int c, int d) {
    tris.push_back({a, b, c});
    tris.push_back({a, c, d});
  }
  void add_tri(int a, int b, int c) { tris.push_back({a, b, c}); }
};

// endpoint-exact lerp so box faces share seam coordinates bit-for-bit
inline double grid_coord(int i, int n, double lo, double hi) {
  if (i == 0) return lo;
  if (i == n) return hi;
  return lo + (hi - lo) * i / n;
}

struct ChartRect {
  double x, y, w, h;
  Vec2 at(double u, double v) const { return {x + w * u, y + h * v}; }
};

// Axis-aligned box face grid. du x dv must equal the outward normal; quads
// (u,v)->(u+1,v)->(u+1,v+1)->(u,v+1) are then CCW from outside.
struct FaceGrid {
  int nu = 0, nv = 0;
  std::vector<int> vid;  // (nu+1)*(nv+1)
  int at(int iu, int iv) const { return vid[iv * (nu + 1) + iu]; }
};

struct HoleSpec {
  int u0, u1, v0, v1;  // removed cells [u0,u1) x [v0,v1)
  bool contains(int iu, int iv) const { return iu >= u0 && iu < u1 && iv >= v0 && iv < v1; }
};

inline FaceGrid build_face(SurfaceBuilder& sb, int nu, int nv, const Vec3& origin, int axis_u,
                           int axis_v, double lo_u, double hi_u, double lo_v, double hi_v,
                           const ChartRect& chart, const std::vector<HoleSpec>& holes) {
  FaceGrid fg;
  fg.nu = nu;
  fg.nv = nv;
  fg.vid.resize((nu + 1) * (nv + 1));
  for (int iv = 0; iv <= nv; ++iv)
    for (int iu = 0; iu <= nu; ++iu) {
      Vec3 p = origin;
      p[axis_u] = grid_coord(iu, nu, lo_u, hi_u);
      p[axis_v] = grid_coord(iv, nv, lo_v, hi_v);
      fg.vid[iv * (nu + 1) + iu] = sb.add_vertex(p, chart.at((double)iu / nu, (double)iv / nv));
    }
  for (int iv = 0; iv < nv; ++iv)
    for (int iu = 0; iu < nu; ++iu) {
      bool in_hole = false;
      for (const auto& h : holes) in_hole = in_hole || h.contains(iu, iv);
      if (in_hole) continue;
      sb.add_quad(fg.at(iu, iv), fg.at(iu + 1, iv), fg.at(iu + 1, iv + 1), fg.at(iu, iv + 1));
    }
  return fg;
}

// Hole boundary in CCW (u,v) order; with du x dv = outward this is CCW
// around the extrusion axis by the right-hand rule.
inline std::vector<int> hole_ring(const FaceGrid& fg, const HoleSpec& h) {
  std::vector<int> ring;
  for (int u = h.u0; u < h.u1; ++u) ring.push_back(fg.at(u, h.v0));
  for (int v = h.v0; v < h.v1; ++v) ring.push_back(fg.at(h.u1, v));
  for (int u = h.u1; u > h.u0; --u) ring.push_back(fg.at(u, h.v1));
  for (int v = h.v1; v > h.v0; --v) ring.push_back(fg.at(h.u0, v));
  return ring;
}

struct RadiusProfile {
  // piecewise-linear radius over the limb parameter t in [0,1]
  std::vector<std::pair<double, double>> knots;
  double operator()(double t) const {
    if (t <= knots.front().first) return knots.front().second;
    for (size_t i = 1; i < knots.size(); ++i)
      if (t <= knots[i].first) {
        const double f =
            (t - knots[i - 1].first) / (knots[i].first - knots[i - 1].first);
        return knots[i - 1].second + f * (knots[i].second - knots[i - 1].second);
      }
    return knots.back().second;
  }
};

// Extrudes a tube from a hole ring toward `tip` with a cone cap. `axis_u`
// and `axis_v` span the cross-section plane so that (u, v, axis) is
// right-handed with the outward extrusion axis.
inline void extrude_tube(SurfaceBuilder& sb, const std::vector<int>& base_ring, const Vec3& tip,
                         const Vec3& axis_unit, const Vec3& u_hat, const Vec3& v_hat, int segments,
                         const RadiusProfile& radius, const ChartRect& tube_chart,
                         const Vec2& cap_center, double cap_radius_uv) {
  const int J = (int)base_ring.size();
  Vec3 base_center = Vec3::Zero();
  for (int j = 0; j < J; ++j) base_center += sb.verts[base_ring[j]];
  base_center /= J;

  // angular directions matched to the base ring so the tube does not twist
  std::vector<double> phi(J);
  for (int j = 0; j < J; ++j) {
    const Vec3 d = sb.verts[base_ring[j]] - base_center;
    phi[j] = std::atan2(d.dot(v_hat), d.dot(u_hat));
  }

  // ring 0 duplicates the hole boundary (tube chart, seam column j=J)
  std::vector<std::vector<int>> rings(segments + 1);
  for (int i = 0; i <= segments; ++i) {
    rings[i].resize(J + 1);
    for (int j = 0; j <= J; ++j) {
      const int jj = j % J;
      Vec3 p;
      if (i == 0) {
        p = sb.verts[base_ring[jj]];
      } else {
        const double t = (double)i / segments;
        const Vec3 c = base_center + t * (tip - base_center);
        p = c + radius(t) * (std::cos(phi[jj]) * u_hat + std::sin(phi[jj]) * v_hat);
      }
      rings[i][j] =
          sb.add_vertex(p, tube_chart.at((double)j / J, (double)i / segments));
    }
  }
  for (int i = 0; i < segments; ++i)
    for (int j = 0; j < J; ++j)
      sb.add_quad(rings[i][j], rings[i][j + 1], rings[i + 1][j + 1], rings[i + 1][j]);

  // cap fan: apex past the tip, ring duplicated into a circular chart
  const int apex = sb.add_vertex(tip + radius(1.0) * axis_unit, cap_center);
  std::vector<int> cap_ring(J);
  for (int j = 0; j < J; ++j) {
    const double a = 2 * 3.14159265358979323846 * j / J;
    cap_ring[j] = sb.add_vertex(sb.verts[rings[segments][j]],
                                cap_center + cap_radius_uv * Vec2(std::cos(a), std::sin(a)));
  }
  for (int j = 0; j < J; ++j) sb.add_tri(apex, cap_ring[j], cap_ring[(j + 1) % J]);
}

}  // namespace detail

inline SkinnedTemplate build_toy_humanoid(const HumanoidSpec& spec = {}) {
  for (double len : {spec.spine_len, spec.chest_len, spec.neck_len, spec.head_len, spec.arm_upper,
                     spec.arm_fore, spec.hand_len, spec.leg_upper, spec.leg_lower, spec.foot_len})
    check(len > 0, "build_toy_humanoid: degenerate limb length <= 0");

  SkinnedTemplate tpl;
  // skeleton ------------------------------------------------------------
  const double chest_y = spec.spine_len + spec.chest_len;
  const double neck_y = chest_y + spec.neck_len;
  auto add_joint = [&](const std::string& name, const Vec3& p, int parent, const Vec3& end,
                       double radius) {
    tpl.joint_names.push_back(name);
    tpl.joints.push_back(p);
    tpl.parents.push_back(parent);
    tpl.bone_ends.push_back(end);
    tpl.bone_radii.push_back(radius);
    return (int)tpl.joints.size() - 1;
  };
  const int pelvis = add_joint("pelvis", {0, 0, 0}, -1, {0, spec.spine_len, 0}, 0.14);
  const int spine = add_joint("spine", {0, spec.spine_len, 0}, pelvis, {0, chest_y, 0}, 0.14);
  const int chest = add_joint("chest", {0, chest_y, 0}, spine, {0, neck_y, 0}, 0.05);
  add_joint("head", {0, neck_y, 0}, chest, {0, neck_y + spec.head_len, 0}, 0.10);
  for (int side = 0; side < 2; ++side) {
    const double sx = side == 0 ? 1.0 : -1.0;
    const char* pre = side == 0 ? "l_" : "r_";
    const Vec3 sh(sx * spec.shoulder_x, spec.shoulder_y, 0);
    const Vec3 el = sh + Vec3(sx * spec.arm_upper, 0, 0);
    const Vec3 wr = el + Vec3(sx * spec.arm_fore, 0, 0);
    const Vec3 hd = wr + Vec3(sx * spec.hand_len, 0, 0);
    const int s = add_joint(std::string(pre) + "shoulder", sh, chest, el, 0.062);
    const int e = add_joint(std::string(pre) + "elbow", el, s, wr, 0.050);
    add_joint(std::string(pre) + "wrist", wr, e, hd, 0.046);
  }
  for (int side = 0; side < 2; ++side) {
    const double sx = side == 0 ? 1.0 : -1.0;
    const char* pre = side == 0 ? "l_" : "r_";
    const Vec3 hip(sx * spec.hip_x, spec.hip_y, 0);
    const Vec3 knee = hip + Vec3(0, -spec.leg_upper, 0);
    const Vec3 ankle = knee + Vec3(0, -spec.leg_lower, 0);
    const Vec3 toe = ankle + Vec3(0, -spec.foot_len, 0);
    const int h = add_joint(std::string(pre) + "hip", hip, pelvis, knee, 0.085);
    const int k = add_joint(std::string(pre) + "knee", knee, h, ankle, 0.062);
    add_joint(std::string(pre) + "ankle", ankle, k, toe, 0.055);
  }
  const int J = tpl.joint_count();

  // SDF for rounding ------------------------------------------------------
  detail::BodySdf sdf;
  sdf.torso = {Vec3(0, (spec.torso_y0 + spec.torso_y1) / 2 + 0.005, 0),
               Vec3(spec.torso_hx - 0.045, (spec.torso_y1 - spec.torso_y0) / 2 - 0.04, spec.torso_hz - 0.04),
               0.045};
  for (int j = 0; j < J; ++j) {
    if (j == pelvis || j == spine) continue;  // torso box covers these
    sdf.capsules.push_back({tpl.joints[j], tpl.bone_ends[j], tpl.bone_radii[j]});
  }

  // quad surface ----------------------------------------------------------
  detail::SurfaceBuilder sb;
  const int nx = spec.torso_nx, ny = spec.torso_ny, nz = spec.torso_nz;
  const double hx = spec.torso_hx, hz = spec.torso_hz, y0 = spec.torso_y0, y1 = spec.torso_y1;
  using detail::ChartRect;
  using detail::HoleSpec;

  // charts
  const ChartRect c_front{0.02, 0.02, 0.19, 0.28}, c_back{0.25, 0.02, 0.19, 0.28};
  const ChartRect c_left{0.48, 0.02, 0.13, 0.28}, c_right{0.65, 0.02, 0.13, 0.28};
  const ChartRect c_top{0.02, 0.34, 0.19, 0.10}, c_bottom{0.25, 0.34, 0.19, 0.10};
  const ChartRect c_head{0.82, 0.02, 0.16, 0.10};
  const ChartRect c_arm_l{0.02, 0.50, 0.44, 0.10}, c_arm_r{0.02, 0.64, 0.44, 0.10};
  const ChartRect c_leg_l{0.50, 0.50, 0.44, 0.10}, c_leg_r{0.50, 0.64, 0.44, 0.10};
  const Vec2 cap_head(0.90, 0.21), cap_arm_l(0.50, 0.40), cap_arm_r(0.62, 0.40);
  const Vec2 cap_leg_l(0.74, 0.40), cap_leg_r(0.86, 0.40);

  // patches (in face grid cells)
  const HoleSpec head_hole{nz / 4, nz / 4 + 2, nx / 2 - 1, nx / 2 + 1};     // top face: u->z, v->x
  const HoleSpec arm_hole_l{ny - 2, ny, nz / 4, nz / 4 + 2};                // +x face: u->y, v->z
  const HoleSpec arm_hole_r{nz / 4, nz / 4 + 2, ny - 2, ny};                // -x face: u->z, v->y
  const HoleSpec leg_hole_l{nx - 2, nx, nz / 4, nz / 4 + 2};                // -y face: u->x, v->z
  const HoleSpec leg_hole_r{0, 2, nz / 4, nz / 4 + 2};

  // front +z: (du,dv)=(x,y); back -z: (y,x); left +x: (y,z); right -x: (z,y)
  detail::build_face(sb, nx, ny, Vec3(0, 0, hz), 0, 1, -hx, hx, y0, y1, c_front, {});
  detail::build_face(sb, ny, nx, Vec3(0, 0, -hz), 1, 0, y0, y1, -hx, hx, c_back, {});
  auto face_left =
      detail::build_face(sb, ny, nz, Vec3(hx, 0, 0), 1, 2, y0, y1, -hz, hz, c_left, {arm_hole_l});
  auto face_right =
      detail::build_face(sb, nz, ny, Vec3(-hx, 0, 0), 2, 1, -hz, hz, y0, y1, c_right, {arm_hole_r});
  auto face_top =
      detail::build_face(sb, nz, nx, Vec3(0, y1, 0), 2, 0, -hz, hz, -hx, hx, c_top, {head_hole});
  auto face_bottom = detail::build_face(sb, nx, nz, Vec3(0, y0, 0), 0, 2, -hx, hx, -hz, hz,
                                        c_bottom, {leg_hole_l, leg_hole_r});

  const double m = 1.12;  // build margin over the SDF radii; projection shrinks
  {  // head: up from the top face
    detail::RadiusProfile prof{{{0.0, 0.055 * m}, {0.4, 0.06 * m}, {1.0, 0.10 * m}}};
    detail::extrude_tube(sb, detail::hole_ring(face_top, head_hole), {0, neck_y + spec.head_len, 0},
                         Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(1, 0, 0), spec.head_segments, prof,
                         c_head, cap_head, 0.045);
  }
  {  // left arm: +x
    detail::RadiusProfile prof{
        {{0.0, 0.068 * m}, {0.45, 0.055 * m}, {0.85, 0.050 * m}, {1.0, 0.048 * m}}};
    const Vec3 tip(spec.shoulder_x + spec.arm_upper + spec.arm_fore + spec.hand_len,
                   spec.shoulder_y, 0);
    detail::extrude_tube(sb, detail::hole_ring(face_left, arm_hole_l), tip, Vec3(1, 0, 0),
                         Vec3(0, 1, 0), Vec3(0, 0, 1), spec.arm_segments, prof, c_arm_l, cap_arm_l,
                         0.04);
  }
  {  // right arm: -x
    detail::RadiusProfile prof{
        {{0.0, 0.068 * m}, {0.45, 0.055 * m}, {0.85, 0.050 * m}, {1.0, 0.048 * m}}};
    const Vec3 tip(-(spec.shoulder_x + spec.arm_upper + spec.arm_fore + spec.hand_len),
                   spec.shoulder_y, 0);
    detail::extrude_tube(sb, detail::hole_ring(face_right, arm_hole_r), tip, Vec3(-1, 0, 0),
                         Vec3(0, 0, 1), Vec3(0, 1, 0), spec.arm_segments, prof, c_arm_r, cap_arm_r,
                         0.04);
  }
  {  // legs: -y
    detail::RadiusProfile prof{
        {{0.0, 0.095 * m}, {0.45, 0.070 * m}, {0.9, 0.060 * m}, {1.0, 0.058 * m}}};
    const double tip_y = spec.hip_y - spec.leg_upper - spec.leg_lower - spec.foot_len;
    detail::extrude_tube(sb, detail::hole_ring(face_bottom, leg_hole_l), {spec.hip_x, tip_y, 0},
                         Vec3(0, -1, 0), Vec3(1, 0, 0), Vec3(0, 0, 1), spec.leg_segments, prof,
                         c_leg_l, cap_leg_l, 0.04);
    detail::extrude_tube(sb, detail::hole_ring(face_bottom, leg_hole_r), {-spec.hip_x, tip_y, 0},
                         Vec3(0, -1, 0), Vec3(1, 0, 0), Vec3(0, 0, 1), spec.leg_segments, prof,
                         c_leg_r, cap_leg_r, 0.04);
  }

  // round onto the SDF (pure function of position: welds survive)
  for (auto& p : sb.verts) {
    for (int it = 0; it < 3; ++it) {
      const double d = sdf.eval(p);
      Vec3 g = sdf.gradient(p);
      const double g2 = g.squaredNorm();
      if (g2 < 1e-12) break;
      p -= 0.8 * d * g / g2;
    }
  }

  tpl.mesh.vertices = std::move(sb.verts);
  tpl.mesh.uv = std::move(sb.uvs);
  tpl.mesh.faces = std::move(sb.tris);
  compute_vertex_normals(tpl.mesh);

  // skinning weights: falloff on bone distance, computed per welded group --
  const int V = tpl.mesh.vertex_count();
  const std::vector<int> rep = weld_map(tpl.mesh);
  tpl.weights = Eigen::MatrixXd::Zero(V, J);
  const double falloff = 0.06;
  for (int v = 0; v < V; ++v) {
    if (rep[v] != v) {
      tpl.weights.row(v) = tpl.weights.row(rep[v]);
      continue;
    }
    const Vec3& p = tpl.mesh.vertices[v];
    std::vector<std::pair<double, int>> wj(J);
    for (int j = 0; j < J; ++j) {
      const double d =
          (p - detail::closest_point_on_segment(p, tpl.joints[j], tpl.bone_ends[j])).norm();
      wj[j] = {std::exp(-(d * d) / (falloff * falloff)), j};
    }
    std::sort(wj.begin(), wj.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    double total = 0;
    for (int k = 0; k < 4; ++k) total += wj[k].first;
    for (int k = 0; k < 4; ++k) tpl.weights(v, wj[k].second) = wj[k].first / total;
  }

  // blendshapes: 0 = limb/overall length, 1 = girth (radial from skeleton)
  tpl.shape_dirs.assign(2, std::vector<Vec3>(V));
  for (int v = 0; v < V; ++v) {
    const Vec3& p = tpl.mesh.vertices[rep[v]];
    tpl.shape_dirs[0][v] = 0.06 * p;
    Vec3 nearest = Vec3::Zero();
    double best = 1e30;
    for (int j = 0; j < J; ++j) {
      const Vec3 q = detail::closest_point_on_segment(p, tpl.joints[j], tpl.bone_ends[j]);
      const double d = (p - q).squaredNorm();
      if (d < best) {
        best = d;
        nearest = q;
      }
    }
    tpl.shape_dirs[1][v] = 0.06 * (p - nearest);
  }
  return tpl;
}

// v_posed = sum_j w_vj * G_j(pose) * (v_rest + shape_dirs * beta), where G_j
// composes forward kinematics with the inverse rest transform.
inline TriMesh lbs_pose(const SkinnedTemplate& tpl, const PoseParams& pose,
                        const ShapeParams& shape = {}) {
  const int J = tpl.joint_count();
  check((int)pose.rotations.size() == J, "lbs_pose: pose has " +
                                             std::to_string(pose.rotations.size()) +
                                             " rotations, template has " + std::to_string(J));
  for (const auto& q : pose.rotations)
    check(std::abs(q.norm() - 1.0) <= 1e-6, "lbs_pose: non-unit quaternion");
  check((int)shape.beta.size() <= tpl.blendshape_count(), "lbs_pose: too many shape coefficients");
  for (double b : shape.beta) {
    check(std::isfinite(b), "lbs_pose: non-finite shape coefficient");
    check(std::abs(b) <= 5.0, "lbs_pose: |beta| must be <= 5");
  }

  std::vector<Eigen::Affine3d> global(J);
  for (int j = 0; j < J; ++j) {
    Eigen::Affine3d local;
    if (tpl.parents[j] < 0) {
      local = Eigen::Translation3d(pose.root_translation + tpl.joints[j]) * pose.rotations[j];
      global[j] = local;
    } else {
      local = Eigen::Translation3d(tpl.joints[j] - tpl.joints[tpl.parents[j]]) * pose.rotations[j];
      global[j] = global[tpl.parents[j]] * local;
    }
  }
  std::vector<Eigen::Affine3d> skin(J);
  for (int j = 0; j < J; ++j) skin[j] = global[j] * Eigen::Translation3d(-tpl.joints[j]);

  TriMesh out = tpl.mesh;
  const int V = out.vertex_count();
  for (int v = 0; v < V; ++v) {
    Vec3 rest = tpl.mesh.vertices[v];
    for (size_t b = 0; b < shape.beta.size(); ++b) rest += shape.beta[b] * tpl.shape_dirs[b][v];
    Vec3 p = Vec3::Zero();
    for (int j = 0; j < J; ++j) {
      const double w = tpl.weights(v, j);
      if (w != 0.0) p += w * (skin[j] * rest);
    }
    out.vertices[v] = p;
  }
  compute_vertex_normals(out);
  return out;
}

}  // namespace hvtr
