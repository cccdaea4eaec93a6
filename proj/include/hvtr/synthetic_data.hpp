#pragma once

// Deterministic multi-camera ground-truth sequences of the toy humanoid:
// procedural atlas-space albedo, Lambertian shading with one fixed
// directional light, black background, exact rasterizer-coverage masks.
// Everything regenerates byte-identically from (spec, seed).

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hvtr/body_model.hpp"
#include "hvtr/image_io.hpp"
#include "hvtr/rasterizer.hpp"
#include "hvtr/rng.hpp"

namespace hvtr {

struct SequenceSpec {
  int frames = 200;
  int train_cameras = 4;
  int test_cameras = 1;
  int image_size = 128;
  double camera_radius = 2.9;
  double camera_height = -0.05;  // ring height; the body is centered near y=0
  double focal_scale = 1.4;      // focal length = focal_scale * image_size
  double motion_amplitude = 1.0;  // scales the per-joint swing table
  double motion_cycles = 2.0;     // full trajectory periods over the sequence
  uint64_t texture_seed = 7;
  double split_fraction = 0.9;  // leading fraction of frames is the train set
  uint64_t seed = 42;

  void validate() const {
    check(frames > 0, "sequence spec: zero frames");
    check(train_cameras >= 1 && test_cameras >= 1, "sequence spec: need train and test cameras");
    check(image_size >= 16, "sequence spec: image too small");
    check(split_fraction > 0 && split_fraction < 1, "sequence spec: split fraction must be in (0,1)");
    check(camera_radius > 0 && focal_scale > 0, "sequence spec: bad camera parameters");
  }

  int camera_count() const { return train_cameras + test_cameras; }
  int train_frames() const {
    const int tf = (int)(frames * split_fraction);
    return std::max(1, std::min(tf, frames - 1));
  }
};

// ---------------------------------------------------------------------------
// Pose trajectory: per-joint sinusoids around the rest pose. Axes and base
// amplitudes come from a fixed table keyed by joint name; frequencies and
// phases are drawn once per joint from the spec seed.

namespace detail {

struct JointMotion {
  Vec3 axis;
  double amplitude, frequency, phase;
};

inline std::vector<JointMotion> motion_table(const SkinnedTemplate& tpl, const SequenceSpec& spec) {
  std::vector<JointMotion> motions(tpl.joint_count());
  for (int j = 0; j < tpl.joint_count(); ++j) {
    const std::string& n = tpl.joint_names[j];
    Vec3 axis(0, 0, 1);
    double amp = 0.1;
    if (n == "pelvis") {
      axis = Vec3(0, 1, 0);
      amp = 0.15;
    } else if (n == "spine" || n == "chest") {
      axis = Vec3(0, 0, 1);
      amp = 0.08;
    } else if (n == "head") {
      axis = Vec3(0, 1, 0);
      amp = 0.25;
    } else if (n.find("shoulder") != std::string::npos) {
      axis = Vec3(0, 0, 1);
      amp = 0.40;
    } else if (n.find("elbow") != std::string::npos) {
      axis = Vec3(0, 1, 0);
      amp = 0.55;
    } else if (n.find("wrist") != std::string::npos) {
      axis = Vec3(0, 1, 0);
      amp = 0.25;
    } else if (n.find("hip") != std::string::npos) {
      axis = Vec3(1, 0, 0);
      amp = 0.40;
    } else if (n.find("knee") != std::string::npos) {
      axis = Vec3(1, 0, 0);
      amp = 0.50;
    } else if (n.find("ankle") != std::string::npos) {
      axis = Vec3(1, 0, 0);
      amp = 0.20;
    }
    Rng rng(Rng::mix(spec.seed, 1000 + j));
    motions[j].axis = axis;
    motions[j].amplitude = amp * spec.motion_amplitude;
    motions[j].frequency = spec.motion_cycles * (0.6 + 0.8 * rng.uniform());
    motions[j].phase = rng.uniform(0, 2 * 3.14159265358979323846);
  }
  return motions;
}

}  // namespace detail

inline PoseParams trajectory_pose(const SkinnedTemplate& tpl, const SequenceSpec& spec,
                                  const std::vector<detail::JointMotion>& motions, int frame) {
  PoseParams pose = PoseParams::identity(tpl.joint_count());
  const double t = (double)frame / spec.frames;
  for (int j = 0; j < tpl.joint_count(); ++j) {
    const auto& m = motions[j];
    const double angle =
        m.amplitude * std::sin(2 * 3.14159265358979323846 * m.frequency * t + m.phase);
    pose.rotations[j] = Quat(Eigen::AngleAxisd(angle, m.axis));
  }
  pose.root_translation = Vec3(0, 0.03 * std::sin(2 * 3.14159265358979323846 * t), 0);
  return pose;
}

inline Camera ring_camera(const SequenceSpec& spec, int cam_index) {
  const double angle = 2 * 3.14159265358979323846 * cam_index / spec.camera_count();
  const Vec3 eye(spec.camera_radius * std::sin(angle), spec.camera_height,
                 spec.camera_radius * std::cos(angle));
  return Camera::look_at(eye, Vec3(0, -0.05, 0), spec.focal_scale * spec.image_size,
                         spec.image_size, spec.image_size);
}

// Procedural atlas-space albedo: hashed color patches on a fixed grid, with
// a stripe modulation so neighboring texels stay correlated.
inline Vec3 procedural_albedo(double u, double v, uint64_t texture_seed) {
  const int K = 24;
  const int cx = std::min(K - 1, std::max(0, (int)(u * K)));
  const int cy = std::min(K - 1, std::max(0, (int)(v * K)));
  const uint64_t h = Rng::mix(texture_seed, (uint64_t)(cy * K + cx));
  Vec3 base((double)((h >> 16) & 0xff) / 255.0, (double)((h >> 24) & 0xff) / 255.0,
            (double)((h >> 32) & 0xff) / 255.0);
  base = Vec3(0.2, 0.2, 0.2) + 0.75 * base;
  const double stripe = 0.85 + 0.15 * std::sin(2 * 3.14159265358979323846 * (u * 40 + v * 7));
  return base * stripe;
}

struct ShadedFrame {
  Image image;  // RGB in [0,1], black background
  Image mask;   // 1 channel, exact rasterizer coverage
};

inline ShadedFrame shade_frame(const TriMesh& posed, const Camera& cam, uint64_t texture_seed) {
  const RasterOutput ro = rasterize(posed, cam);
  ShadedFrame out;
  out.image = Image(cam.width, cam.height, 3);
  out.mask = Image(cam.width, cam.height, 1);
  const Vec3 light = Vec3(0.4, 0.8, 0.45).normalized();
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const size_t p = (size_t)y * cam.width + x;
      if (!ro.mask[p]) continue;
      out.mask.at(x, y, 0) = 1.0f;
      const Vec3 n(ro.normal[p * 3], ro.normal[p * 3 + 1], ro.normal[p * 3 + 2]);
      const Vec3 alb = procedural_albedo(ro.uv[p * 2], ro.uv[p * 2 + 1], texture_seed);
      const double shade = 0.30 + 0.70 * std::max(0.0, n.dot(light));
      for (int c = 0; c < 3; ++c)
        out.image.at(x, y, c) = (float)std::min(1.0, std::max(0.0, alb[c] * shade));
    }
  return out;
}

// ---------------------------------------------------------------------------
// On-disk dataset

struct DatasetItem {
  int frame = 0, cam = 0;
  bool is_train = false;
  std::string image_path, mask_path, pose_path, camera_path;
};

struct DatasetManifest {
  std::string root;
  SequenceSpec spec;
  std::vector<DatasetItem> items;

  std::vector<DatasetItem> split(bool train) const {
    std::vector<DatasetItem> out;
    for (const auto& it : items)
      if (it.is_train == train) out.push_back(it);
    return out;
  }
};

namespace detail {

inline std::string frame_cam_name(int frame, int cam) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "f%04d_c%d", frame, cam);
  return buf;
}

}  // namespace detail

inline void save_pose_file(const std::string& path, const PoseParams& pose,
                           const ShapeParams& shape) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write pose file " + path);
  os.precision(17);
  os << "HVTRPOSE1\n" << pose.rotations.size() << "\n";
  for (const auto& q : pose.rotations)
    os << q.w() << " " << q.x() << " " << q.y() << " " << q.z() << "\n";
  os << "root " << pose.root_translation.x() << " " << pose.root_translation.y() << " "
     << pose.root_translation.z() << "\n";
  os << "beta " << shape.beta.size();
  for (double b : shape.beta) os << " " << b;
  os << "\n";
}

inline void load_pose_file(const std::string& path, PoseParams* pose, ShapeParams* shape) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read pose file " + path);
  std::string magic;
  is >> magic;
  check(magic == "HVTRPOSE1", "bad pose file header in " + path);
  int joints = 0;
  is >> joints;
  pose->rotations.resize(joints);
  for (int j = 0; j < joints; ++j) {
    double w, x, y, z;
    is >> w >> x >> y >> z;
    pose->rotations[j] = Quat(w, x, y, z);
  }
  std::string tag;
  is >> tag;
  check(tag == "root", "bad pose file (missing root) in " + path);
  is >> pose->root_translation.x() >> pose->root_translation.y() >> pose->root_translation.z();
  is >> tag;
  check(tag == "beta", "bad pose file (missing beta) in " + path);
  int nb = 0;
  is >> nb;
  shape->beta.resize(nb);
  for (int b = 0; b < nb; ++b) is >> shape->beta[b];
}

inline void save_camera_file(const std::string& path, const Camera& cam) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write camera file " + path);
  os.precision(17);
  os << "HVTRCAM1\n";
  os << cam.fx << " " << cam.fy << " " << cam.cx << " " << cam.cy << "\n";
  for (int r = 0; r < 3; ++r)
    os << cam.R(r, 0) << " " << cam.R(r, 1) << " " << cam.R(r, 2) << "\n";
  os << cam.t.x() << " " << cam.t.y() << " " << cam.t.z() << "\n";
  os << cam.width << " " << cam.height << "\n";
}

inline Camera load_camera_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read camera file " + path);
  std::string magic;
  is >> magic;
  check(magic == "HVTRCAM1", "bad camera file header in " + path);
  Camera cam;
  is >> cam.fx >> cam.fy >> cam.cx >> cam.cy;
  for (int r = 0; r < 3; ++r) is >> cam.R(r, 0) >> cam.R(r, 1) >> cam.R(r, 2);
  is >> cam.t.x() >> cam.t.y() >> cam.t.z();
  is >> cam.width >> cam.height;
  cam.validate();
  return cam;
}

inline DatasetManifest generate_dataset(const SequenceSpec& spec, const std::string& out_dir) {
  spec.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  for (const char* sub : {"images", "masks", "poses", "cameras"})
    fs::create_directories(fs::path(out_dir) / sub, ec);
  {  // writability probe; unwritable targets must fail loudly
    std::ofstream probe(out_dir + "/.write_probe");
    if (!probe) throw std::runtime_error("output directory not writable: " + out_dir);
  }
  fs::remove(out_dir + "/.write_probe", ec);

  const SkinnedTemplate tpl = build_toy_humanoid();
  const auto motions = detail::motion_table(tpl, spec);

  DatasetManifest manifest;
  manifest.root = out_dir;
  manifest.spec = spec;

  std::vector<Camera> cams(spec.camera_count());
  for (int c = 0; c < spec.camera_count(); ++c) {
    cams[c] = ring_camera(spec, c);
    save_camera_file(out_dir + "/cameras/cam" + std::to_string(c) + ".txt", cams[c]);
  }

  const int train_frames = spec.train_frames();
  for (int f = 0; f < spec.frames; ++f) {
    const PoseParams pose = trajectory_pose(tpl, spec, motions, f);
    char pbuf[64];
    std::snprintf(pbuf, sizeof(pbuf), "poses/f%04d.txt", f);
    save_pose_file(out_dir + "/" + pbuf, pose, ShapeParams{});
    const TriMesh posed = lbs_pose(tpl, pose);
    for (int c = 0; c < spec.camera_count(); ++c) {
      const ShadedFrame sf = shade_frame(posed, cams[c], spec.texture_seed);
      const std::string stem = detail::frame_cam_name(f, c);
      DatasetItem item;
      item.frame = f;
      item.cam = c;
      item.is_train = f < train_frames && c < spec.train_cameras;
      item.image_path = "images/" + stem + ".ppm";
      item.mask_path = "masks/" + stem + ".pgm";
      item.pose_path = pbuf;
      item.camera_path = "cameras/cam" + std::to_string(c) + ".txt";
      save_pnm(sf.image, out_dir + "/" + item.image_path);
      save_pnm(sf.mask, out_dir + "/" + item.mask_path);
      manifest.items.push_back(item);
    }
  }

  std::ofstream mf(out_dir + "/manifest.txt");
  if (!mf) throw std::runtime_error("cannot write manifest in " + out_dir);
  mf.precision(17);
  mf << "HVTRDATA1\n";
  mf << "frames " << spec.frames << "\n";
  mf << "train_cameras " << spec.train_cameras << "\n";
  mf << "test_cameras " << spec.test_cameras << "\n";
  mf << "image_size " << spec.image_size << "\n";
  mf << "camera_radius " << spec.camera_radius << "\n";
  mf << "camera_height " << spec.camera_height << "\n";
  mf << "focal_scale " << spec.focal_scale << "\n";
  mf << "motion_amplitude " << spec.motion_amplitude << "\n";
  mf << "motion_cycles " << spec.motion_cycles << "\n";
  mf << "texture_seed " << spec.texture_seed << "\n";
  mf << "split_fraction " << spec.split_fraction << "\n";
  mf << "seed " << spec.seed << "\n";
  for (const auto& it : manifest.items)
    mf << "entry " << it.frame << " " << it.cam << " " << (it.is_train ? "train" : "test") << " "
       << it.image_path << " " << it.mask_path << " " << it.pose_path << " " << it.camera_path
       << "\n";
  return manifest;
}

inline DatasetManifest load_dataset(const std::string& manifest_path) {
  std::ifstream is(manifest_path);
  if (!is) throw std::runtime_error("cannot read manifest " + manifest_path);
  DatasetManifest manifest;
  manifest.root = std::filesystem::path(manifest_path).parent_path().string();
  if (manifest.root.empty()) manifest.root = ".";
  std::string line;
  std::getline(is, line);
  check(line == "HVTRDATA1", "bad manifest header in " + manifest_path);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "entry") {
      DatasetItem it;
      std::string split;
      ls >> it.frame >> it.cam >> split >> it.image_path >> it.mask_path >> it.pose_path >>
          it.camera_path;
      it.is_train = split == "train";
      for (const std::string* p : {&it.image_path, &it.mask_path, &it.pose_path, &it.camera_path})
        check(std::filesystem::exists(manifest.root + "/" + *p),
              "manifest references missing file " + *p);
      manifest.items.push_back(it);
    } else if (key == "frames")
      ls >> manifest.spec.frames;
    else if (key == "train_cameras")
      ls >> manifest.spec.train_cameras;
    else if (key == "test_cameras")
      ls >> manifest.spec.test_cameras;
    else if (key == "image_size")
      ls >> manifest.spec.image_size;
    else if (key == "camera_radius")
      ls >> manifest.spec.camera_radius;
    else if (key == "camera_height")
      ls >> manifest.spec.camera_height;
    else if (key == "focal_scale")
      ls >> manifest.spec.focal_scale;
    else if (key == "motion_amplitude")
      ls >> manifest.spec.motion_amplitude;
    else if (key == "motion_cycles")
      ls >> manifest.spec.motion_cycles;
    else if (key == "texture_seed")
      ls >> manifest.spec.texture_seed;
    else if (key == "split_fraction")
      ls >> manifest.spec.split_fraction;
    else if (key == "seed")
      ls >> manifest.spec.seed;
    else
      throw std::invalid_argument("manifest: unknown key '" + key + "'");
  }
  return manifest;
}

}  // namespace hvtr
