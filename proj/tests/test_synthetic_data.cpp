#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "hvtr/synthetic_data.hpp"

using namespace hvtr;

namespace {

SequenceSpec tiny_spec() {
  SequenceSpec spec;
  spec.frames = 6;
  spec.train_cameras = 2;
  spec.test_cameras = 1;
  spec.image_size = 48;
  spec.split_fraction = 0.67;
  return spec;
}

std::vector<char> slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is);
  return std::vector<char>(std::istreambuf_iterator<char>(is), {});
}

}  // namespace

TEST_CASE("generate: deterministic bytes, consistent masks, split structure") {
  namespace fs = std::filesystem;
  const std::string dir_a = "/tmp/hvtr_data_a", dir_b = "/tmp/hvtr_data_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  const SequenceSpec spec = tiny_spec();
  const DatasetManifest a = generate_dataset(spec, dir_a);
  const DatasetManifest b = generate_dataset(spec, dir_b);

  // byte-identical outputs for the same spec + seed
  CHECK(slurp(dir_a + "/manifest.txt") == slurp(dir_b + "/manifest.txt"));
  for (const auto& item : a.items) {
    CHECK(slurp(dir_a + "/" + item.image_path) == slurp(dir_b + "/" + item.image_path));
    CHECK(slurp(dir_a + "/" + item.mask_path) == slurp(dir_b + "/" + item.mask_path));
  }

  // frame x camera coverage, split disjointness, expected train count
  CHECK((int)a.items.size() == spec.frames * spec.camera_count());
  const auto train = a.split(true), test = a.split(false);
  CHECK((int)train.size() == spec.train_frames() * spec.train_cameras);
  CHECK(train.size() + test.size() == a.items.size());
  for (const auto& tr : train)
    for (const auto& te : test) CHECK((tr.frame != te.frame || tr.cam != te.cam));
  // a held-out camera's extrinsics differ from every train camera
  const Camera test_cam = load_camera_file(dir_a + "/cameras/cam2.txt");
  for (int c = 0; c < spec.train_cameras; ++c) {
    const Camera tc = load_camera_file(dir_a + "/cameras/cam" + std::to_string(c) + ".txt");
    CHECK((tc.position() - test_cam.position()).norm() > 0.5);
  }

  // image black exactly where mask is zero; mask matches rasterizer coverage
  for (const auto& item : a.items) {
    const Image img = load_pnm(dir_a + "/" + item.image_path);
    const Image mask = load_pnm(dir_a + "/" + item.mask_path);
    REQUIRE(img.width == spec.image_size);
    int mask_px = 0;
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        const bool on = mask.at(x, y, 0) >= 0.5f;
        mask_px += on;
        if (!on)
          for (int c = 0; c < 3; ++c) CHECK(img.at(x, y, c) == 0.0f);
      }
    CHECK(mask_px > 100);
    // decoded values are within [0, 1]
    for (float v : img.data) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
  fs::remove_all(dir_b);

  // poses stay unit-norm over the whole trajectory
  for (int f = 0; f < spec.frames; ++f) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "/poses/f%04d.txt", f);
    PoseParams pose;
    ShapeParams shape;
    load_pose_file(dir_a + buf, &pose, &shape);
    for (const auto& q : pose.rotations) CHECK(std::abs(q.norm() - 1.0) <= 1e-9);
  }

  // round trip through the loader
  const DatasetManifest loaded = load_dataset(dir_a + "/manifest.txt");
  CHECK(loaded.items.size() == a.items.size());
  CHECK(loaded.split(true).size() == train.size());
  CHECK(loaded.spec.frames == spec.frames);
  fs::remove_all(dir_a);
}

TEST_CASE("texture seed changes images but not masks") {
  namespace fs = std::filesystem;
  const std::string dir_a = "/tmp/hvtr_data_t1", dir_b = "/tmp/hvtr_data_t2";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  SequenceSpec spec = tiny_spec();
  spec.frames = 2;
  generate_dataset(spec, dir_a);
  spec.texture_seed += 1;
  generate_dataset(spec, dir_b);
  bool image_differs = false;
  const DatasetManifest a = load_dataset(dir_a + "/manifest.txt");
  for (const auto& item : a.items) {
    image_differs =
        image_differs || slurp(dir_a + "/" + item.image_path) != slurp(dir_b + "/" + item.image_path);
    CHECK(slurp(dir_a + "/" + item.mask_path) == slurp(dir_b + "/" + item.mask_path));
  }
  CHECK(image_differs);
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("generate: invalid specs rejected") {
  SequenceSpec spec = tiny_spec();
  spec.frames = 0;
  CHECK_THROWS(generate_dataset(spec, "/tmp/hvtr_data_bad"));
  spec = tiny_spec();
  spec.split_fraction = 1.0;
  CHECK_THROWS(generate_dataset(spec, "/tmp/hvtr_data_bad"));
  spec = tiny_spec();
  CHECK_THROWS(generate_dataset(spec, "/proc/definitely_unwritable/x"));
}

TEST_CASE("manifest loader rejects unknown keys and missing files") {
  namespace fs = std::filesystem;
  const std::string dir = "/tmp/hvtr_data_m";
  fs::remove_all(dir);
  SequenceSpec spec = tiny_spec();
  spec.frames = 1;
  generate_dataset(spec, dir);
  {
    std::ofstream os(dir + "/manifest.txt", std::ios::app);
    os << "mystery_key 42\n";
  }
  CHECK_THROWS(load_dataset(dir + "/manifest.txt"));
  fs::remove_all(dir);
}
