// Drives the built `hvtr` binary end to end: gen-data, train, render, eval,
// project. The binary path arrives via the HVTR_BIN environment variable.

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hvtr/image_io.hpp"

namespace fs = std::filesystem;

namespace {

std::string binary() {
  const char* env = std::getenv("HVTR_BIN");
  REQUIRE(env != nullptr);
  return env;
}

int run(const std::string& args) {
  const std::string cmd = binary() + " " + args + " 2>/tmp/hvtr_cli_err.txt";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::vector<char> slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is);
  return std::vector<char>(std::istreambuf_iterator<char>(is), {});
}

const std::string kRoot = "/tmp/hvtr_cli";

void write_file(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  os << text;
}

}  // namespace

TEST_CASE("cli: full pipeline round trip", "[cli]") {
  fs::remove_all(kRoot);
  fs::create_directories(kRoot);

  // --- gen-data -----------------------------------------------------------
  write_file(kRoot + "/seq.cfg",
             "frames = 4\ntrain_cameras = 2\ntest_cameras = 1\nimage_size = 64\n"
             "split_fraction = 0.75\nseed = 3\n");
  REQUIRE(run("gen-data --spec " + kRoot + "/seq.cfg --out " + kRoot + "/data") == 0);
  REQUIRE(fs::exists(kRoot + "/data/manifest.txt"));

  // --seed changes images deterministically
  REQUIRE(run("gen-data --spec " + kRoot + "/seq.cfg --out " + kRoot + "/data2 --seed 4") == 0);
  CHECK(slurp(kRoot + "/data/images/f0000_c0.ppm") !=
        slurp(kRoot + "/data2/images/f0000_c0.ppm"));

  // unwritable output directory: nonzero exit
  CHECK(run("gen-data --spec " + kRoot + "/seq.cfg --out /proc/nope") != 0);

  // --- train ----------------------------------------------------------
  write_file(kRoot + "/run.cfg",
             "uv_size = 32\ndownsample_factor = 4\nsamples_per_ray = 3\nmlp_width = 32\n"
             "posenet_base = 8\nc_geo = 8\nlatent_channels = 4\nctex = 16\n"
             "field_feat_dim = 8\niterations = 2\nseed = 11\n");
  REQUIRE(run("train --config " + kRoot + "/run.cfg --data " + kRoot +
              "/data/manifest.txt --out " + kRoot + "/run") == 0);
  REQUIRE(fs::exists(kRoot + "/run/checkpoint/manifest.txt"));
  REQUIRE(fs::exists(kRoot + "/run/loss_log.jsonl"));
  REQUIRE(fs::exists(kRoot + "/run/config_effective.cfg"));

  // invalid S rejected with a schema error (exit 1)
  write_file(kRoot + "/bad.cfg", "downsample_factor = 5\n");
  CHECK(run("train --config " + kRoot + "/bad.cfg --data " + kRoot +
            "/data/manifest.txt --out " + kRoot + "/bad") == 1);
  // unknown key rejected (exit 1)
  write_file(kRoot + "/bad2.cfg", "definitely_not_a_key = 1\n");
  CHECK(run("train --config " + kRoot + "/bad2.cfg --data " + kRoot +
            "/data/manifest.txt --out " + kRoot + "/bad2") == 1);

  // resume continues the loss trace bit-exactly: 2 + 2 vs 4 straight
  write_file(kRoot + "/run4.cfg",
             "uv_size = 32\ndownsample_factor = 4\nsamples_per_ray = 3\nmlp_width = 32\n"
             "posenet_base = 8\nc_geo = 8\nlatent_channels = 4\nctex = 16\n"
             "field_feat_dim = 8\niterations = 4\nseed = 11\n");
  REQUIRE(run("train --config " + kRoot + "/run4.cfg --data " + kRoot +
              "/data/manifest.txt --out " + kRoot + "/straight") == 0);
  REQUIRE(run("train --config " + kRoot + "/run4.cfg --data " + kRoot +
              "/data/manifest.txt --out " + kRoot + "/resumed --resume " + kRoot +
              "/run/checkpoint") == 0);
  {
    std::ifstream a(kRoot + "/straight/loss_log.jsonl");
    std::vector<std::string> straight_lines;
    for (std::string line; std::getline(a, line);) straight_lines.push_back(line);
    std::ifstream b0(kRoot + "/run/loss_log.jsonl");
    std::vector<std::string> resumed_lines;
    for (std::string line; std::getline(b0, line);) resumed_lines.push_back(line);
    std::ifstream b1(kRoot + "/resumed/loss_log.jsonl");
    for (std::string line; std::getline(b1, line);) resumed_lines.push_back(line);
    REQUIRE(straight_lines.size() == 4);
    CHECK(resumed_lines == straight_lines);
  }

  // --- render ----------------------------------------------------------
  REQUIRE(run("render --checkpoint " + kRoot + "/run/checkpoint --pose " + kRoot +
              "/data/poses/f0000.txt --camera " + kRoot + "/data/cameras/cam0.txt --out " +
              kRoot + "/render --dump-raster") == 0);
  REQUIRE(fs::exists(kRoot + "/render/f0000_image.ppm"));
  REQUIRE(fs::exists(kRoot + "/render/f0000_mask.pgm"));
  REQUIRE(fs::exists(kRoot + "/render/f0000_volrgb.ppm"));
  REQUIRE(fs::exists(kRoot + "/render/f0000_alpha.pgm"));
  REQUIRE(fs::exists(kRoot + "/render/raster_uv.ppm"));
  REQUIRE(fs::exists(kRoot + "/render/raster_depth.pgm"));
  REQUIRE(fs::exists(kRoot + "/render/raster_uv.f32"));
  {
    int w = 0, h = 0, c = 0;
    const auto raw = hvtr::load_raw_f32(kRoot + "/render/raster_uv.f32", &w, &h, &c);
    CHECK(w == 64);
    CHECK(c == 2);
    CHECK(raw.size() == (size_t)64 * 64 * 2);
  }

  // identical command twice: byte-identical primary outputs
  REQUIRE(run("render --checkpoint " + kRoot + "/run/checkpoint --pose " + kRoot +
              "/data/poses/f0000.txt --camera " + kRoot + "/data/cameras/cam0.txt --out " +
              kRoot + "/render_again") == 0);
  CHECK(slurp(kRoot + "/render/f0000_image.ppm") ==
        slurp(kRoot + "/render_again/f0000_image.ppm"));

  // beta zero equals omitting the flag; out-of-range beta rejected
  REQUIRE(run("render --checkpoint " + kRoot + "/run/checkpoint --pose " + kRoot +
              "/data/poses/f0000.txt --camera " + kRoot + "/data/cameras/cam0.txt --beta 0,0 "
              "--out " + kRoot + "/render_b0") == 0);
  CHECK(slurp(kRoot + "/render/f0000_image.ppm") == slurp(kRoot + "/render_b0/f0000_image.ppm"));
  CHECK(run("render --checkpoint " + kRoot + "/run/checkpoint --pose " + kRoot +
            "/data/poses/f0000.txt --camera " + kRoot + "/data/cameras/cam0.txt --beta 9 --out " +
            kRoot + "/render_bad") == 1);

  // --- eval -----------------------------------------------------------
  REQUIRE(run("eval --checkpoint " + kRoot + "/run/checkpoint --data " + kRoot +
              "/data/manifest.txt --split test --out " + kRoot + "/report.json") == 0);
  {
    std::ifstream is(kRoot + "/report.json");
    std::stringstream ss;
    ss << is.rdbuf();
    const std::string text = ss.str();
    CHECK(text.find("\"rows\"") != std::string::npos);
    CHECK(text.find("\"aggregate\"") != std::string::npos);
    // split honored: test split = 1 test frame x 3 cams + 3 frames x 1 cam = 5 rows
    size_t rows = 0;
    for (size_t pos = 0; (pos = text.find("\"frame\"", pos)) != std::string::npos; ++pos) ++rows;
    CHECK(rows == 5);
  }

  // render of a training pose/camera matches the image used in eval
  REQUIRE(run("eval --checkpoint " + kRoot + "/run/checkpoint --data " + kRoot +
              "/data/manifest.txt --split train --out " + kRoot + "/report_train.json") == 0);

  // --- project ---------------------------------------------------------
  REQUIRE(run("project --query 0.2,0.1,0.4 > " + kRoot + "/project.txt") == 0);
  {
    std::ifstream is(kRoot + "/project.txt");
    std::stringstream ss;
    ss << is.rdbuf();
    CHECK(ss.str().find("agree = 1") != std::string::npos);
  }

  fs::remove_all(kRoot);
}
