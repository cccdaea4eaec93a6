#pragma once

// Run configuration: a flat key = value file with '#' comments. Unknown keys
// are rejected; the effective (post-default) config is echoed into every
// output directory so a run can be reproduced from its artifacts alone.

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hvtr/common.hpp"

namespace hvtr {

struct RunConfig {
  // pipeline geometry
  int downsample_factor = 8;  // S: volumetric branch renders at (W/S, H/S)
  int samples_per_ray = 12;   // N
  double dilation_m = 0.12;   // ray-bound mesh dilation radius, meters
  int uv_size = 128;          // U: positional map and latent resolution
  int field_feat_dim = 16;    // appearance feature channels (first 3 = RGB)
  int ctex = 64;              // textural feature channels
  std::string fusion = "aff";      // aff | concat
  std::string norm = "instance";   // instance | batch
  // field network
  int mlp_width = 256;
  int l_pos = 6, l_dir = 4;
  // pose encoder
  int posenet_base = 16;
  int c_geo = 32;           // PoseNet output channels
  int latent_channels = 16;  // Z_G and Z_T channels
  // loss weights
  double lambda_vol = 15, lambda_norm = 1, lambda_feat = 10, lambda_mask = 5, lambda_pix = 1,
         lambda_adv = 1, lambda_face = 5;  // face slot present, loss inactive
  // optimizer
  double lr = 2e-4, beta1 = 0.5, beta2 = 0.999, adam_eps = 1e-8;
  // schedule
  int iterations = 3000;
  int vol_ray_batch = 0;  // 0 = render every hit ray; >0 = subsample per step
  uint64_t seed = 1;
  int checkpoint_every = 1000;
  int log_every = 1;
  // paths (usually supplied by CLI flags; flags win over file values)
  std::string data_path;
  std::string out_dir;

  void validate() const {
    check(downsample_factor == 4 || downsample_factor == 8 || downsample_factor == 16,
          "config: downsample_factor must be 4, 8 or 16 (got " +
              std::to_string(downsample_factor) + ")");
    check(samples_per_ray >= 1, "config: samples_per_ray must be >= 1");
    check(dilation_m > 0, "config: dilation_m must be positive");
    check(uv_size >= 16, "config: uv_size must be >= 16");
    check(field_feat_dim >= 4, "config: field_feat_dim must be >= 4 (first 3 channels are RGB)");
    check(ctex >= 8, "config: ctex must be >= 8");
    check(fusion == "aff" || fusion == "concat", "config: fusion must be 'aff' or 'concat'");
    check(norm == "instance" || norm == "batch", "config: norm must be 'instance' or 'batch'");
    check(mlp_width >= 16, "config: mlp_width must be >= 16");
    check(l_pos >= 0 && l_dir >= 0, "config: frequency counts must be >= 0");
    check(posenet_base >= 4 && c_geo >= 4 && latent_channels >= 1, "config: channel counts too small");
    for (double l : {lambda_vol, lambda_norm, lambda_feat, lambda_mask, lambda_pix, lambda_adv,
                     lambda_face})
      check(l >= 0, "config: loss weights must be nonnegative");
    check(lr > 0 && beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && adam_eps > 0,
          "config: bad optimizer settings");
    check(iterations >= 0, "config: iterations must be >= 0");
    check(vol_ray_batch >= 0, "config: vol_ray_batch must be >= 0");
    check(checkpoint_every >= 1 && log_every >= 1, "config: intervals must be >= 1");
  }

 private:
  template <typename F>
  void enumerate(F&& f) {
    f("downsample_factor", &downsample_factor);
    f("samples_per_ray", &samples_per_ray);
    f("dilation_m", &dilation_m);
    f("uv_size", &uv_size);
    f("field_feat_dim", &field_feat_dim);
    f("ctex", &ctex);
    f("fusion", &fusion);
    f("norm", &norm);
    f("mlp_width", &mlp_width);
    f("l_pos", &l_pos);
    f("l_dir", &l_dir);
    f("posenet_base", &posenet_base);
    f("c_geo", &c_geo);
    f("latent_channels", &latent_channels);
    f("lambda_vol", &lambda_vol);
    f("lambda_norm", &lambda_norm);
    f("lambda_feat", &lambda_feat);
    f("lambda_mask", &lambda_mask);
    f("lambda_pix", &lambda_pix);
    f("lambda_adv", &lambda_adv);
    f("lambda_face", &lambda_face);
    f("lr", &lr);
    f("beta1", &beta1);
    f("beta2", &beta2);
    f("adam_eps", &adam_eps);
    f("iterations", &iterations);
    f("vol_ray_batch", &vol_ray_batch);
    f("seed", &seed);
    f("checkpoint_every", &checkpoint_every);
    f("log_every", &log_every);
    f("data_path", &data_path);
    f("out_dir", &out_dir);
  }

  struct Setter {
    const std::string *key, *value;
    bool* found;
    void operator()(const char* name, int* p) const {
      if (*key == name) { *p = std::stoi(*value); *found = true; }
    }
    void operator()(const char* name, double* p) const {
      if (*key == name) { *p = std::stod(*value); *found = true; }
    }
    void operator()(const char* name, uint64_t* p) const {
      if (*key == name) { *p = std::stoull(*value); *found = true; }
    }
    void operator()(const char* name, std::string* p) const {
      if (*key == name) { *p = *value; *found = true; }
    }
  };

  struct Printer {
    std::ostream* os;
    void operator()(const char* name, const int* p) const { *os << name << " = " << *p << "\n"; }
    void operator()(const char* name, const double* p) const {
      std::ostringstream tmp;
      tmp.precision(17);
      tmp << *p;
      *os << name << " = " << tmp.str() << "\n";
    }
    void operator()(const char* name, const uint64_t* p) const { *os << name << " = " << *p << "\n"; }
    void operator()(const char* name, const std::string* p) const {
      *os << name << " = " << *p << "\n";
    }
  };

 public:
  void set_key(const std::string& key, const std::string& value) {
    bool found = false;
    enumerate(Setter{&key, &value, &found});
    check(found, "config: unknown key '" + key + "'");
  }

  static RunConfig parse(std::istream& is) {
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      // trim
      auto ltrim = line.find_first_not_of(" \t\r");
      if (ltrim == std::string::npos) continue;
      const auto eq = line.find('=');
      check(eq != std::string::npos, "config: line " + std::to_string(lineno) + " is not key = value");
      auto strip = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      cfg.set_key(strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
    }
    return cfg;
  }

  static RunConfig load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot read " + path);
    return parse(is);
  }

  void save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("config: cannot write " + path);
    const_cast<RunConfig*>(this)->enumerate(Printer{&os});
  }

  std::string to_string() const {
    std::ostringstream os;
    const_cast<RunConfig*>(this)->enumerate(Printer{&os});
    return os.str();
  }
};

}  // namespace hvtr
