#pragma once

// Checkpoint container: a human-readable manifest listing parameter names,
// dtypes, shapes and byte offsets, plus one little-endian raw buffer file.
// Layout of a checkpoint directory:
//   manifest.txt   first line "HVTRCKPT1", then "meta <key> <value>" lines
//                  and "param <name> <dtype> <rank> <dims...> <offset> <bytes>"
//   params.bin     concatenated raw little-endian buffers

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "hvtr/tensor.hpp"

namespace hvtr {

static_assert(std::endian::native == std::endian::little,
              "checkpoint buffers are written in native little-endian order");

namespace detail {

template <typename T>
constexpr const char* dtype_name() {
  if constexpr (std::is_same_v<T, float>) return "f32";
  else if constexpr (std::is_same_v<T, double>) return "f64";
  else if constexpr (std::is_same_v<T, int>) return "i32";
  else if constexpr (std::is_same_v<T, uint8_t>) return "u8";
  else static_assert(sizeof(T) == 0, "unsupported checkpoint dtype");
}

}  // namespace detail

struct CheckpointWriter {
  explicit CheckpointWriter(const std::string& dir) : dir_(dir) {
    std::filesystem::create_directories(dir);
    bin_.open(dir + "/params.bin", std::ios::binary);
    if (!bin_) throw std::runtime_error("checkpoint: cannot write " + dir + "/params.bin");
  }

  void add_meta(const std::string& key, const std::string& value) {
    check(value.find('\n') == std::string::npos, "checkpoint meta must be single-line");
    meta_.emplace_back(key, value);
  }
  void add_meta(const std::string& key, double value) {
    std::ostringstream os;
    os.precision(17);
    os << value;
    add_meta(key, os.str());
  }
  void add_meta(const std::string& key, int64_t value) { add_meta(key, std::to_string(value)); }

  template <typename T>
  void add_param(const std::string& name, const Shape& shape, const T* data, int64_t count) {
    const char* dtype = detail::dtype_name<T>();
    std::ostringstream row;
    row << "param " << name << " " << dtype << " " << shape.size();
    for (int d : shape) row << " " << d;
    row << " " << offset_ << " " << count * (int64_t)sizeof(T);
    params_.push_back(row.str());
    bin_.write((const char*)data, count * (int64_t)sizeof(T));
    offset_ += count * (int64_t)sizeof(T);
  }

  template <typename T>
  void add_tensor(const std::string& name, const TensorT<T>& t) {
    add_param(name, t.shape(), t.data(), t.numel());
  }

  template <typename T>
  void add_buffer(const std::string& name, const std::vector<T>& v) {
    add_param(name, Shape{(int)v.size()}, v.data(), (int64_t)v.size());
  }

  void finish() {
    bin_.close();
    std::ofstream mf(dir_ + "/manifest.txt");
    if (!mf) throw std::runtime_error("checkpoint: cannot write " + dir_ + "/manifest.txt");
    mf << "HVTRCKPT1\n";
    for (const auto& [k, v] : meta_) mf << "meta " << k << " " << v << "\n";
    for (const auto& row : params_) mf << row << "\n";
  }

 private:
  std::string dir_;
  std::ofstream bin_;
  std::vector<std::pair<std::string, std::string>> meta_;
  std::vector<std::string> params_;
  int64_t offset_ = 0;
};

struct CheckpointReader {
  explicit CheckpointReader(const std::string& dir) : dir_(dir) {
    std::ifstream mf(dir + "/manifest.txt");
    if (!mf) throw std::runtime_error("checkpoint: cannot read " + dir + "/manifest.txt");
    std::string line;
    std::getline(mf, line);
    check(line == "HVTRCKPT1", "checkpoint: bad header in " + dir + " (got '" + line + "')");
    while (std::getline(mf, line)) {
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string tag;
      ls >> tag;
      if (tag == "meta") {
        std::string key;
        ls >> key;
        std::string value;
        std::getline(ls, value);
        if (!value.empty() && value[0] == ' ') value.erase(0, 1);
        meta_[key] = value;
      } else if (tag == "param") {
        ParamInfo pi;
        std::string name;
        int rank;
        ls >> name >> pi.dtype >> rank;
        pi.shape.resize(rank);
        for (int i = 0; i < rank; ++i) ls >> pi.shape[i];
        ls >> pi.offset >> pi.bytes;
        params_[name] = pi;
        order_.push_back(name);
      }
    }
  }

  bool has_meta(const std::string& key) const { return meta_.count(key) > 0; }
  const std::string& meta(const std::string& key) const {
    auto it = meta_.find(key);
    check(it != meta_.end(), "checkpoint: missing meta key '" + key + "'");
    return it->second;
  }
  double meta_double(const std::string& key) const { return std::stod(meta(key)); }
  int64_t meta_int(const std::string& key) const { return std::stoll(meta(key)); }

  bool has_param(const std::string& name) const { return params_.count(name) > 0; }
  const std::vector<std::string>& param_names() const { return order_; }

  Shape param_shape(const std::string& name) const { return info(name).shape; }

  template <typename T>
  void read_into(const std::string& name, T* data, int64_t count) const {
    const ParamInfo& pi = info(name);
    check(pi.bytes == count * (int64_t)sizeof(T),
          "checkpoint: size mismatch for '" + name + "'");
    check(pi.dtype == detail::dtype_name<T>(), "checkpoint: dtype mismatch for '" + name + "'");
    std::ifstream bin(dir_ + "/params.bin", std::ios::binary);
    if (!bin) throw std::runtime_error("checkpoint: cannot read " + dir_ + "/params.bin");
    bin.seekg(pi.offset);
    bin.read((char*)data, pi.bytes);
    if (!bin) throw std::runtime_error("checkpoint: truncated buffer for '" + name + "'");
  }

  template <typename T>
  void read_tensor(const std::string& name, TensorT<T>& t) const {
    check(info(name).shape == t.shape(), "checkpoint: shape mismatch for '" + name + "' (" +
                                             shape_str(info(name).shape) + " vs " +
                                             shape_str(t.shape()) + ")");
    read_into(name, t.data(), t.numel());
  }

  template <typename T>
  std::vector<T> read_buffer(const std::string& name) const {
    const ParamInfo& pi = info(name);
    std::vector<T> v(pi.bytes / sizeof(T));
    read_into(name, v.data(), (int64_t)v.size());
    return v;
  }

 private:
  struct ParamInfo {
    std::string dtype;
    Shape shape;
    int64_t offset = 0, bytes = 0;
  };
  const ParamInfo& info(const std::string& name) const {
    auto it = params_.find(name);
    check(it != params_.end(), "checkpoint: missing parameter '" + name + "'");
    return it->second;
  }

  std::string dir_;
  std::map<std::string, std::string> meta_;
  std::map<std::string, ParamInfo> params_;
  std::vector<std::string> order_;
};

}  // namespace hvtr
