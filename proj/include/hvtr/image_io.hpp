#pragma once

// Portable pixmap I/O (binary PPM/PGM, 8- and 16-bit) plus raw float buffer
// dumps with a small text header. These are the debug/export formats for
// every image-like buffer in the pipeline.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hvtr/common.hpp"

namespace hvtr {

// Interleaved float image, values nominally in [0,1]; channels 1 or 3.
struct Image {
  int width = 0, height = 0, channels = 0;
  std::vector<float> data;  // row-major, interleaved

  Image() = default;
  Image(int w, int h, int c, float fill = 0.f) : width(w), height(h), channels(c) {
    data.assign((size_t)w * h * c, fill);
  }
  float& at(int x, int y, int c) { return data[((size_t)y * width + x) * channels + c]; }
  float at(int x, int y, int c) const { return data[((size_t)y * width + x) * channels + c]; }
};

inline uint8_t to_byte(float v) {
  const float c = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
  return (uint8_t)(c * 255.0f + 0.5f);
}

inline void save_pnm(const Image& img, const std::string& path) {
  check(img.channels == 1 || img.channels == 3, "save_pnm: channels must be 1 or 3");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_pnm: cannot write " + path);
  os << (img.channels == 3 ? "P6" : "P5") << "\n"
     << img.width << " " << img.height << "\n255\n";
  std::vector<uint8_t> row((size_t)img.width * img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) row[(size_t)x * img.channels + c] = to_byte(img.at(x, y, c));
    os.write((const char*)row.data(), (std::streamsize)row.size());
  }
  if (!os) throw std::runtime_error("save_pnm: write failed for " + path);
}

// 16-bit single channel (e.g. depth dumps), big-endian sample order per PNM.
inline void save_pgm16(const std::vector<double>& values, int width, int height, double lo,
                       double hi, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_pgm16: cannot write " + path);
  os << "P5\n" << width << " " << height << "\n65535\n";
  for (double v : values) {
    double s = (v - lo) / (hi - lo);
    s = s < 0 ? 0 : (s > 1 ? 1 : s);
    const uint16_t q = (uint16_t)(s * 65535.0 + 0.5);
    const uint8_t be[2] = {(uint8_t)(q >> 8), (uint8_t)(q & 0xff)};
    os.write((const char*)be, 2);
  }
}

inline Image load_pnm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_pnm: cannot read " + path);
  std::string magic;
  is >> magic;
  check(magic == "P6" || magic == "P5", "load_pnm: unsupported format in " + path);
  auto next_token = [&is, &path]() {
    std::string tok;
    while (is >> tok) {
      if (tok[0] == '#') {
        std::string rest;
        std::getline(is, rest);
        continue;
      }
      return tok;
    }
    throw std::runtime_error("load_pnm: truncated header in " + path);
  };
  const int w = std::stoi(next_token());
  const int h = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  check(maxval == 255, "load_pnm: only 8-bit maps supported");
  is.get();  // single whitespace after header
  const int ch = magic == "P6" ? 3 : 1;
  Image img(w, h, ch);
  std::vector<uint8_t> raw((size_t)w * h * ch);
  is.read((char*)raw.data(), (std::streamsize)raw.size());
  if (!is) throw std::runtime_error("load_pnm: truncated data in " + path);
  for (size_t i = 0; i < raw.size(); ++i) img.data[i] = raw[i] / 255.0f;
  return img;
}

// Raw float32 buffer with a one-line header: "HVTRRAW1 <W> <H> <C>\n"
inline void save_raw_f32(const std::vector<float>& data, int w, int h, int c,
                         const std::string& path) {
  check((size_t)w * h * c == data.size(), "save_raw_f32: size mismatch");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_raw_f32: cannot write " + path);
  os << "HVTRRAW1 " << w << " " << h << " " << c << "\n";
  os.write((const char*)data.data(), (std::streamsize)(data.size() * sizeof(float)));
}

inline std::vector<float> load_raw_f32(const std::string& path, int* w, int* h, int* c) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_raw_f32: cannot read " + path);
  std::string magic;
  is >> magic;
  check(magic == "HVTRRAW1", "load_raw_f32: bad header in " + path);
  is >> *w >> *h >> *c;
  is.get();
  std::vector<float> data((size_t)*w * *h * *c);
  is.read((char*)data.data(), (std::streamsize)(data.size() * sizeof(float)));
  if (!is) throw std::runtime_error("load_raw_f32: truncated data in " + path);
  return data;
}

}  // namespace hvtr
