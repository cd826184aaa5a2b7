// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#include "minerf/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "minerf/errors.hpp"

namespace minerf {

std::uint8_t quantize8(double v) {
  if (!(v > 0.0)) return 0;  // also maps NaN to 0
  if (v >= 1.0) return 255;
  return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

std::vector<std::uint8_t> encode_ppm(const Image& img) {
  const std::string header =
      "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + img.data().size());
  for (double v : img.data()) out.push_back(quantize8(v));
  return out;
}

Image decode_ppm(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  // Reads one whitespace-delimited header token, skipping '#' comments.
  const auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  if (token() != "P6") throw UsageError("decode_ppm: not a binary P6 file");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw UsageError("decode_ppm: malformed header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw UsageError("decode_ppm: unsupported dimensions or maxval");
  ++pos;  // single whitespace byte after maxval
  const std::size_t n = std::size_t(w) * h * 3;
  if (bytes.size() < pos + n) throw UsageError("decode_ppm: truncated pixel data");
  Image img(w, h);
  for (std::size_t k = 0; k < n; ++k) img.data()[k] = bytes[pos + k] / 255.0;
  return img;
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("write_ppm: cannot open " + path.string());
  const auto bytes = encode_ppm(img);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw UsageError("write_ppm: write failed for " + path.string());
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("read_ppm: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_ppm(bytes);
}

void write_pgm16(const std::filesystem::path& path, const std::vector<double>& depth, int width,
                 int height, double max_depth) {
  if (depth.size() != std::size_t(width) * height) throw DimensionError("write_pgm16: size mismatch");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("write_pgm16: cannot open " + path.string());
  f << "P5\n" << width << " " << height << "\n65535\n";
  for (double d : depth) {
    const double v = std::clamp(d / max_depth, 0.0, 1.0);
    const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
    const char be[2] = {static_cast<char>(q >> 8), static_cast<char>(q & 0xff)};
    f.write(be, 2);
  }
}

}  // namespace minerf
