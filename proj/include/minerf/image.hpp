// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "minerf/linalg.hpp"

namespace minerf {

/// H x W x 3 image with values nominally in [0, 1], stored row-major.
class Image {
 public:
  Image() = default;
  Image(int width, int height, double fill = 0.0)
      : width_(width), height_(height), data_(std::size_t(width) * height * 3, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }

  double& at(int row, int col, int ch) { return data_[(std::size_t(row) * width_ + col) * 3 + ch]; }
  double at(int row, int col, int ch) const {
    return data_[(std::size_t(row) * width_ + col) * 3 + ch];
  }
  Vec3 pixel(int row, int col) const { return {at(row, col, 0), at(row, col, 1), at(row, col, 2)}; }
  void set_pixel(int row, int col, const Vec3& c) {
    for (int ch = 0; ch < 3; ++ch) at(row, col, ch) = c[ch];
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool operator==(const Image&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// 8-bit quantization used by the PPM writer: round(clamp(v, 0, 1) * 255).
std::uint8_t quantize8(double v);

/// Binary P6: "P6\n{W} {H}\n255\n" followed by RGB rows top to bottom.
std::vector<std::uint8_t> encode_ppm(const Image& img);
Image decode_ppm(const std::vector<std::uint8_t>& bytes);
void write_ppm(const std::filesystem::path& path, const Image& img);
Image read_ppm(const std::filesystem::path& path);

/// Binary P5 with maxval 65535 (big-endian samples); values scaled by 1/max_depth.
void write_pgm16(const std::filesystem::path& path, const std::vector<double>& depth, int width,
                 int height, double max_depth);

}  // namespace minerf
