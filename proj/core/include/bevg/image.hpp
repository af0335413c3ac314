// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bevg/geometry.hpp"

namespace bevg {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  bool operator==(const Rgb&) const = default;
};

/// 8-bit RGB raster, row-major, top-left origin.
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, Rgb fill = {});

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }

  Rgb at(int x, int y) const;
  void set(int x, int y, Rgb c);
  bool inside(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  void fill_rect(int x0, int y0, int x1, int y1, Rgb c);
  /// Scanline fill of a convex polygon given in pixel coordinates.
  void fill_convex(std::span<const Vec2> polygon, Rgb c);
  void draw_line(Vec2 a, Vec2 b, Rgb c, int thickness = 1);
  void draw_polyline(std::span<const Vec2> points, Rgb c, bool closed, int thickness = 1);
  void draw_disc(Vec2 center, double radius, Rgb c);

  std::span<const std::uint8_t> bytes() const { return data_; }
  std::span<std::uint8_t> bytes() { return data_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

std::vector<std::uint8_t> encode_png(const Raster& image);
Raster decode_png(std::span<const std::uint8_t> bytes);
void write_png(const std::filesystem::path& path, const Raster& image);
Raster read_png(const std::filesystem::path& path);

/// Convex hull (Andrew's monotone chain), counterclockwise.
std::vector<Vec2> convex_hull(std::vector<Vec2> points);

}  // namespace bevg
