// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "bevg/geometry.hpp"
#include "bevg/image.hpp"

namespace bevg {

/// The ten nuScenes detection classes.
enum class Category {
  car,
  truck,
  bus,
  trailer,
  construction_vehicle,
  pedestrian,
  motorcycle,
  bicycle,
  traffic_cone,
  barrier,
};
inline constexpr std::size_t kNumCategories = 10;

std::string_view category_name(Category c);
/// Words as they appear in prompts, e.g. "traffic cone".
std::string_view category_phrase(Category c);
std::optional<Category> parse_category(std::string_view name);
/// Accepts both the short class names and nuScenes taxonomy names
/// ("vehicle.bus.rigid", "human.pedestrian.adult", ...).
std::optional<Category> map_raw_category(std::string_view raw);

struct SizePrior {
  double l;
  double w;
  double h;
};
SizePrior size_prior(Category c);

enum class Attribute { unique, multiple };
std::string_view attribute_name(Attribute a);
std::optional<Attribute> parse_attribute(std::string_view name);

/// Six equal 60-degree azimuth sectors named after the nuScenes cameras.
/// Ego frame: x forward, y left, azimuth measured counterclockwise from +x.
enum class Viewpoint { front, front_right, back_right, back, back_left, front_left };
inline constexpr std::size_t kNumViewpoints = 6;

std::string_view viewpoint_name(Viewpoint v);
/// "front", "front right", ...
std::string_view viewpoint_phrase(Viewpoint v);
std::optional<Viewpoint> parse_viewpoint(std::string_view name);
/// Sector center heading in radians.
double viewpoint_heading(Viewpoint v);
Viewpoint viewpoint_of(double x, double y);
inline Viewpoint viewpoint_of(const Box3D& b) { return viewpoint_of(b.x, b.y); }

enum class Color { red, blue, green, white, yellow, orange };
inline constexpr std::size_t kNumColors = 6;

std::string_view color_name(Color c);
std::optional<Color> parse_color(std::string_view name);
Rgb color_rgb(Color c);

template <typename Enum, std::size_t N>
constexpr std::array<Enum, N> enum_values() {
  std::array<Enum, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = static_cast<Enum>(i);
  return out;
}

inline constexpr auto kAllCategories = enum_values<Category, kNumCategories>();
inline constexpr auto kAllViewpoints = enum_values<Viewpoint, kNumViewpoints>();
inline constexpr auto kAllColors = enum_values<Color, kNumColors>();

}  // namespace bevg
