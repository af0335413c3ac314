// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include "bevg/categories.hpp"

#include <cmath>
#include <string>

namespace bevg {

namespace {

constexpr std::array<std::string_view, kNumCategories> kCategoryNames{
    "car",        "truck",      "bus",     "trailer",      "construction_vehicle",
    "pedestrian", "motorcycle", "bicycle", "traffic_cone", "barrier"};

constexpr std::array<std::string_view, kNumCategories> kCategoryPhrases{
    "car",        "truck",      "bus",     "trailer",      "construction vehicle",
    "pedestrian", "motorcycle", "bicycle", "traffic cone", "barrier"};

// Mean nuScenes extents (l, w, h) in meters.
constexpr std::array<SizePrior, kNumCategories> kSizePriors{{
    {4.63, 1.97, 1.74},
    {6.93, 2.51, 2.84},
    {10.5, 2.94, 3.47},
    {12.29, 2.90, 3.87},
    {6.37, 2.85, 3.19},
    {0.73, 0.67, 1.77},
    {2.11, 0.77, 1.47},
    {1.70, 0.60, 1.28},
    {0.41, 0.41, 1.07},
    {0.50, 2.53, 0.98},
}};

constexpr std::array<std::string_view, kNumViewpoints> kViewpointNames{
    "front", "front_right", "back_right", "back", "back_left", "front_left"};
constexpr std::array<std::string_view, kNumViewpoints> kViewpointPhrases{
    "front", "front right", "back right", "back", "back left", "front left"};

constexpr std::array<std::string_view, kNumColors> kColorNames{"red",   "blue",   "green",
                                                               "white", "yellow", "orange"};
constexpr std::array<Rgb, kNumColors> kColorRgb{
    {{220, 30, 30}, {30, 70, 220}, {30, 170, 60}, {235, 235, 235}, {230, 210, 30}, {240, 130, 20}}};

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(std::string_view name, const std::array<std::string_view, N>& table) {
  for (std::size_t i = 0; i < N; ++i) {
    if (table[i] == name) return static_cast<Enum>(i);
  }
  return std::nullopt;
}

}  // namespace

std::string_view category_name(Category c) { return kCategoryNames[static_cast<std::size_t>(c)]; }
std::string_view category_phrase(Category c) {
  return kCategoryPhrases[static_cast<std::size_t>(c)];
}
std::optional<Category> parse_category(std::string_view name) {
  return lookup<Category>(name, kCategoryNames);
}

std::optional<Category> map_raw_category(std::string_view raw) {
  if (auto c = parse_category(raw)) return c;
  const auto starts = [&](std::string_view prefix) { return raw.substr(0, prefix.size()) == prefix; };
  if (raw == "vehicle.car") return Category::car;
  if (raw == "vehicle.truck") return Category::truck;
  if (starts("vehicle.bus.")) return Category::bus;
  if (raw == "vehicle.trailer") return Category::trailer;
  if (raw == "vehicle.construction") return Category::construction_vehicle;
  if (raw == "vehicle.motorcycle") return Category::motorcycle;
  if (raw == "vehicle.bicycle") return Category::bicycle;
  if (raw == "movable_object.trafficcone") return Category::traffic_cone;
  if (raw == "movable_object.barrier") return Category::barrier;
  // Adults, children, construction workers and police officers; personal mobility
  // devices, strollers and wheelchairs are not pedestrians in the detection split.
  if (raw == "human.pedestrian.adult" || raw == "human.pedestrian.child" ||
      raw == "human.pedestrian.construction_worker" || raw == "human.pedestrian.police_officer") {
    return Category::pedestrian;
  }
  return std::nullopt;
}

SizePrior size_prior(Category c) { return kSizePriors[static_cast<std::size_t>(c)]; }

std::string_view attribute_name(Attribute a) {
  return a == Attribute::unique ? "unique" : "multiple";
}
std::optional<Attribute> parse_attribute(std::string_view name) {
  if (name == "unique") return Attribute::unique;
  if (name == "multiple") return Attribute::multiple;
  return std::nullopt;
}

std::string_view viewpoint_name(Viewpoint v) { return kViewpointNames[static_cast<std::size_t>(v)]; }
std::string_view viewpoint_phrase(Viewpoint v) {
  return kViewpointPhrases[static_cast<std::size_t>(v)];
}
std::optional<Viewpoint> parse_viewpoint(std::string_view name) {
  if (auto v = lookup<Viewpoint>(name, kViewpointNames)) return v;
  return lookup<Viewpoint>(name, kViewpointPhrases);
}

double viewpoint_heading(Viewpoint v) {
  // front, front_right, back_right, back, back_left, front_left
  constexpr std::array<double, kNumViewpoints> kDegrees{0.0, -60.0, -120.0, 180.0, 120.0, 60.0};
  return kDegrees[static_cast<std::size_t>(v)] * kPi / 180.0;
}

Viewpoint viewpoint_of(double x, double y) {
  const double deg = std::atan2(y, x) * 180.0 / kPi;  // (-180, 180]
  if (deg >= -30.0 && deg < 30.0) return Viewpoint::front;
  if (deg >= 30.0 && deg < 90.0) return Viewpoint::front_left;
  if (deg >= 90.0 && deg < 150.0) return Viewpoint::back_left;
  if (deg >= -90.0 && deg < -30.0) return Viewpoint::front_right;
  if (deg >= -150.0 && deg < -90.0) return Viewpoint::back_right;
  return Viewpoint::back;
}

std::string_view color_name(Color c) { return kColorNames[static_cast<std::size_t>(c)]; }
std::optional<Color> parse_color(std::string_view name) { return lookup<Color>(name, kColorNames); }
Rgb color_rgb(Color c) { return kColorRgb[static_cast<std::size_t>(c)]; }

}  // namespace bevg
