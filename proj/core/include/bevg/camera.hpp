// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <span>

#include "bevg/categories.hpp"
#include "bevg/geometry.hpp"
#include "bevg/image.hpp"

namespace bevg {

struct PixelHit {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

/// Pinhole camera at (0, 0, mount_z) in the ego frame looking along `yaw`,
/// with a level horizon. Pixel origin top-left, u right, v down.
struct PinholeCamera {
  Viewpoint view = Viewpoint::front;
  double yaw = 0.0;
  double mount_z = 0.0;
  int width = 320;
  int height = 180;
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  static constexpr double kNearPlane = 0.1;

  std::optional<PixelHit> project(const Vec3& p) const;
  /// Ray from the camera center through pixel (u, v) intersected with the plane
  /// z = plane_z; nullopt when the ray points away from the plane.
  std::optional<Vec3> backproject_to_plane(double u, double v, double plane_z) const;
  bool in_image(const PixelHit& px) const {
    return px.u >= 0.0 && px.v >= 0.0 && px.u < width && px.v < height;
  }
};

using CameraRig = std::array<PinholeCamera, kNumViewpoints>;

inline constexpr double kDefaultHorizontalFovDeg = 70.0;

/// Six cameras centered on the viewpoint sector headings; index i corresponds
/// to Viewpoint(i).
CameraRig make_camera_rig(int width = 320, int height = 180,
                          double hfov_deg = kDefaultHorizontalFovDeg, double mount_z = 0.0);

struct ColoredBox {
  Box3D box;
  Color color = Color::white;
};

inline constexpr Rgb kSkyRgb{28, 30, 44};
inline constexpr Rgb kGroundRgb{62, 62, 62};

/// Schematic rendering: sky/ground split at the horizon, boxes painted far to
/// near as the filled hull of their projected corners.
Raster render_view(const PinholeCamera& cam, std::span<const ColoredBox> boxes);

/// True iff all 8 corners are in front of the camera and inside the image.
bool box_fully_visible(const PinholeCamera& cam, const Box3D& box);

/// Outlines the projected box edges (used to mark the referred object).
void draw_box_outline(Raster& image, const PinholeCamera& cam, const Box3D& box, Rgb color,
                      int thickness = 2);

}  // namespace bevg
