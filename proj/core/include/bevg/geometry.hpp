// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace bevg {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

/// Wraps an angle into [-pi, pi).
double normalize_angle(double radians);

/// Oriented 3D box: center (x, y, z), extent along heading (l), lateral (w),
/// vertical (h), and yaw alpha about +z. The constructor validates extents and
/// normalizes alpha; the fields stay public so boxes remain plain values.
struct Box3D {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double l = 1.0;
  double w = 1.0;
  double h = 1.0;
  double alpha = 0.0;

  Box3D() = default;
  Box3D(double x, double y, double z, double l, double w, double h, double alpha);

  double volume() const { return l * w * h; }
  double bottom() const { return z - 0.5 * h; }
  double top() const { return z + 0.5 * h; }
  Vec3 center() const { return {x, y, z}; }

  bool operator==(const Box3D&) const = default;
};

struct LidarPoint {
  float x = 0.0f;
  float y = 0.0f;
  float z = 0.0f;
  float intensity = 0.0f;
};

struct PointCloudFrame {
  std::vector<LidarPoint> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

using Polygon = std::vector<Vec2>;

/// Footprint corners in counterclockwise order, starting at (+l/2, +w/2) in the
/// box frame.
std::array<Vec2, 4> bev_corners(const Box3D& box);

/// The 8 box corners: the 4 footprint corners at the bottom face, then the same
/// 4 at the top face.
std::array<Vec3, 8> box_corners_3d(const Box3D& box);

double polygon_area(std::span<const Vec2> polygon);

/// Sutherland-Hodgman clip of `subject` against the convex CCW polygon `clip`.
Polygon clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip);

double bev_intersection_area(const Box3D& a, const Box3D& b);

double bev_iou(const Box3D& a, const Box3D& b);
double iou_3d(const Box3D& a, const Box3D& b);

inline constexpr double kContainmentTolerance = 1e-9;

bool contains_point(const Box3D& box, const LidarPoint& p,
                    double tolerance = kContainmentTolerance);
std::size_t points_in_box(const PointCloudFrame& frame, const Box3D& box,
                          double tolerance = kContainmentTolerance);

/// Strict componentwise lo < center < hi.
bool in_range(const Box3D& box, const Vec3& lo, const Vec3& hi);

/// Planar distance of the box center from the ego origin.
double planar_range(const Box3D& box);

/// Applies the same rotation about the origin and then translation to a box.
Box3D rigid_transform(const Box3D& box, double dx, double dy, double dtheta);
LidarPoint rigid_transform(const LidarPoint& p, double dx, double dy, double dtheta);

}  // namespace bevg
