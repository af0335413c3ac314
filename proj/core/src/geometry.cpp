// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include "bevg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace bevg {

double normalize_angle(double radians) {
  if (!std::isfinite(radians)) {
    throw std::invalid_argument("normalize_angle: non-finite angle");
  }
  double a = std::fmod(radians + kPi, 2.0 * kPi);
  if (a < 0.0) a += 2.0 * kPi;
  a -= kPi;
  // fmod can land exactly on +pi after the shift.
  if (a >= kPi) a -= 2.0 * kPi;
  return a;
}

Box3D::Box3D(double x_, double y_, double z_, double l_, double w_, double h_, double alpha_)
    : x(x_), y(y_), z(z_), l(l_), w(w_), h(h_), alpha(normalize_angle(alpha_)) {
  if (!(l > 0.0 && w > 0.0 && h > 0.0)) {
    throw std::invalid_argument("Box3D: extents must be positive, got l=" + std::to_string(l) +
                                " w=" + std::to_string(w) + " h=" + std::to_string(h));
  }
  if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
    throw std::invalid_argument("Box3D: non-finite center");
  }
}

std::array<Vec2, 4> bev_corners(const Box3D& box) {
  const double c = std::cos(box.alpha);
  const double s = std::sin(box.alpha);
  const double hl = 0.5 * box.l;
  const double hw = 0.5 * box.w;
  const std::array<Vec2, 4> local{{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
  std::array<Vec2, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = {box.x + c * local[i].x - s * local[i].y, box.y + s * local[i].x + c * local[i].y};
  }
  return out;
}

std::array<Vec3, 8> box_corners_3d(const Box3D& box) {
  const auto foot = bev_corners(box);
  std::array<Vec3, 8> out{};
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = {foot[i].x, foot[i].y, box.bottom()};
    out[i + 4] = {foot[i].x, foot[i].y, box.top()};
  }
  return out;
}

double polygon_area(std::span<const Vec2> polygon) {
  const std::size_t n = polygon.size();
  if (n < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& p = polygon[i];
    const Vec2& q = polygon[(i + 1) % n];
    twice += p.x * q.y - q.x * p.y;
  }
  return 0.5 * twice;
}

namespace {

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

Vec2 segment_line_intersection(const Vec2& p, const Vec2& q, const Vec2& a, const Vec2& b) {
  const double dp = cross(a, b, p);
  const double dq = cross(a, b, q);
  const double t = dp / (dp - dq);
  return {p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
}

}  // namespace

Polygon clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip) {
  Polygon output(subject.begin(), subject.end());
  const std::size_t m = clip.size();
  for (std::size_t e = 0; e < m && !output.empty(); ++e) {
    const Vec2& a = clip[e];
    const Vec2& b = clip[(e + 1) % m];
    Polygon input;
    input.swap(output);
    const std::size_t n = input.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2& cur = input[i];
      const Vec2& prev = input[(i + n - 1) % n];
      const bool cur_in = cross(a, b, cur) >= 0.0;
      const bool prev_in = cross(a, b, prev) >= 0.0;
      if (cur_in) {
        if (!prev_in) output.push_back(segment_line_intersection(prev, cur, a, b));
        output.push_back(cur);
      } else if (prev_in) {
        output.push_back(segment_line_intersection(prev, cur, a, b));
      }
    }
  }
  return output;
}

double bev_intersection_area(const Box3D& a, const Box3D& b) {
  // Cheap circumscribed-circle rejection.
  const double ra = 0.5 * std::hypot(a.l, a.w);
  const double rb = 0.5 * std::hypot(b.l, b.w);
  if (std::hypot(a.x - b.x, a.y - b.y) > ra + rb) return 0.0;
  const auto ca = bev_corners(a);
  const auto cb = bev_corners(b);
  const Polygon inter = clip_convex(ca, cb);
  return std::max(0.0, polygon_area(inter));
}

double bev_iou(const Box3D& a, const Box3D& b) {
  const double inter = bev_intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.l * a.w + b.l * b.w - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_3d(const Box3D& a, const Box3D& b) {
  const double dz = std::min(a.top(), b.top()) - std::max(a.bottom(), b.bottom());
  if (dz <= 0.0) return 0.0;
  const double inter = bev_intersection_area(a, b) * dz;
  if (inter <= 0.0) return 0.0;
  const double uni = a.volume() + b.volume() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

bool contains_point(const Box3D& box, const LidarPoint& p, double tolerance) {
  const double dx = p.x - box.x;
  const double dy = p.y - box.y;
  const double c = std::cos(box.alpha);
  const double s = std::sin(box.alpha);
  const double along = c * dx + s * dy;
  const double across = -s * dx + c * dy;
  return std::abs(along) <= 0.5 * box.l + tolerance &&
         std::abs(across) <= 0.5 * box.w + tolerance &&
         std::abs(p.z - box.z) <= 0.5 * box.h + tolerance;
}

std::size_t points_in_box(const PointCloudFrame& frame, const Box3D& box, double tolerance) {
  return static_cast<std::size_t>(std::count_if(
      frame.points.begin(), frame.points.end(),
      [&](const LidarPoint& p) { return contains_point(box, p, tolerance); }));
}

bool in_range(const Box3D& box, const Vec3& lo, const Vec3& hi) {
  return lo.x < box.x && box.x < hi.x && lo.y < box.y && box.y < hi.y && lo.z < box.z &&
         box.z < hi.z;
}

double planar_range(const Box3D& box) { return std::hypot(box.x, box.y); }

Box3D rigid_transform(const Box3D& box, double dx, double dy, double dtheta) {
  const double c = std::cos(dtheta);
  const double s = std::sin(dtheta);
  return Box3D(c * box.x - s * box.y + dx, s * box.x + c * box.y + dy, box.z, box.l, box.w,
               box.h, box.alpha + dtheta);
}

LidarPoint rigid_transform(const LidarPoint& p, double dx, double dy, double dtheta) {
  const double c = std::cos(dtheta);
  const double s = std::sin(dtheta);
  return {static_cast<float>(c * p.x - s * p.y + dx), static_cast<float>(s * p.x + c * p.y + dy),
          p.z, p.intensity};
}

}  // namespace bevg
