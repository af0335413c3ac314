// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include "bevg/camera.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace bevg {

std::optional<PixelHit> PinholeCamera::project(const Vec3& p) const {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  const double forward = c * p.x + s * p.y;
  const double right = s * p.x - c * p.y;
  const double down = mount_z - p.z;
  if (forward < kNearPlane) return std::nullopt;
  return PixelHit{cx + fx * right / forward, cy + fy * down / forward, forward};
}

std::optional<Vec3> PinholeCamera::backproject_to_plane(double u, double v, double plane_z) const {
  const double right = (u - cx) / fx;
  const double down = (v - cy) / fy;
  // Ray direction per unit forward distance.
  const double drop = mount_z - plane_z;
  if (down <= 1e-9 || drop <= 0.0) return std::nullopt;
  const double forward = drop / down;
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  const double r = right * forward;
  return Vec3{c * forward + s * r, s * forward - c * r, plane_z};
}

CameraRig make_camera_rig(int width, int height, double hfov_deg, double mount_z) {
  CameraRig rig{};
  const double f = 0.5 * width / std::tan(0.5 * hfov_deg * kPi / 180.0);
  for (std::size_t i = 0; i < kNumViewpoints; ++i) {
    auto& cam = rig[i];
    cam.view = static_cast<Viewpoint>(i);
    cam.yaw = viewpoint_heading(cam.view);
    cam.mount_z = mount_z;
    cam.width = width;
    cam.height = height;
    cam.fx = f;
    cam.fy = f;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
  }
  return rig;
}

Raster render_view(const PinholeCamera& cam, std::span<const ColoredBox> boxes) {
  Raster img(cam.width, cam.height, kSkyRgb);
  // Horizon row for a level camera is cy; everything below is ground.
  img.fill_rect(0, static_cast<int>(std::ceil(cam.cy)), cam.width, cam.height, kGroundRgb);

  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const double c = std::cos(cam.yaw);
  const double s = std::sin(cam.yaw);
  auto depth = [&](const Box3D& b) { return c * b.x + s * b.y; };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return depth(boxes[a].box) > depth(boxes[b].box);
  });
  for (std::size_t idx : order) {
    const auto& cb = boxes[idx];
    std::vector<Vec2> pix;
    for (const auto& corner : box_corners_3d(cb.box)) {
      if (auto hit = cam.project(corner)) pix.push_back({hit->u, hit->v});
    }
    if (pix.size() < 3) continue;
    const auto hull = convex_hull(std::move(pix));
    img.fill_convex(hull, color_rgb(cb.color));
  }
  return img;
}

bool box_fully_visible(const PinholeCamera& cam, const Box3D& box) {
  for (const auto& corner : box_corners_3d(box)) {
    const auto hit = cam.project(corner);
    if (!hit || !cam.in_image(*hit)) return false;
  }
  return true;
}

void draw_box_outline(Raster& image, const PinholeCamera& cam, const Box3D& box, Rgb color,
                      int thickness) {
  const auto corners = box_corners_3d(box);
  constexpr std::array<std::pair<int, int>, 12> kEdges{{{0, 1},
                                                        {1, 2},
                                                        {2, 3},
                                                        {3, 0},
                                                        {4, 5},
                                                        {5, 6},
                                                        {6, 7},
                                                        {7, 4},
                                                        {0, 4},
                                                        {1, 5},
                                                        {2, 6},
                                                        {3, 7}}};
  for (const auto& [a, b] : kEdges) {
    const auto pa = cam.project(corners[a]);
    const auto pb = cam.project(corners[b]);
    if (pa && pb) image.draw_line({pa->u, pa->v}, {pb->u, pb->v}, color, thickness);
  }
}

}  // namespace bevg
