// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "bevg/cli/cli.hpp"
#include "bevg/random.hpp"

namespace bevg::cli {

namespace fs = std::filesystem;

Corpus::Corpus(fs::path root) : root_(std::move(root)) {
  const auto samples = root_ / "samples.jsonl";
  if (!fs::exists(samples)) throw std::runtime_error("corpus has no samples.jsonl: " + root_.string());
  samples_ = read_samples(samples);
  if (fs::exists(root_ / "scenes.jsonl")) {
    for (auto& s : read_scenes(root_ / "scenes.jsonl")) {
      const std::string id = s.scene_id;
      scenes_.emplace(id, std::move(s));
    }
  }
}

const SceneRecord& Corpus::scene(const std::string& scene_id) const {
  const auto it = scenes_.find(scene_id);
  if (it == scenes_.end()) throw IntegrityError("unknown scene " + scene_id + " in " + root_.string());
  return it->second;
}

std::vector<GroundingSample> Corpus::subset(const std::string& name) const {
  if (name == "all") return samples_;
  if (name != "train" && name != "test") throw UsageError("subset must be train, test or all");
  const auto path = root_ / "split.json";
  if (!fs::exists(path)) throw std::runtime_error("subset '" + name + "' needs " + path.string());
  std::ifstream in(path);
  const auto split = split_from_json(nlohmann::json::parse(in));
  const auto& ids = name == "train" ? split.train : split.test;
  const std::set<std::string> keep(ids.begin(), ids.end());
  std::vector<GroundingSample> out;
  for (const auto& s : samples_) {
    if (keep.count(s.sample_id)) out.push_back(s);
  }
  return out;
}

SceneInput Corpus::scene_input(const std::string& scene_id, const ModelConfig& cfg, bool with_images) const {
  const auto& sc = scene(scene_id);
  const auto cloud = read_point_cloud(root_ / sc.lidar_ref);
  if (!with_images) return prepare_scene(cloud, cfg);
  std::vector<Raster> images;
  for (std::size_t v = 0; v < kNumCameras; ++v) {
    const auto path = root_ / sc.image_refs[v];
    if (fs::exists(path)) {
      images.push_back(read_png(path));
    } else {
      // Corpora written without images: render the schematic view instead.
      std::vector<ColoredBox> boxes;
      for (const auto& o : sc.objects) boxes.push_back({o.box, o.color});
      images.push_back(render_view(sc.cameras[v], boxes));
    }
  }
  return prepare_scene(cloud, images, sc.cameras, sc.ground_z, cfg);
}

Raster render_bev(const PointCloudFrame& cloud, const Box3D& gt, const std::vector<Box3D>& predictions,
                  double half_range, int size) {
  Raster img(size, size, Rgb{12, 12, 16});
  const double scale = size / (2.0 * half_range);
  // Forward (+x) points up, left (+y) points left.
  auto to_px = [&](double x, double y) { return Vec2{(half_range - y) * scale, (half_range - x) * scale}; };
  for (const auto& p : cloud.points) {
    const Vec2 q = to_px(p.x, p.y);
    const int u = static_cast<int>(q.x), v = static_cast<int>(q.y);
    if (img.inside(u, v)) img.set(u, v, Rgb{150, 150, 150});
  }
  img.draw_disc(to_px(0.0, 0.0), 3.0, Rgb{255, 255, 255});
  auto outline = [&](const Box3D& b, Rgb c) {
    std::vector<Vec2> poly;
    for (const auto& k : bev_corners(b)) poly.push_back(to_px(k.x, k.y));
    img.draw_polyline(poly, c, true, 2);
  };
  constexpr std::array<Rgb, 2> kPredColors{Rgb{40, 110, 255}, Rgb{40, 210, 80}};
  for (std::size_t i = 0; i < predictions.size(); ++i) outline(predictions[i], kPredColors[std::min<std::size_t>(i, 1)]);
  outline(gt, Rgb{235, 30, 30});
  return img;
}

std::string checksum_files(const std::vector<fs::path>& files) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + f.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    h = fnv1a64(bytes, h);
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace bevg::cli
