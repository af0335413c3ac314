// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>

#include <spdlog/spdlog.h>

#include "bevg/datakit.hpp"
#include "bevg/random.hpp"
#include "bevg/textenc.hpp"

namespace bevg {

namespace {

enum class Relation { none, nearest, farthest };

// {c} color, {k} category phrase, {r} relation clause, {s} sector phrase.
constexpr std::array<const char*, 5> kPromptTemplates{
    "Look at the {c} {k}{r} on the {s} side.",
    "Stop next to the {c} {k}{r} at the {s}.",
    "Follow the {c} {k}{r} in the {s} view.",
    "The {c} {k}{r} in the {s} is the one to watch.",
    "Keep an eye on the {c} {k}{r} toward the {s}.",
};

std::string relation_clause(Relation r) {
  switch (r) {
    case Relation::nearest:
      return " that is nearest to us";
    case Relation::farthest:
      return " that is farthest from us";
    case Relation::none:
      break;
  }
  return "";
}

std::string render_prompt(std::size_t tmpl, Color color, Category cat, Relation rel, Viewpoint view) {
  std::string out = kPromptTemplates[tmpl % kPromptTemplates.size()];
  auto replace = [&out](const std::string& key, const std::string& value) {
    const auto pos = out.find(key);
    if (pos != std::string::npos) out.replace(pos, key.size(), value);
  };
  replace("{c}", std::string(color_name(color)));
  replace("{k}", std::string(category_phrase(cat)));
  replace("{r}", relation_clause(rel));
  replace("{s}", std::string(viewpoint_phrase(view)));
  return out;
}

std::vector<std::size_t> matching_objects(std::span<const SceneObjectInfo> objects, Viewpoint view,
                                          Color color, Category cat) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto& o = objects[i];
    if (o.category == cat && o.color == color && viewpoint_of(o.box) == view) out.push_back(i);
  }
  return out;
}

// Minimum distance gap that makes "nearest"/"farthest" unambiguous.
constexpr double kRelationMargin = 1.0;

std::optional<Relation> disambiguate(std::span<const SceneObjectInfo> objects,
                                     const std::vector<std::size_t>& cands, std::size_t target) {
  if (cands.size() == 1) return Relation::none;
  const double d = planar_range(objects[target].box);
  bool nearest = true;
  bool farthest = true;
  for (std::size_t c : cands) {
    if (c == target) continue;
    const double dc = planar_range(objects[c].box);
    if (dc < d + kRelationMargin) nearest = false;
    if (dc > d - kRelationMargin) farthest = false;
  }
  if (nearest) return Relation::nearest;
  if (farthest) return Relation::farthest;
  return std::nullopt;
}

float class_intensity(Category c) {
  switch (c) {
    case Category::traffic_cone:
      return 0.85f;
    case Category::barrier:
      return 0.65f;
    case Category::pedestrian:
      return 0.20f;
    case Category::bicycle:
    case Category::motorcycle:
      return 0.35f;
    default:
      return 0.45f;
  }
}

// Surface returns sit just inside the faces so float32 storage cannot push
// them outside the box.
constexpr double kFaceInset = 0.499;

void sample_surface(const Box3D& box, Category cat, double density, Rng& rng, PointCloudFrame& cloud) {
  const double c = std::cos(box.alpha);
  const double s = std::sin(box.alpha);
  const double range = std::max(1.0, std::hypot(box.x, box.y));
  struct Face {
    double nx, ny, nz;  // outward normal in box frame
    double area;
  };
  const std::array<Face, 5> faces{{{1, 0, 0, box.w * box.h},
                                   {-1, 0, 0, box.w * box.h},
                                   {0, 1, 0, box.l * box.h},
                                   {0, -1, 0, box.l * box.h},
                                   {0, 0, 1, box.l * box.w}}};
  std::size_t emitted = 0;
  for (const auto& f : faces) {
    // Face center in world frame; keep faces oriented toward the sensor.
    const double lx = f.nx * 0.5 * box.l;
    const double ly = f.ny * 0.5 * box.w;
    const double fx = box.x + c * lx - s * ly;
    const double fy = box.y + s * lx + c * ly;
    const double fz = box.z + f.nz * 0.5 * box.h;
    const double wnx = c * f.nx - s * f.ny;
    const double wny = s * f.nx + c * f.ny;
    const double facing = wnx * (-fx) + wny * (-fy) + f.nz * (-fz);
    if (facing <= 0.0) continue;
    const double expected = density * f.area / (range * range);
    const int n = static_cast<int>(std::floor(expected + rng.uniform()));
    for (int i = 0; i < n; ++i) {
      double u = rng.uniform(-0.49, 0.49);
      double v = rng.uniform(-0.49, 0.49);
      double px = 0, py = 0, pz = 0;
      if (f.nx != 0) {
        px = f.nx * kFaceInset * box.l;
        py = u * box.w;
        pz = v * box.h;
      } else if (f.ny != 0) {
        px = u * box.l;
        py = f.ny * kFaceInset * box.w;
        pz = v * box.h;
      } else {
        px = u * box.l;
        py = v * box.w;
        pz = kFaceInset * box.h;
      }
      const float inten = std::clamp(class_intensity(cat) + static_cast<float>(rng.normal(0.0, 0.05)), 0.0f, 1.0f);
      cloud.points.push_back({static_cast<float>(box.x + c * px - s * py),
                              static_cast<float>(box.y + s * px + c * py),
                              static_cast<float>(box.z + pz), inten});
      ++emitted;
    }
  }
  // Far objects still return a handful of points.
  while (emitted < 5) {
    const double px = rng.uniform(-0.45, 0.45) * box.l;
    const double py = rng.uniform(-0.45, 0.45) * box.w;
    const double pz = rng.uniform(-0.45, 0.45) * box.h;
    cloud.points.push_back({static_cast<float>(box.x + c * px - s * py),
                            static_cast<float>(box.y + s * px + c * py), static_cast<float>(box.z + pz),
                            class_intensity(cat)});
    ++emitted;
  }
}

std::string scene_name(const SynthOptions& opt, int index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%05d", opt.id_prefix.c_str(), index);
  return buf;
}

}  // namespace

SyntheticScene synth_scene(const SynthOptions& opt, int scene_index, std::vector<std::string>* warnings) {
  if (opt.min_objects < 2 || opt.max_objects > 12 || opt.min_objects > opt.max_objects) {
    throw std::invalid_argument("synth: objects per scene must lie within [2, 12]");
  }
  Rng rng(mix64(opt.seed) ^ mix64(0x5eedULL + static_cast<std::uint64_t>(scene_index)));
  SyntheticScene out;
  SceneRecord& scene = out.scene;
  scene.scene_id = scene_name(opt, scene_index);
  scene.lidar_ref = "lidar/" + scene.scene_id + ".bin";
  for (std::size_t v = 0; v < kNumCameras; ++v) {
    scene.image_refs[v] =
        "images/" + scene.scene_id + "_" + std::string(viewpoint_name(static_cast<Viewpoint>(v))) + ".png";
  }
  scene.ground_z = opt.ground_z;
  scene.cameras = make_camera_rig(opt.image_width, opt.image_height);

  const std::vector<double> priors(opt.class_priors.begin(), opt.class_priors.end());
  const int n_objects = rng.integer(opt.min_objects, opt.max_objects);
  for (int k = 0; k < n_objects; ++k) {
    for (int attempt = 0; attempt < 50; ++attempt) {
      const auto cat = static_cast<Category>(rng.categorical(priors));
      const auto prior = size_prior(cat);
      auto jitter = [&rng] { return std::clamp(1.0 + 0.08 * rng.normal(), 0.75, 1.25); };
      const double l = prior.l * jitter();
      const double w = prior.w * jitter();
      const double h = prior.h * jitter();
      const double r = std::sqrt(rng.uniform(opt.min_radius * opt.min_radius, opt.max_radius * opt.max_radius));
      const double az = rng.uniform(-kPi, kPi);
      const double yaw = rng.uniform(-kPi, kPi);
      const auto color = static_cast<Color>(rng.index(kNumColors));
      const Box3D box(r * std::cos(az), r * std::sin(az), opt.ground_z + 0.5 * h, l, w, h, yaw);
      const Box3D padded(box.x, box.y, box.z, l + 1.0, w + 1.0, h, yaw);
      const bool overlaps = std::any_of(scene.objects.begin(), scene.objects.end(), [&](const SceneObjectInfo& o) {
        return bev_intersection_area(padded, o.box) > 0.0;
      });
      if (overlaps) continue;
      scene.objects.push_back({box, cat, color});
      break;
    }
  }

  // Point cloud: visible box faces plus ground returns thinning with range.
  for (const auto& o : scene.objects) sample_surface(o.box, o.category, opt.object_point_density, rng, out.cloud);
  for (int i = 0; i < opt.ground_points; ++i) {
    const double u = rng.uniform();
    const double r = 2.0 + 50.0 * u * u;
    const double az = rng.uniform(-kPi, kPi);
    const LidarPoint p{static_cast<float>(r * std::cos(az)), static_cast<float>(r * std::sin(az)),
                       static_cast<float>(opt.ground_z + rng.normal(0.0, 0.03)),
                       static_cast<float>(rng.uniform(0.0, 0.1))};
    const bool occluded = std::any_of(scene.objects.begin(), scene.objects.end(), [&](const SceneObjectInfo& o) {
      const Box3D foot(o.box.x, o.box.y, o.box.z, o.box.l, o.box.w, o.box.h + 1.0, o.box.alpha);
      return contains_point(foot, p);
    });
    if (!occluded) out.cloud.points.push_back(p);
  }

  if (opt.write_images) {
    std::vector<ColoredBox> colored;
    for (const auto& o : scene.objects) colored.push_back({o.box, o.color});
    for (std::size_t v = 0; v < kNumCameras; ++v) out.images[v] = render_view(scene.cameras[v], colored);
  }

  // Prompts: pick referents whose template description is unambiguous.
  std::vector<SceneObject> scene_boxes;
  for (const auto& o : scene.objects) scene_boxes.push_back({o.box, o.category});
  std::set<std::size_t> used;
  int attempts = 0;
  while (static_cast<int>(out.samples.size()) < opt.prompts_per_scene && attempts < 100 &&
         used.size() < scene.objects.size()) {
    ++attempts;
    const std::size_t target = rng.index(scene.objects.size());
    if (used.count(target)) continue;
    const auto& obj = scene.objects[target];
    const Viewpoint view = viewpoint_of(obj.box);
    const auto cands = matching_objects(scene.objects, view, obj.color, obj.category);
    const auto rel = disambiguate(scene.objects, cands, target);
    if (!rel) continue;
    used.insert(target);
    GroundingSample s;
    s.sample_id = scene.scene_id + "_p" + std::to_string(out.samples.size());
    s.scene_id = scene.scene_id;
    s.prompt = render_prompt(rng.index(kPromptTemplates.size()), obj.color, obj.category, *rel, view);
    s.lidar_ref = scene.lidar_ref;
    s.image_refs = scene.image_refs;
    s.referred = obj.box;
    s.category = obj.category;
    s.viewpoint = view;
    s.scene_boxes = scene_boxes;
    s.attribute = label_attribute(s);
    out.samples.push_back(std::move(s));
  }
  if (out.samples.empty()) {
    const std::string msg = "scene " + scene.scene_id + " skipped: no unambiguous referent after 100 attempts";
    spdlog::warn(msg);
    if (warnings) warnings->push_back(msg);
  }
  return out;
}

SynthCorpus synth_corpus(const SynthOptions& opt) {
  if (opt.n_scenes < 0) throw std::invalid_argument("synth: n_scenes must be non-negative");
  SynthCorpus corpus;
  for (int i = 0; i < opt.n_scenes; ++i) {
    auto scene = synth_scene(opt, i, &corpus.warnings);
    if (!scene.samples.empty()) corpus.scenes.push_back(std::move(scene));
  }
  return corpus;
}

std::vector<GroundingSample> SynthCorpus::all_samples() const {
  std::vector<GroundingSample> out;
  for (const auto& sc : scenes) out.insert(out.end(), sc.samples.begin(), sc.samples.end());
  return out;
}

void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& root, bool write_images) {
  namespace fs = std::filesystem;
  fs::create_directories(root / "lidar");
  if (write_images) fs::create_directories(root / "images");
  std::ofstream samples(root / "samples.jsonl", std::ios::binary);
  std::ofstream scenes(root / "scenes.jsonl", std::ios::binary);
  if (!samples || !scenes) throw std::runtime_error("write_corpus: cannot write under " + root.string());
  for (const auto& sc : corpus.scenes) {
    write_point_cloud(root / sc.scene.lidar_ref, sc.cloud);
    if (write_images) {
      for (std::size_t v = 0; v < kNumCameras; ++v) {
        if (!sc.images[v].empty()) write_png(root / sc.scene.image_refs[v], sc.images[v]);
      }
    }
    scenes << to_json(sc.scene).dump() << '\n';
    for (const auto& s : sc.samples) samples << to_json(s).dump() << '\n';
  }
}

std::optional<std::size_t> resolve_template_prompt(const std::string& prompt,
                                                   std::span<const SceneObjectInfo> objects) {
  const auto tokens = tokenize(prompt);
  auto has_pair = [&](std::string_view a, std::string_view b) {
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
      if (tokens[i] == a && tokens[i + 1] == b) return true;
    }
    return false;
  };
  auto has = [&](std::string_view a) { return std::find(tokens.begin(), tokens.end(), a) != tokens.end(); };

  std::optional<Viewpoint> view;
  for (Viewpoint v : {Viewpoint::front_left, Viewpoint::front_right, Viewpoint::back_left, Viewpoint::back_right}) {
    const auto phrase = viewpoint_phrase(v);
    const auto sp = phrase.find(' ');
    if (has_pair(phrase.substr(0, sp), phrase.substr(sp + 1))) view = v;
  }
  if (!view) {
    if (has("front")) view = Viewpoint::front;
    else if (has("back")) view = Viewpoint::back;
  }
  std::optional<Color> color;
  for (Color c : kAllColors) {
    if (has(color_name(c))) color = c;
  }
  std::optional<Category> cat;
  for (Category c : kAllCategories) {
    const auto phrase = category_phrase(c);
    const auto sp = phrase.find(' ');
    const bool hit = sp == std::string_view::npos ? has(phrase) : has_pair(phrase.substr(0, sp), phrase.substr(sp + 1));
    if (hit) cat = c;
  }
  if (!view || !color || !cat) return std::nullopt;
  const auto cands = matching_objects(objects, *view, *color, *cat);
  if (cands.empty()) return std::nullopt;
  if (has("nearest") || has("farthest")) {
    const bool nearest = has("nearest");
    std::size_t best = cands.front();
    for (std::size_t c : cands) {
      const double d = planar_range(objects[c].box);
      const double db = planar_range(objects[best].box);
      if (nearest ? d < db : d > db) best = c;
    }
    return best;
  }
  if (cands.size() != 1) return std::nullopt;
  return cands.front();
}

}  // namespace bevg
