// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "bevg/datakit.hpp"

namespace bevg {

using nlohmann::json;

json to_json(const Box3D& b) {
  return json{{"x", b.x}, {"y", b.y}, {"z", b.z}, {"l", b.l}, {"w", b.w}, {"h", b.h}, {"alpha", b.alpha}};
}

Box3D box_from_json(const json& j) {
  if (j.is_array()) {
    if (j.size() != 7) throw std::invalid_argument("box array must have 7 values");
    return Box3D(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>(),
                 j[4].get<double>(), j[5].get<double>(), j[6].get<double>());
  }
  return Box3D(j.at("x").get<double>(), j.at("y").get<double>(), j.at("z").get<double>(),
               j.at("l").get<double>(), j.at("w").get<double>(), j.at("h").get<double>(),
               j.at("alpha").get<double>());
}

namespace {

template <typename T, typename Parse>
T parse_enum(const json& j, const char* what, Parse parse) {
  const auto s = j.get<std::string>();
  const auto v = parse(s);
  if (!v) throw std::invalid_argument(std::string("unknown ") + what + " '" + s + "'");
  return *v;
}

}  // namespace

json to_json(const GroundingSample& s) {
  json boxes = json::array();
  for (const auto& o : s.scene_boxes) {
    boxes.push_back({{"box", to_json(o.box)}, {"category", category_name(o.category)}});
  }
  return json{{"sample_id", s.sample_id},
              {"scene_id", s.scene_id},
              {"prompt", s.prompt},
              {"lidar_ref", s.lidar_ref},
              {"image_refs", s.image_refs},
              {"referred", to_json(s.referred)},
              {"category", category_name(s.category)},
              {"attribute", attribute_name(s.attribute)},
              {"viewpoint", viewpoint_name(s.viewpoint)},
              {"scene_boxes", std::move(boxes)}};
}

GroundingSample sample_from_json(const json& j) {
  GroundingSample s;
  s.sample_id = j.at("sample_id").get<std::string>();
  s.scene_id = j.at("scene_id").get<std::string>();
  s.prompt = j.at("prompt").get<std::string>();
  s.lidar_ref = j.at("lidar_ref").get<std::string>();
  const auto& refs = j.at("image_refs");
  if (!refs.is_array() || refs.size() != kNumCameras) {
    throw std::invalid_argument("image_refs must hold exactly 6 paths");
  }
  for (std::size_t i = 0; i < kNumCameras; ++i) s.image_refs[i] = refs[i].get<std::string>();
  s.referred = box_from_json(j.at("referred"));
  s.category = parse_enum<Category>(j.at("category"), "category", parse_category);
  s.attribute = parse_enum<Attribute>(j.at("attribute"), "attribute", parse_attribute);
  s.viewpoint = parse_enum<Viewpoint>(j.at("viewpoint"), "viewpoint",
                                      [](const std::string& v) { return parse_viewpoint(v); });
  for (const auto& o : j.at("scene_boxes")) {
    s.scene_boxes.push_back(
        {box_from_json(o.at("box")), parse_enum<Category>(o.at("category"), "category", parse_category)});
  }
  return s;
}

json to_json(const PinholeCamera& c) {
  return json{{"view", viewpoint_name(c.view)}, {"yaw", c.yaw},   {"mount_z", c.mount_z},
              {"width", c.width},              {"height", c.height}, {"fx", c.fx},
              {"fy", c.fy},                    {"cx", c.cx},     {"cy", c.cy}};
}

PinholeCamera camera_from_json(const json& j) {
  PinholeCamera c;
  c.view = parse_enum<Viewpoint>(j.at("view"), "viewpoint",
                                 [](const std::string& v) { return parse_viewpoint(v); });
  c.yaw = j.at("yaw").get<double>();
  c.mount_z = j.at("mount_z").get<double>();
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  c.fx = j.at("fx").get<double>();
  c.fy = j.at("fy").get<double>();
  c.cx = j.at("cx").get<double>();
  c.cy = j.at("cy").get<double>();
  return c;
}

json to_json(const SceneRecord& s) {
  json objects = json::array();
  for (const auto& o : s.objects) {
    objects.push_back({{"box", to_json(o.box)},
                       {"category", category_name(o.category)},
                       {"color", color_name(o.color)}});
  }
  json cams = json::array();
  for (const auto& c : s.cameras) cams.push_back(to_json(c));
  return json{{"scene_id", s.scene_id}, {"lidar_ref", s.lidar_ref}, {"image_refs", s.image_refs},
              {"ground_z", s.ground_z}, {"objects", std::move(objects)}, {"cameras", std::move(cams)}};
}

SceneRecord scene_from_json(const json& j) {
  SceneRecord s;
  s.scene_id = j.at("scene_id").get<std::string>();
  s.lidar_ref = j.at("lidar_ref").get<std::string>();
  const auto& refs = j.at("image_refs");
  if (refs.size() != kNumCameras) throw std::invalid_argument("scene image_refs must hold 6 paths");
  for (std::size_t i = 0; i < kNumCameras; ++i) s.image_refs[i] = refs[i].get<std::string>();
  s.ground_z = j.value("ground_z", 0.0);
  for (const auto& o : j.at("objects")) {
    s.objects.push_back({box_from_json(o.at("box")),
                         parse_enum<Category>(o.at("category"), "category", parse_category),
                         parse_enum<Color>(o.at("color"), "color", parse_color)});
  }
  const auto& cams = j.at("cameras");
  if (cams.size() != kNumCameras) throw std::invalid_argument("scene must carry 6 cameras");
  for (std::size_t i = 0; i < kNumCameras; ++i) s.cameras[i] = camera_from_json(cams[i]);
  return s;
}

json to_json(const SplitManifest& m) {
  return json{{"train", m.train},
              {"test", m.test},
              {"counts", {{"train", m.train_counts}, {"test", m.test_counts}}}};
}

SplitManifest split_from_json(const json& j) {
  SplitManifest m;
  m.train = j.at("train").get<std::vector<std::string>>();
  m.test = j.at("test").get<std::vector<std::string>>();
  if (j.contains("counts")) {
    m.train_counts = j["counts"].value("train", std::map<std::string, std::size_t>{});
    m.test_counts = j["counts"].value("test", std::map<std::string, std::size_t>{});
  }
  return m;
}

namespace {

RawObject raw_object_from_json(const json& j) {
  RawObject o{box_from_json(j.at("box")), j.at("category").get<std::string>(), std::nullopt};
  if (j.contains("num_points") && !j["num_points"].is_null()) {
    o.num_points = j["num_points"].get<int>();
    if (*o.num_points < 0) throw std::invalid_argument("num_points must be non-negative");
  }
  return o;
}

json to_json(const RawObject& o) {
  json j{{"box", to_json(o.box)}, {"category", o.category}};
  if (o.num_points) j["num_points"] = *o.num_points;
  return j;
}

}  // namespace

RawRecord raw_from_json(const json& j) {
  RawRecord r;
  r.sample_id = j.at("sample_id").get<std::string>();
  r.scene_id = j.value("scene_id", r.sample_id);
  r.prompt = j.at("prompt").get<std::string>();
  r.lidar_ref = j.value("lidar_ref", std::string{});
  r.image_refs = j.value("image_refs", std::vector<std::string>{});
  r.referred = raw_object_from_json(j.at("referred"));
  if (j.contains("scene_boxes")) {
    for (const auto& o : j["scene_boxes"]) r.scene_boxes.push_back(raw_object_from_json(o));
  }
  return r;
}

json to_json(const RawRecord& r) {
  json boxes = json::array();
  for (const auto& o : r.scene_boxes) boxes.push_back(to_json(o));
  return json{{"sample_id", r.sample_id},   {"scene_id", r.scene_id},
              {"prompt", r.prompt},         {"lidar_ref", r.lidar_ref},
              {"image_refs", r.image_refs}, {"referred", to_json(r.referred)},
              {"scene_boxes", std::move(boxes)}};
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

void write_jsonl(const std::filesystem::path& path, std::span<const json> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : rows) out << r.dump() << '\n';
}

std::vector<GroundingSample> read_samples(const std::filesystem::path& path) {
  std::vector<GroundingSample> out;
  for (const auto& j : read_jsonl(path)) out.push_back(sample_from_json(j));
  return out;
}

void write_samples(const std::filesystem::path& path, std::span<const GroundingSample> samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& s : samples) out << to_json(s).dump() << '\n';
}

std::vector<SceneRecord> read_scenes(const std::filesystem::path& path) {
  std::vector<SceneRecord> out;
  for (const auto& j : read_jsonl(path)) out.push_back(scene_from_json(j));
  return out;
}

namespace {

static_assert(sizeof(float) == 4);

void put_f32(std::vector<std::uint8_t>& out, float v) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xFF));
}

float get_f32(const std::uint8_t* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace

std::vector<std::uint8_t> encode_point_cloud(const PointCloudFrame& frame) {
  std::vector<std::uint8_t> out;
  out.reserve(frame.size() * 16);
  for (const auto& p : frame.points) {
    put_f32(out, p.x);
    put_f32(out, p.y);
    put_f32(out, p.z);
    put_f32(out, p.intensity);
  }
  return out;
}

PointCloudFrame decode_point_cloud(std::span<const std::uint8_t> bytes, int fields) {
  if (fields != 4 && fields != 5) throw std::invalid_argument("point records have 4 or 5 fields");
  const std::size_t stride = 4 * static_cast<std::size_t>(fields);
  if (bytes.size() % stride != 0) {
    throw std::runtime_error("point cloud size " + std::to_string(bytes.size()) +
                             " is not a multiple of " + std::to_string(stride));
  }
  PointCloudFrame frame;
  frame.points.reserve(bytes.size() / stride);
  for (std::size_t off = 0; off < bytes.size(); off += stride) {
    const auto* p = bytes.data() + off;
    LidarPoint pt{get_f32(p), get_f32(p + 4), get_f32(p + 8), get_f32(p + 12)};
    if (!std::isfinite(pt.intensity)) throw std::runtime_error("non-finite point intensity");
    frame.points.push_back(pt);
  }
  return frame;
}

PointCloudFrame read_point_cloud(const std::filesystem::path& path, int fields) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open point cloud " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_point_cloud(bytes, fields);
}

void write_point_cloud(const std::filesystem::path& path, const PointCloudFrame& frame) {
  const auto bytes = encode_point_cloud(frame);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write point cloud " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

PointCloudLoader directory_loader(std::filesystem::path root) {
  return [root = std::move(root)](const std::string& ref) {
    const std::filesystem::path p(ref);
    return read_point_cloud(p.is_absolute() ? p : root / p);
  };
}

}  // namespace bevg
