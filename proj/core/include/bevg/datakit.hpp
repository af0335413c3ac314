// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bevg/camera.hpp"
#include "bevg/categories.hpp"
#include "bevg/geometry.hpp"

namespace bevg {

/// Raised when a record violates a cross-field invariant (for example the
/// referred box is absent from the scene it belongs to).
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SceneObject {
  Box3D box;
  Category category = Category::car;
  bool operator==(const SceneObject&) const = default;
};

inline constexpr std::size_t kNumCameras = 6;

/// One prompt / point cloud / image set / referred box record.
struct GroundingSample {
  std::string sample_id;
  std::string scene_id;
  std::string prompt;
  std::string lidar_ref;
  std::array<std::string, kNumCameras> image_refs;
  Box3D referred;
  Category category = Category::car;
  Attribute attribute = Attribute::unique;
  Viewpoint viewpoint = Viewpoint::front;
  std::vector<SceneObject> scene_boxes;

  bool operator==(const GroundingSample&) const = default;
};

struct SplitManifest {
  std::vector<std::string> train;
  std::vector<std::string> test;
  std::map<std::string, std::size_t> train_counts;  // by attribute name
  std::map<std::string, std::size_t> test_counts;
};

// ---------------------------------------------------------------------------
// Attribute labeling

/// unique iff no other scene box shares the referred category. Throws
/// IntegrityError when the referred box/category pair is not in the scene.
Attribute label_attribute(const Box3D& referred, Category category,
                          std::span<const SceneObject> scene_boxes);
inline Attribute label_attribute(const GroundingSample& s) {
  return label_attribute(s.referred, s.category, s.scene_boxes);
}

// ---------------------------------------------------------------------------
// Preprocessing

struct RawObject {
  Box3D box;
  std::string category;  // raw taxonomy name, mapped during preprocessing
  std::optional<int> num_points;
};

struct RawRecord {
  std::string sample_id;
  std::string scene_id;
  std::string prompt;
  std::string lidar_ref;
  std::vector<std::string> image_refs;
  RawObject referred;
  std::vector<RawObject> scene_boxes;
};

enum class FilterKind { category, range, points };

struct PreprocessOptions {
  Vec3 range_lo{-54.0, -54.0, -5.0};
  Vec3 range_hi{54.0, 54.0, 3.0};
  int min_points = 1;
  std::array<FilterKind, 3> order{FilterKind::category, FilterKind::range, FilterKind::points};
};

struct Diagnostic {
  std::size_t record_index = 0;
  std::string sample_id;
  std::string reason;
};

struct PreprocessResult {
  std::vector<GroundingSample> samples;
  std::vector<Diagnostic> rejected;  // filtered or malformed, one entry per dropped record
  std::size_t malformed = 0;
  std::map<std::string, std::size_t> dropped_by_reason;
};

/// Loads a point cloud by reference; used when raw records lack point counts.
using PointCloudLoader = std::function<PointCloudFrame(const std::string& lidar_ref)>;

PreprocessResult preprocess(std::span<const RawRecord> records, const PreprocessOptions& options = {},
                            const PointCloudLoader& loader = {});
/// Parses JSON-Lines raw annotations; unparsable lines become diagnostics.
PreprocessResult preprocess_jsonl(std::istream& in, const PreprocessOptions& options = {},
                                  const PointCloudLoader& loader = {});

/// Inverse view used to re-run preprocessing on its own output.
RawRecord to_raw(const GroundingSample& sample);

// ---------------------------------------------------------------------------
// Splits

/// Scene-level split: all prompts of one scene land on the same side.
SplitManifest make_split(std::span<const GroundingSample> samples, double test_fraction,
                         std::uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic corpus

struct SceneObjectInfo {
  Box3D box;
  Category category = Category::car;
  Color color = Color::white;
};

/// Ground truth for one synthetic frame, including what the schema above
/// does not carry (object colors, camera calibration).
struct SceneRecord {
  std::string scene_id;
  std::string lidar_ref;
  std::array<std::string, kNumCameras> image_refs;
  std::vector<SceneObjectInfo> objects;
  double ground_z = 0.0;
  CameraRig cameras{};
};

struct SynthOptions {
  std::uint64_t seed = 0;
  int n_scenes = 100;
  int min_objects = 4;
  int max_objects = 10;
  int prompts_per_scene = 3;
  std::array<double, kNumCategories> class_priors{0.30, 0.10, 0.05, 0.04, 0.04,
                                                  0.20, 0.06, 0.06, 0.08, 0.07};
  double min_radius = 4.0;
  double max_radius = 40.0;
  double ground_z = -1.7;
  int ground_points = 2500;
  double object_point_density = 900.0;  // points per m^2 at 1 m, decays with range^2
  int image_width = 320;
  int image_height = 180;
  bool write_images = true;
  std::string id_prefix = "syn";
};

struct SyntheticScene {
  SceneRecord scene;
  PointCloudFrame cloud;
  std::array<Raster, kNumCameras> images;
  std::vector<GroundingSample> samples;
};

struct SynthCorpus {
  std::vector<SyntheticScene> scenes;
  std::vector<std::string> warnings;  // skipped scenes

  std::vector<GroundingSample> all_samples() const;
};

/// Deterministic by seed. File references are relative paths
/// (lidar/<scene>.bin, images/<scene>_<view>.png).
SynthCorpus synth_corpus(const SynthOptions& options);
SyntheticScene synth_scene(const SynthOptions& options, int scene_index, std::vector<std::string>* warnings);

/// Writes samples.jsonl, scenes.jsonl, lidar/*.bin and images/*.png under `root`.
void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& root,
                  bool write_images = true);

/// Rule-based inverse of the synthetic prompt templates: returns the index of
/// the scene object the prompt designates, or nullopt if the prompt does not
/// resolve to exactly one object.
std::optional<std::size_t> resolve_template_prompt(const std::string& prompt,
                                                   std::span<const SceneObjectInfo> objects);

// ---------------------------------------------------------------------------
// Statistics

struct CorpusStats {
  std::size_t num_samples = 0;
  std::size_t num_scenes = 0;
  double prompts_per_scene = 0.0;
  double mean_prompt_length = 0.0;
  std::map<std::string, std::size_t> attribute_counts;
  std::map<std::string, std::size_t> category_histogram;
  std::map<std::string, std::map<std::string, std::size_t>> category_by_attribute;
  std::map<std::string, double> mean_distance;  // by attribute plus "overall"
  std::map<std::string, std::size_t> vocabulary;
};

CorpusStats corpus_stats(std::span<const GroundingSample> samples);
nlohmann::json to_json(const CorpusStats& stats);
std::string format_stats(const CorpusStats& stats);

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json to_json(const Box3D& box);
Box3D box_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GroundingSample& s);
GroundingSample sample_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SceneRecord& s);
SceneRecord scene_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SplitManifest& m);
SplitManifest split_from_json(const nlohmann::json& j);
RawRecord raw_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RawRecord& r);
nlohmann::json to_json(const PinholeCamera& cam);
PinholeCamera camera_from_json(const nlohmann::json& j);

std::vector<GroundingSample> read_samples(const std::filesystem::path& path);
void write_samples(const std::filesystem::path& path, std::span<const GroundingSample> samples);
std::vector<SceneRecord> read_scenes(const std::filesystem::path& path);

/// Reads all non-empty lines of a JSON-Lines file.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, std::span<const nlohmann::json> rows);

/// Little-endian float32 quadruplets. `fields` = 5 accepts nuScenes records and
/// drops the fifth value.
PointCloudFrame read_point_cloud(const std::filesystem::path& path, int fields = 4);
void write_point_cloud(const std::filesystem::path& path, const PointCloudFrame& frame);
std::vector<std::uint8_t> encode_point_cloud(const PointCloudFrame& frame);
PointCloudFrame decode_point_cloud(std::span<const std::uint8_t> bytes, int fields = 4);

/// Loader resolving references relative to `root`.
PointCloudLoader directory_loader(std::filesystem::path root);

}  // namespace bevg
