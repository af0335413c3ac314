// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "bevg/bev_model.hpp"
#include "bevg/datakit.hpp"

namespace bevg::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kRemoteExhausted = 3 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every remote request of a batch failed after retries.
class RemoteExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses argv and runs one subcommand. Never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Synthetic or preprocessed corpus on disk: samples.jsonl, scenes.jsonl and
/// the lidar / image files they reference.
class Corpus {
 public:
  explicit Corpus(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  const std::vector<GroundingSample>& samples() const { return samples_; }
  const SceneRecord& scene(const std::string& scene_id) const;
  bool has_scenes() const { return !scenes_.empty(); }

  /// Samples of a split subset: "train", "test" or "all". Needs split.json
  /// unless the subset is "all".
  std::vector<GroundingSample> subset(const std::string& name) const;

  /// Model input for a scene, with camera images when `with_images`.
  SceneInput scene_input(const std::string& scene_id, const ModelConfig& cfg, bool with_images) const;

 private:
  std::filesystem::path root_;
  std::vector<GroundingSample> samples_;
  std::map<std::string, SceneRecord> scenes_;
};

/// BEV rendering: points in gray, ground truth in red, predictions in blue
/// then green.
Raster render_bev(const PointCloudFrame& cloud, const Box3D& gt, const std::vector<Box3D>& predictions,
                  double half_range = 54.0, int size = 640);

/// FNV-1a over file contents in the given order, as 16 hex digits.
std::string checksum_files(const std::vector<std::filesystem::path>& files);

}  // namespace bevg::cli
