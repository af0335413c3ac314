// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bevg/camera.hpp"
#include "bevg/datakit.hpp"
#include "bevg/geometry.hpp"
#include "bevg/image.hpp"
#include "bevg/nn/layers.hpp"
#include "bevg/textenc.hpp"

namespace bevg {

/// Square BEV raster over [lo, hi). Rows index y, columns index x.
struct GridSpec {
  Vec3 lo{-54.0, -54.0, -5.0};
  Vec3 hi{54.0, 54.0, 3.0};
  double cell = 0.6;
  int z_bins = 8;

  int width() const;
  int height() const;
  double center_x(int col) const { return lo.x + (col + 0.5) * cell; }
  double center_y(int row) const { return lo.y + (row + 0.5) * cell; }
  /// Cell (col, row) containing a planar point, if inside the grid.
  std::optional<std::array<int, 2>> cell_of(double x, double y) const;
  void validate() const;
};

/// Per-voxel channels: occupancy, mean in-cell dx, dy, mean in-bin dz, mean
/// intensity. Per-column channels follow all voxels: mean x / |lo.x|, mean
/// y / |lo.y|, log1p(count) / 4.
inline constexpr int kVoxelChannels = 5;
inline constexpr int kColumnChannels = 3;
int voxel_input_channels(const GridSpec& grid);

/// Dense [channels, H, W] voxel grid. An empty frame gives all zeros.
std::vector<double> voxelize(const PointCloudFrame& frame, const GridSpec& grid);

/// Occupancy plane (any point in the column) for locality checks.
std::vector<int> occupancy_plane(const PointCloudFrame& frame, const GridSpec& grid);

struct ModelConfig {
  GridSpec grid;
  int bev_channels = 64;
  int model_dim = 64;
  int heads = 4;
  int ffn_dim = 128;
  int num_proposals = 200;
  int text_dim = 64;
  int image_channels = 16;
  int image_width = 80;   // image branch input size after resampling
  int image_height = 45;
  std::vector<double> lift_heights{0.5, 1.0, 1.5};  // meters above ground
  // Module switches for ablations.
  bool use_images = false;  // false: the lidar-only variant
  bool use_encoder = true;  // trimodal text fusion + feature pyramid
  bool use_spca = true;
  bool use_seca = true;
  // Targets and losses.
  double heatmap_min_overlap = 0.1;
  int heatmap_min_radius = 1;
  double w_heatmap = 1.0;
  double w_cls = 1.0;
  double w_reg = 1.0;
  double cost_cls = 1.0;
  double cost_box = 0.25;
  double heatmap_bias = -2.19;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const GridSpec& g);
GridSpec grid_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
ModelConfig model_config_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Box encoding

inline constexpr int kBoxCode = 8;   // dx, dy, z, log l, log w, log h, sin, cos
inline constexpr int kHeadOut = 9;   // box code + confidence logit

/// Regression target of `box` relative to the proposal at (col, row).
std::array<double, kBoxCode> encode_box(const Box3D& box, int col, int row, const GridSpec& grid);
/// x = (col + 0.5 + dx) * cell + lo.x; dims = exp(log-dims); alpha = atan2.
Box3D decode_box(std::span<const double> code, int col, int row, const GridSpec& grid);

// ---------------------------------------------------------------------------
// Scene inputs

/// Camera-to-BEV lift: for each cell, the image-feature pixels its centre
/// projects to at the configured heights.
struct LiftTable {
  int feat_width = 0;
  int feat_height = 0;
  std::vector<std::size_t> offsets;   // H*W + 1
  std::vector<std::int32_t> entries;  // camera * (fh*fw) + pixel
};
LiftTable build_lift_table(const CameraRig& cams, const GridSpec& grid, double ground_z,
                           std::span<const double> heights, int feat_width, int feat_height);

/// Everything the model reads from one frame, independent of the prompt.
struct SceneInput {
  std::vector<double> voxels;                 // [Cin, H, W]
  std::vector<double> images;                 // [6, 3, h, w] in [0, 1]; empty in lidar-only use
  std::shared_ptr<const LiftTable> lift;      // required when images are used
};

/// Box-filter resample to (w, h) and scale to [0, 1], channel-major.
std::vector<double> image_tensor(const Raster& image, int width, int height);

SceneInput prepare_scene(const PointCloudFrame& cloud, const ModelConfig& cfg);
SceneInput prepare_scene(const PointCloudFrame& cloud, std::span<const Raster> images, const CameraRig& cams,
                         double ground_z, const ModelConfig& cfg);

// ---------------------------------------------------------------------------
// Proposal selection

/// Top-K cells of a row-major H x W score map after 3x3 local-max
/// suppression (non-maxima score 0). Ties go to the lower row-major index.
std::vector<int> select_top_cells(std::span<const double> scores, int height, int width, int k);

/// 2D sinusoidal encoding of cell centres, one row of width `dim` per cell.
std::vector<double> positional_encoding(std::span<const int> cells, int width, int dim);

// ---------------------------------------------------------------------------
// Model

struct ForwardResult {
  nn::Var heat_logits;     // [H*W]
  nn::Var bev;             // f_bev'' as [C, H, W]
  std::vector<int> cells;  // proposal cells, row-major index
  nn::Var proposals;       // f_pro after the decoder [K, d]
  nn::Var head;            // [K, 9]
  // Attention probabilities per block ("sa1", "spca", "sa2", "seca"), per head.
  std::vector<std::pair<std::string, std::vector<std::vector<double>>>> attention;
};

struct LossTerms {
  nn::Var total;
  double heatmap = 0.0;
  double cls = 0.0;
  double reg = 0.0;
  int matched = -1;  // proposal index matched to the target
};

struct Detection {
  Box3D box;
  double confidence = 0.0;
  int cell = 0;
};

class BevGroundingModel {
 public:
  explicit BevGroundingModel(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  ModelConfig& mutable_config() { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  // Stages of the forward pass, exposed for tests.
  nn::Var encode_points(nn::Tape& t, const SceneInput& scene) const;
  nn::Var encode_images(nn::Tape& t, const SceneInput& scene) const;  // [Ci, H, W]
  nn::Var fuse(nn::Tape& t, nn::Var points, const SceneInput& scene) const;
  nn::Var trimodal_encode(nn::Tape& t, nn::Var fused, std::span<const double> sentence) const;
  nn::Var heatmap_logits(nn::Tape& t, nn::Var bev) const;
  /// Gathers f_bev'' rows at `cells`, projects them and adds positions.
  nn::Var proposal_features(nn::Tape& t, nn::Var bev, std::span<const int> cells) const;
  /// SA -> SPCA -> SA -> SECA over proposal features.
  nn::Var decode(nn::Tape& t, nn::Var proposals, nn::Var bev, const TextEmbeddings& text,
                 ForwardResult* record = nullptr) const;

  ForwardResult forward(nn::Tape& t, const SceneInput& scene, const TextEmbeddings& text,
                        bool keep_attention = false) const;
  /// Same as forward, with the proposal cells supplied by the caller.
  ForwardResult forward_with_cells(nn::Tape& t, const SceneInput& scene, const TextEmbeddings& text,
                                   std::vector<int> cells, bool keep_attention = false) const;

  LossTerms loss(const ForwardResult& fr, const Box3D& target) const;

  std::vector<Detection> decode_all(const ForwardResult& fr) const;
  /// Highest-confidence box; ties go to the lower proposal index.
  Detection predict(const SceneInput& scene, const TextEmbeddings& text) const;

  /// Heatmap training target for one referred box.
  std::vector<double> heatmap_target(const Box3D& target) const;

 private:
  void build();
  // Layers bind parameters onto a tape through a non-const store.
  nn::ParamStore& params_mut() const { return params_; }

  ModelConfig cfg_;
  mutable nn::ParamStore params_;

  // Point branch.
  nn::Conv2d pt_conv1_, pt_conv2_;
  // Image branch.
  nn::Conv2d img_conv1_, img_conv2_, img_fuse_;
  // Trimodal encoder.
  nn::Conv2d reduce_, down1_, down2_, lat0_, lat1_, lat2_, smooth_;
  // Heatmap head.
  nn::Conv2d heat_conv_, heat_out_;
  // Decoder.
  nn::Linear pro_in_, bev_in_, word_in_;
  nn::AttentionBlock sa1_, spca_, sa2_, seca_;
  nn::Mlp head_;
  std::vector<double> bev_pos_;  // [H*W, d] positional encoding of all cells
};

}  // namespace bevg
