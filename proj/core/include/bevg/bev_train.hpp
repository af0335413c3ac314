// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bevg/bev_model.hpp"
#include "bevg/nn/optim.hpp"
#include "bevg/textenc.hpp"

namespace bevg {

struct TrainItem {
  std::string sample_id;
  std::size_t scene = 0;  // index into TrainSet::scenes
  TextEmbeddings text;
  Box3D target;
};

struct TrainSet {
  std::vector<SceneInput> scenes;
  std::vector<TrainItem> items;
};

struct TrainConfig {
  int batch_size = 4;
  int stage1_epochs = 20;
  int stage2_epochs = 6;
  long max_steps_stage1 = 0;  // 0: run all epochs
  long max_steps_stage2 = 0;
  double lr_stage1 = 1e-3;
  double lr_stage2 = 1e-4;
  bool lidar_only = false;
  double grad_clip = 10.0;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct TrainState {
  int stage = 1;
  int epoch = 0;
  long batch_in_epoch = 0;
  long stage_step = 0;
  long global_step = 0;
  bool finished = false;
};

nlohmann::json to_json(const TrainState& s);
TrainState train_state_from_json(const nlohmann::json& j);

struct StepLog {
  long global_step = 0;
  int stage = 1;
  int epoch = 0;
  double loss = 0.0;
  double heatmap = 0.0;
  double cls = 0.0;
  double reg = 0.0;
  double grad_norm = 0.0;
};

/// Two-stage trainer: stage 1 lidar-only at lr_stage1, stage 2 with the image
/// branch at lr_stage2 (skipped when lidar_only). Sample order depends only on
/// (seed, stage, epoch), so a restored trainer continues bit-identically.
class Trainer {
 public:
  Trainer(BevGroundingModel& model, const TrainSet& data, TrainConfig cfg);

  bool done() const { return state_.finished; }
  /// One optimizer step over one batch.
  StepLog step();
  void run(const std::function<void(const StepLog&)>& on_step = {});

  const TrainState& state() const { return state_; }
  const TrainConfig& config() const { return cfg_; }
  nn::Adam& optimizer() { return adam_; }
  void restore(const TrainState& state);

  /// Indices of the batch the next step() will use.
  std::vector<std::size_t> next_batch() const;

 private:
  void enter_stage(int stage);
  long steps_per_epoch() const;
  int stage_epochs() const;
  long stage_max_steps() const;
  std::vector<std::size_t> order(int stage, int epoch) const;

  BevGroundingModel& model_;
  const TrainSet& data_;
  TrainConfig cfg_;
  nn::Adam adam_;
  TrainState state_;
};

/// Mean loss of the model over items, without gradient.
double evaluate_loss(const BevGroundingModel& model, const TrainSet& data, std::span<const std::size_t> items);

// ---------------------------------------------------------------------------
// Checkpoints: "BEVGCKPT", u32 version, u64 JSON length, JSON header, then
// named float32 arrays (parameters, then Adam moments).

struct CheckpointMeta {
  ModelConfig model;
  EncoderSpec encoder;
  std::optional<TrainConfig> train;
  std::optional<TrainState> state;
  nlohmann::json extra = nlohmann::json::object();
};

nlohmann::json to_json(const EncoderSpec& s);
EncoderSpec encoder_spec_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const BevGroundingModel& model, const EncoderSpec& encoder,
                     Trainer* trainer = nullptr, const nlohmann::json& extra = nlohmann::json::object());

struct LoadedCheckpoint {
  CheckpointMeta meta;
  std::unique_ptr<BevGroundingModel> model;
  std::map<std::string, std::vector<double>> adam_m;
  std::map<std::string, std::vector<double>> adam_v;
  std::int64_t adam_steps = 0;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);
/// Restores optimizer state and progress into a trainer built on the loaded model.
void restore_trainer(Trainer& trainer, const LoadedCheckpoint& ckpt);

}  // namespace bevg
