// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include "bevg/bev_train.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "bevg/random.hpp"

namespace bevg {

nlohmann::json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},     {"stage1_epochs", c.stage1_epochs},
          {"stage2_epochs", c.stage2_epochs}, {"max_steps_stage1", c.max_steps_stage1},
          {"max_steps_stage2", c.max_steps_stage2}, {"lr_stage1", c.lr_stage1},
          {"lr_stage2", c.lr_stage2},       {"lidar_only", c.lidar_only},
          {"grad_clip", c.grad_clip},       {"weight_decay", c.weight_decay},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const auto& v = *it;
    if (k == "batch_size") c.batch_size = v.get<int>();
    else if (k == "stage1_epochs") c.stage1_epochs = v.get<int>();
    else if (k == "stage2_epochs") c.stage2_epochs = v.get<int>();
    else if (k == "max_steps_stage1") c.max_steps_stage1 = v.get<long>();
    else if (k == "max_steps_stage2") c.max_steps_stage2 = v.get<long>();
    else if (k == "lr_stage1") c.lr_stage1 = v.get<double>();
    else if (k == "lr_stage2") c.lr_stage2 = v.get<double>();
    else if (k == "lidar_only") c.lidar_only = v.get<bool>();
    else if (k == "grad_clip") c.grad_clip = v.get<double>();
    else if (k == "weight_decay") c.weight_decay = v.get<double>();
    else if (k == "seed") c.seed = v.get<std::uint64_t>();
    else throw std::invalid_argument("train config: unknown key '" + k + "'");
  }
  return c;
}

nlohmann::json to_json(const TrainState& s) {
  return {{"stage", s.stage},           {"epoch", s.epoch},         {"batch_in_epoch", s.batch_in_epoch},
          {"stage_step", s.stage_step}, {"global_step", s.global_step}, {"finished", s.finished}};
}

TrainState train_state_from_json(const nlohmann::json& j) {
  TrainState s;
  s.stage = j.at("stage").get<int>();
  s.epoch = j.at("epoch").get<int>();
  s.batch_in_epoch = j.at("batch_in_epoch").get<long>();
  s.stage_step = j.at("stage_step").get<long>();
  s.global_step = j.at("global_step").get<long>();
  s.finished = j.at("finished").get<bool>();
  return s;
}

Trainer::Trainer(BevGroundingModel& model, const TrainSet& data, TrainConfig cfg)
    : model_(model), data_(data), cfg_(cfg) {
  if (data_.items.empty()) throw std::invalid_argument("trainer: empty training set");
  if (cfg_.batch_size < 1) throw std::invalid_argument("trainer: batch_size must be >= 1");
  for (const auto& it : data_.items) {
    if (it.scene >= data_.scenes.size()) throw std::invalid_argument("trainer: item references a missing scene");
  }
  enter_stage(1);
}

void Trainer::enter_stage(int stage) {
  state_.stage = stage;
  state_.epoch = 0;
  state_.batch_in_epoch = 0;
  state_.stage_step = 0;
  nn::AdamConfig ac;
  ac.lr = stage == 1 ? cfg_.lr_stage1 : cfg_.lr_stage2;
  ac.weight_decay = cfg_.weight_decay;
  adam_ = nn::Adam(ac);
  model_.mutable_config().use_images = (stage == 2);
  if (stage_epochs() <= 0) {
    if (stage == 1 && !cfg_.lidar_only && cfg_.stage2_epochs > 0) {
      enter_stage(2);
    } else {
      state_.finished = true;
    }
  }
}

long Trainer::steps_per_epoch() const {
  const long n = static_cast<long>(data_.items.size());
  return (n + cfg_.batch_size - 1) / cfg_.batch_size;
}

int Trainer::stage_epochs() const { return state_.stage == 1 ? cfg_.stage1_epochs : cfg_.stage2_epochs; }
long Trainer::stage_max_steps() const { return state_.stage == 1 ? cfg_.max_steps_stage1 : cfg_.max_steps_stage2; }

std::vector<std::size_t> Trainer::order(int stage, int epoch) const {
  std::vector<std::size_t> idx(data_.items.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(mix64(cfg_.seed) ^ mix64(0x7a1e0000ULL + static_cast<std::uint64_t>(stage) * 1000003ULL +
                                   static_cast<std::uint64_t>(epoch)));
  rng.shuffle(idx);
  return idx;
}

std::vector<std::size_t> Trainer::next_batch() const {
  const auto ord = order(state_.stage, state_.epoch);
  const std::size_t b = static_cast<std::size_t>(state_.batch_in_epoch) * cfg_.batch_size;
  const std::size_t e = std::min(ord.size(), b + cfg_.batch_size);
  return {ord.begin() + static_cast<std::ptrdiff_t>(b), ord.begin() + static_cast<std::ptrdiff_t>(e)};
}

StepLog Trainer::step() {
  if (state_.finished) throw std::logic_error("trainer: training already finished");
  model_.mutable_config().use_images = (state_.stage == 2);
  const auto batch = next_batch();
  auto& ps = model_.params();
  ps.zero_grad();
  StepLog log;
  log.stage = state_.stage;
  log.epoch = state_.epoch;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i : batch) {
    const TrainItem& item = data_.items[i];
    nn::Tape t;
    const ForwardResult fr = model_.forward(t, data_.scenes[item.scene], item.text);
    const LossTerms lt = model_.loss(fr, item.target);
    t.backward(nn::scale(lt.total, inv));
    t.accumulate_param_grads();
    log.loss += lt.total.item() * inv;
    log.heatmap += lt.heatmap * inv;
    log.cls += lt.cls * inv;
    log.reg += lt.reg * inv;
  }
  log.grad_norm = nn::clip_grad_norm(ps, cfg_.grad_clip);
  adam_.step(ps);

  ++state_.global_step;
  ++state_.stage_step;
  log.global_step = state_.global_step;
  if (++state_.batch_in_epoch >= steps_per_epoch()) {
    state_.batch_in_epoch = 0;
    ++state_.epoch;
  }
  const bool stage_done = state_.epoch >= stage_epochs() ||
                          (stage_max_steps() > 0 && state_.stage_step >= stage_max_steps());
  if (stage_done) {
    if (state_.stage == 1 && !cfg_.lidar_only && cfg_.stage2_epochs > 0) {
      enter_stage(2);
    } else {
      state_.finished = true;
    }
  }
  return log;
}

void Trainer::run(const std::function<void(const StepLog&)>& on_step) {
  while (!done()) {
    const StepLog log = step();
    if (on_step) on_step(log);
  }
}

void Trainer::restore(const TrainState& state) {
  state_ = state;
  nn::AdamConfig ac = adam_.config();
  ac.lr = state_.stage == 1 ? cfg_.lr_stage1 : cfg_.lr_stage2;
  adam_.set_lr(ac.lr);
  model_.mutable_config().use_images = (state_.stage == 2);
}

double evaluate_loss(const BevGroundingModel& model, const TrainSet& data, std::span<const std::size_t> items) {
  if (items.empty()) throw std::invalid_argument("evaluate_loss: no items");
  double total = 0.0;
  for (std::size_t i : items) {
    nn::Tape t;
    t.set_grad_enabled(false);
    const auto& item = data.items.at(i);
    const ForwardResult fr = model.forward(t, data.scenes.at(item.scene), item.text);
    total += model.loss(fr, item.target).total.item();
  }
  return total / static_cast<double>(items.size());
}

}  // namespace bevg
