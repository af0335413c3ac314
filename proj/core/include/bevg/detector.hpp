// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bevg/datakit.hpp"

namespace bevg {

struct Proposal {
  Box3D box;
  std::vector<double> feature;
  double score = 0.0;
  Category category = Category::car;
};

struct ProposalFrame {
  std::string frame_id;
  std::vector<Proposal> proposals;
};

inline constexpr int kMaxProposals = 200;

/// Feature layout of the synthetic detector: category one-hot (10), colour
/// one-hot (6), sector one-hot (6), planar range / 54, log l, log w, log h.
inline constexpr int kProposalFeatureDim = kNumCategories + kNumColors + kNumViewpoints + 4;

/// Stand-in for a trained 3D detector: jittered ground-truth boxes (a few
/// missed), plus low-score distractors, with noisy attribute features.
struct NoisyDetectorOptions {
  std::uint64_t seed = 0;
  double center_sigma = 0.25;  // meters
  double size_sigma = 0.08;    // log-scale
  double yaw_sigma = 0.1;      // radians
  double miss_rate = 0.05;
  double label_noise = 0.1;    // probability of a wrong category / colour
  double feature_sigma = 0.1;
  int min_distractors = 3;
  int max_distractors = 12;
  int max_proposals = kMaxProposals;
};

ProposalFrame detect_scene(const SceneRecord& scene, const NoisyDetectorOptions& options);

/// Keeps the `cap` highest-scoring proposals; equal scores keep input order.
void cap_proposals(ProposalFrame& frame, int cap = kMaxProposals);

nlohmann::json to_json(const ProposalFrame& f);
ProposalFrame proposal_frame_from_json(const nlohmann::json& j);
std::vector<ProposalFrame> read_proposals(const std::filesystem::path& path);
void write_proposals(const std::filesystem::path& path, std::span<const ProposalFrame> frames);

}  // namespace bevg
