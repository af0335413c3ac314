// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include "bevg/detector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "bevg/random.hpp"

namespace bevg {

namespace {

std::vector<double> make_feature(const Box3D& box, Category cat, Color color, double sigma, Rng& rng) {
  std::vector<double> f(kProposalFeatureDim, 0.0);
  f[static_cast<int>(cat)] = 1.0;
  f[kNumCategories + static_cast<int>(color)] = 1.0;
  f[kNumCategories + kNumColors + static_cast<int>(viewpoint_of(box))] = 1.0;
  const int base = kNumCategories + kNumColors + kNumViewpoints;
  f[base] = planar_range(box) / 54.0;
  f[base + 1] = std::log(box.l);
  f[base + 2] = std::log(box.w);
  f[base + 3] = std::log(box.h);
  for (double& v : f) v += rng.normal(0.0, sigma);
  return f;
}

}  // namespace

ProposalFrame detect_scene(const SceneRecord& scene, const NoisyDetectorOptions& o) {
  if (o.max_distractors < o.min_distractors || o.min_distractors < 0) {
    throw std::invalid_argument("detector: bad distractor range");
  }
  Rng rng(mix64(o.seed) ^ fnv1a64(scene.scene_id));
  ProposalFrame frame;
  frame.frame_id = scene.scene_id;
  for (const auto& obj : scene.objects) {
    if (rng.bernoulli(o.miss_rate)) continue;
    const Box3D& b = obj.box;
    const Box3D jittered(b.x + rng.normal(0.0, o.center_sigma), b.y + rng.normal(0.0, o.center_sigma),
                         b.z + rng.normal(0.0, 0.5 * o.center_sigma), b.l * std::exp(rng.normal(0.0, o.size_sigma)),
                         b.w * std::exp(rng.normal(0.0, o.size_sigma)), b.h * std::exp(rng.normal(0.0, o.size_sigma)),
                         b.alpha + rng.normal(0.0, o.yaw_sigma));
    Category cat = obj.category;
    if (rng.bernoulli(o.label_noise)) cat = kAllCategories[rng.index(kNumCategories)];
    Color color = obj.color;
    if (rng.bernoulli(o.label_noise)) color = kAllColors[rng.index(kNumColors)];
    frame.proposals.push_back({jittered, make_feature(jittered, cat, color, o.feature_sigma, rng),
                               rng.uniform(0.5, 1.0), cat});
  }
  const int n_dis = o.min_distractors + static_cast<int>(rng.index(o.max_distractors - o.min_distractors + 1));
  for (int i = 0; i < n_dis; ++i) {
    const Category cat = kAllCategories[rng.index(kNumCategories)];
    const SizePrior prior = size_prior(cat);
    const double r = rng.uniform(4.0, 45.0);
    const double th = rng.uniform(-kPi, kPi);
    const Box3D b(r * std::cos(th), r * std::sin(th), scene.ground_z + 0.5 * prior.h, prior.l, prior.w, prior.h,
                  rng.uniform(-kPi, kPi));
    const Color color = kAllColors[rng.index(kNumColors)];
    frame.proposals.push_back({b, make_feature(b, cat, color, o.feature_sigma, rng), rng.uniform(0.1, 0.6), cat});
  }
  cap_proposals(frame, o.max_proposals);
  return frame;
}

void cap_proposals(ProposalFrame& frame, int cap) {
  if (cap < 0) throw std::invalid_argument("cap_proposals: negative cap");
  std::stable_sort(frame.proposals.begin(), frame.proposals.end(),
                   [](const Proposal& a, const Proposal& b) { return a.score > b.score; });
  if (frame.proposals.size() > static_cast<std::size_t>(cap)) frame.proposals.resize(cap);
}

nlohmann::json to_json(const ProposalFrame& f) {
  nlohmann::json props = nlohmann::json::array();
  for (const auto& p : f.proposals) {
    props.push_back({{"box", to_json(p.box)},
                     {"score", p.score},
                     {"category", std::string(category_name(p.category))},
                     {"feature", p.feature}});
  }
  return {{"frame_id", f.frame_id}, {"proposals", props}};
}

ProposalFrame proposal_frame_from_json(const nlohmann::json& j) {
  ProposalFrame f;
  f.frame_id = j.at("frame_id").get<std::string>();
  for (const auto& p : j.at("proposals")) {
    Proposal q;
    q.box = box_from_json(p.at("box"));
    q.score = p.at("score").get<double>();
    if (!(q.score >= 0.0 && q.score <= 1.0)) throw std::invalid_argument("proposal score outside [0, 1]");
    const auto cat = parse_category(p.at("category").get<std::string>());
    if (!cat) throw std::invalid_argument("unknown proposal category " + p.at("category").dump());
    q.category = *cat;
    q.feature = p.at("feature").get<std::vector<double>>();
    for (double v : q.feature) {
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite proposal feature");
    }
    f.proposals.push_back(std::move(q));
  }
  return f;
}

std::vector<ProposalFrame> read_proposals(const std::filesystem::path& path) {
  std::vector<ProposalFrame> out;
  for (const auto& j : read_jsonl(path)) out.push_back(proposal_frame_from_json(j));
  return out;
}

void write_proposals(const std::filesystem::path& path, std::span<const ProposalFrame> frames) {
  std::vector<nlohmann::json> rows;
  for (const auto& f : frames) rows.push_back(to_json(f));
  write_jsonl(path, rows);
}

}  // namespace bevg
