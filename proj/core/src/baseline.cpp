// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include "bevg/baseline.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "bevg/bev_train.hpp"
#include "bevg/losses.hpp"
#include "bevg/nn/optim.hpp"
#include "bevg/nn/params.hpp"

namespace bevg {

MatchHead::MatchHead(int text_dim, int feature_dim, int hidden, int match_dim, std::uint64_t seed)
    : text_dim_(text_dim), feature_dim_(feature_dim), hidden_(hidden), match_dim_(match_dim) {
  if (text_dim <= 0 || feature_dim <= 0 || hidden <= 0 || match_dim <= 0) {
    throw std::invalid_argument("MatchHead: widths must be positive");
  }
  Rng rng(seed);
  el_ = nn::Mlp::create(params_, rng, "el", text_dim, hidden, match_dim);
  eo_ = nn::Mlp::create(params_, rng, "eo", feature_dim, hidden, match_dim);
}

nn::Var MatchHead::scores(nn::Tape& t, std::span<const double> sentence, std::span<const double> features,
                          int n) const {
  if (sentence.size() != static_cast<std::size_t>(text_dim_)) {
    throw std::invalid_argument("match_scores: sentence width " + std::to_string(sentence.size()) + " != " +
                                std::to_string(text_dim_));
  }
  if (n < 1) throw std::invalid_argument("match_scores: no proposals");
  if (features.size() != static_cast<std::size_t>(n) * feature_dim_) {
    throw std::invalid_argument("match_scores: feature width mismatch (expected " + std::to_string(feature_dim_) + ")");
  }
  const nn::Var s = t.constant({1, text_dim_}, std::vector<double>(sentence.begin(), sentence.end()));
  const nn::Var f = t.constant({n, feature_dim_}, std::vector<double>(features.begin(), features.end()));
  return nn::matmul_nt(eo_(t, params_, f), el_(t, params_, s));
}

std::vector<double> match_scores(std::span<const Proposal> proposals, const TextEmbeddings& text,
                                 const MatchHead& head) {
  if (proposals.empty()) throw std::invalid_argument("match_scores: no proposals");
  std::vector<double> feats;
  for (const auto& p : proposals) {
    if (p.feature.size() != static_cast<std::size_t>(head.feature_dim())) {
      throw std::invalid_argument("match_scores: proposal feature width " + std::to_string(p.feature.size()) +
                                  " != " + std::to_string(head.feature_dim()));
    }
    feats.insert(feats.end(), p.feature.begin(), p.feature.end());
  }
  nn::Tape t;
  t.set_grad_enabled(false);
  const auto v = head.scores(t, text.sentence, feats, static_cast<int>(proposals.size())).value();
  return {v.begin(), v.end()};
}

std::size_t argmax_index(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("argmax_index: empty");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

std::optional<int> positive_proposal(std::span<const Proposal> proposals, const Box3D& target, double threshold) {
  int best = -1;
  double best_iou = -1.0;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    const double iou = iou_3d(proposals[i].box, target);
    if (iou > best_iou) {
      best_iou = iou;
      best = static_cast<int>(i);
    }
  }
  if (best < 0 || best_iou < threshold) return std::nullopt;
  return best;
}

MatchExample make_match_example(std::span<const Proposal> proposals, const TextEmbeddings& text, int positive) {
  MatchExample ex;
  ex.sentence = text.sentence;
  ex.n = static_cast<int>(proposals.size());
  ex.positive = positive;
  for (const auto& p : proposals) ex.features.insert(ex.features.end(), p.feature.begin(), p.feature.end());
  return ex;
}

double match_loss(const MatchHead& head, const MatchExample& ex, bool accumulate_grads) {
  nn::Tape t;
  t.set_grad_enabled(accumulate_grads);
  const nn::Var s = head.scores(t, ex.sentence, ex.features, ex.n);
  const nn::Var loss = softmax_cross_entropy(s, ex.positive);
  if (accumulate_grads) {
    t.backward(loss);
    t.accumulate_param_grads();
  }
  return loss.item();
}

double selection_accuracy(const MatchHead& head, std::span<const MatchExample> examples) {
  if (examples.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& ex : examples) {
    nn::Tape t;
    t.set_grad_enabled(false);
    const auto v = head.scores(t, ex.sentence, ex.features, ex.n).value();
    ok += argmax_index(v) == static_cast<std::size_t>(ex.positive);
  }
  return static_cast<double>(ok) / static_cast<double>(examples.size());
}

MatcherReport train_matcher(MatchHead& head, std::span<const MatchExample> examples, const MatcherConfig& cfg,
                            std::size_t skipped) {
  if (examples.empty()) throw std::invalid_argument("train_matcher: no usable training examples");
  if (cfg.batch_size < 1 || cfg.epochs < 0) throw std::invalid_argument("train_matcher: bad schedule");
  MatcherReport rep;
  rep.skipped = skipped;
  nn::Sgd opt({cfg.lr, cfg.momentum, cfg.weight_decay});
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(cfg.seed);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      head.params().zero_grad();
      for (std::size_t i = b; i < e; ++i) total += match_loss(head, examples[order[i]], true);
      const double inv = 1.0 / static_cast<double>(e - b);
      for (auto* p : head.params().all()) {
        for (double& g : p->grad) g *= inv;
      }
      opt.step(head.params());
    }
    rep.epoch_loss.push_back(total / static_cast<double>(examples.size()));
    rep.epoch_accuracy.push_back(selection_accuracy(head, examples));
  }
  return rep;
}

std::optional<ReferenceMode> parse_reference_mode(std::string_view name) {
  if (name == "gt-rand") return ReferenceMode::gt_rand;
  if (name == "pred-rand") return ReferenceMode::pred_rand;
  if (name == "pred-best") return ReferenceMode::pred_best;
  return std::nullopt;
}

Box3D reference_select(ReferenceMode mode, std::span<const SceneObject> scene_boxes,
                       std::span<const Proposal> proposals, Rng& rng) {
  switch (mode) {
    case ReferenceMode::gt_rand:
      if (scene_boxes.empty()) throw std::invalid_argument("reference_select: no ground-truth boxes");
      return scene_boxes[rng.index(scene_boxes.size())].box;
    case ReferenceMode::pred_rand:
      if (proposals.empty()) throw std::invalid_argument("reference_select: no proposals");
      return proposals[rng.index(proposals.size())].box;
    case ReferenceMode::pred_best: {
      if (proposals.empty()) throw std::invalid_argument("reference_select: no proposals");
      std::size_t best = 0;
      for (std::size_t i = 1; i < proposals.size(); ++i) {
        if (proposals[i].score > proposals[best].score) best = i;
      }
      return proposals[best].box;
    }
  }
  throw std::invalid_argument("reference_select: unknown mode");
}

namespace {
constexpr nn::Magic kMatcherMagic{'B', 'E', 'V', 'G', 'M', 'T', 'C', 'H'};
}  // namespace

void save_match_head(const std::filesystem::path& path, const MatchHead& head, const EncoderSpec& encoder) {
  nlohmann::json header{{"text_dim", head.text_dim()},
                        {"feature_dim", head.feature_dim()},
                        {"hidden", head.hidden()},
                        {"match_dim", head.match_dim()},
                        {"encoder", to_json(encoder)}};
  nn::write_archive(path, kMatcherMagic, 1, std::move(header), nn::export_params(head.params()));
}

LoadedMatcher load_match_head(const std::filesystem::path& path) {
  const auto archive = nn::read_archive(path, kMatcherMagic, 1);
  const auto& h = archive.header;
  LoadedMatcher out;
  out.encoder = encoder_spec_from_json(h.at("encoder"));
  out.head = std::make_unique<MatchHead>(h.at("text_dim").get<int>(), h.at("feature_dim").get<int>(),
                                         h.at("hidden").get<int>(), h.at("match_dim").get<int>());
  nn::import_params(out.head->params(), archive.arrays);
  return out;
}

}  // namespace bevg
