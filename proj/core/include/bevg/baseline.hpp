// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bevg/detector.hpp"
#include "bevg/nn/layers.hpp"
#include "bevg/random.hpp"
#include "bevg/textenc.hpp"

namespace bevg {

/// Two 2-layer perceptrons mapping the sentence embedding (E_l) and proposal
/// features (E_o) into a shared space; scores are their inner products.
class MatchHead {
 public:
  MatchHead(int text_dim, int feature_dim, int hidden = 256, int match_dim = 128, std::uint64_t seed = 0);

  int text_dim() const { return text_dim_; }
  int feature_dim() const { return feature_dim_; }
  int hidden() const { return hidden_; }
  int match_dim() const { return match_dim_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  /// Scores as a [n, 1] tape variable.
  nn::Var scores(nn::Tape& t, std::span<const double> sentence, std::span<const double> features, int n) const;

 private:
  int text_dim_, feature_dim_, hidden_, match_dim_;
  mutable nn::ParamStore params_;
  nn::Mlp el_, eo_;
};

/// s_k = <E_l(f_sen), E_o(f_k)> for each proposal. Throws on width mismatch
/// or an empty proposal list.
std::vector<double> match_scores(std::span<const Proposal> proposals, const TextEmbeddings& text,
                                 const MatchHead& head);
/// Index of the highest score; ties go to the lowest index.
std::size_t argmax_index(std::span<const double> scores);

struct MatchExample {
  std::vector<double> sentence;
  std::vector<double> features;  // n x d_o row-major
  int n = 0;
  int positive = 0;
};

/// Positive = the proposal with maximal 3D IoU to the target, if that IoU is
/// at least `threshold`.
std::optional<int> positive_proposal(std::span<const Proposal> proposals, const Box3D& target,
                                     double threshold = 0.25);
MatchExample make_match_example(std::span<const Proposal> proposals, const TextEmbeddings& text, int positive);

struct MatcherConfig {
  int epochs = 20;
  int batch_size = 4;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
};

struct MatcherReport {
  std::vector<double> epoch_loss;      // mean cross-entropy per epoch
  std::vector<double> epoch_accuracy;  // training selection accuracy after each epoch
  std::size_t skipped = 0;
};

/// Softmax cross-entropy over proposal scores; only MatchHead parameters
/// change. Throws when no usable example remains.
MatcherReport train_matcher(MatchHead& head, std::span<const MatchExample> examples, const MatcherConfig& cfg,
                            std::size_t skipped = 0);

double match_loss(const MatchHead& head, const MatchExample& ex, bool accumulate_grads = false);
double selection_accuracy(const MatchHead& head, std::span<const MatchExample> examples);

enum class ReferenceMode { gt_rand, pred_rand, pred_best };
std::optional<ReferenceMode> parse_reference_mode(std::string_view name);

/// GT-Rand: uniform over scene boxes. Pred-Rand: uniform over proposals.
/// Pred-Best: highest score, lowest index on ties.
Box3D reference_select(ReferenceMode mode, std::span<const SceneObject> scene_boxes,
                       std::span<const Proposal> proposals, Rng& rng);

/// Matcher weights with the encoder they were trained against
/// ("BEVGMTCH" archive).
void save_match_head(const std::filesystem::path& path, const MatchHead& head, const EncoderSpec& encoder);

struct LoadedMatcher {
  std::unique_ptr<MatchHead> head;
  EncoderSpec encoder;
};
LoadedMatcher load_match_head(const std::filesystem::path& path);

}  // namespace bevg
