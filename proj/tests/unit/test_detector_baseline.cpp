// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <set>

#include "bevg/baseline.hpp"
#include "bevg/detector.hpp"
#include "test_support.hpp"

namespace bevg {
namespace {

using testing::max_grad_error;
using testing::random_vector;
using testing::TempDir;

void set_identity(MatchHead& head) {
  for (const char* net : {"el", "eo"}) {
    for (const char* layer : {"fc1", "fc2"}) {
      const std::string base = std::string(net) + "." + layer;
      head.params().get(base + ".weight").value = {1, 0, 0, 1};
      head.params().get(base + ".bias").value = {0, 0};
    }
  }
}

Proposal proposal(std::vector<double> feature, double score = 0.5, Box3D box = Box3D(0, 0, 0, 1, 1, 1, 0)) {
  Proposal p;
  p.box = box;
  p.feature = std::move(feature);
  p.score = score;
  return p;
}

TextEmbeddings sentence(std::vector<double> v) {
  TextEmbeddings e;
  e.dim = static_cast<int>(v.size());
  e.tokens = {"x"};
  e.word = v;
  e.sentence = std::move(v);
  return e;
}

TEST(MatchScores, HandBuiltIdentityCase) {
  MatchHead head(2, 2, 2, 2);
  set_identity(head);
  const std::vector<Proposal> props{proposal({1, 0}), proposal({0, 1})};
  const auto s = match_scores(props, sentence({1, 0}), head);
  EXPECT_EQ(s, (std::vector<double>{1, 0}));
  EXPECT_EQ(argmax_index(s), 0u);
  // Positive scaling of the sentence keeps the argmax.
  EXPECT_EQ(argmax_index(match_scores(props, sentence({3, 0}), head)), 0u);
}

TEST(MatchScores, SingleProposalAndErrors) {
  MatchHead head(4, 3, 8, 5, 1);
  const std::vector<Proposal> one{proposal({0.1, 0.2, 0.3})};
  EXPECT_EQ(match_scores(one, sentence({1, 2, 3, 4}), head).size(), 1u);
  EXPECT_THROW(match_scores({}, sentence({1, 2, 3, 4}), head), std::invalid_argument);
  EXPECT_THROW(match_scores(one, sentence({1, 2}), head), std::invalid_argument);
  const std::vector<Proposal> wide{proposal({1, 2, 3, 4})};
  EXPECT_THROW(match_scores(wide, sentence({1, 2, 3, 4}), head), std::invalid_argument);
  EXPECT_EQ(argmax_index(std::vector<double>{2, 5, 5}), 1u);
}

TEST(MatchLoss, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    MatchHead head(5, 4, 6, 3, seed);
    MatchExample ex{random_vector(rng, 5), random_vector(rng, 4 * 4), 4, static_cast<int>(rng.index(4))};
    head.params().zero_grad();
    match_loss(head, ex, true);
    double worst = 0.0;
    const double h = 1e-3;
    for (auto* p : head.params().all()) {
      for (std::size_t k = 0; k < p->size(); ++k) {
        const double keep = p->value[k];
        p->value[k] = keep + h;
        const double up = match_loss(head, ex);
        p->value[k] = keep - h;
        const double down = match_loss(head, ex);
        p->value[k] = keep;
        const double numeric = (up - down) / (2 * h);
        // ReLU kinks inside the step make those coordinates meaningless.
        if (std::abs(p->grad[k] - numeric) > 1e-4 * std::max(1.0, std::abs(numeric))) {
          const double h2 = 1e-6;
          p->value[k] = keep + h2;
          const double up2 = match_loss(head, ex);
          p->value[k] = keep - h2;
          const double down2 = match_loss(head, ex);
          p->value[k] = keep;
          worst = std::max(worst, testing::relative_error(p->grad[k], (up2 - down2) / (2 * h2)));
        }
      }
    }
    EXPECT_LE(worst, 1e-4) << "seed " << seed;
  }
}

std::vector<MatchExample> separable_examples(int n, std::uint64_t seed) {
  // Sentence = one-hot class c among 4; the positive proposal carries the
  // same one-hot in its features, the others carry different classes.
  Rng rng(seed);
  std::vector<MatchExample> out;
  for (int i = 0; i < n; ++i) {
    std::vector<int> classes{0, 1, 2, 3};
    rng.shuffle(classes);
    const int positive = static_cast<int>(rng.index(4));
    MatchExample ex;
    ex.sentence.assign(4, 0.0);
    ex.sentence[classes[positive]] = 1.0;
    ex.n = 4;
    ex.positive = positive;
    for (int k = 0; k < 4; ++k) {
      std::vector<double> f(6, 0.0);
      f[classes[k]] = 1.0;
      f[4] = rng.uniform(-0.3, 0.3);
      f[5] = rng.uniform(-0.3, 0.3);
      ex.features.insert(ex.features.end(), f.begin(), f.end());
    }
    out.push_back(std::move(ex));
  }
  return out;
}

TEST(TrainMatcher, SeparableReachesFullAccuracy) {
  const auto examples = separable_examples(64, 3);
  MatchHead head(4, 6, 32, 16, 2);
  MatcherConfig cfg;  // 20 epochs, batch 4
  const auto report = train_matcher(head, examples, cfg);
  EXPECT_EQ(report.epoch_loss.size(), 20u);
  EXPECT_DOUBLE_EQ(report.epoch_accuracy.back(), 1.0);
  EXPECT_DOUBLE_EQ(selection_accuracy(head, separable_examples(64, 4)), 1.0);
  EXPECT_LT(report.epoch_loss.back(), report.epoch_loss.front());
}

TEST(TrainMatcher, LeavesTheEncoderUntouched) {
  const auto enc = make_encoder({"hash-test", 4, 0});
  const auto before = enc->weights();
  MatchHead head(4, 6, 8, 4, 0);
  train_matcher(head, separable_examples(8, 1), MatcherConfig{2, 4});
  EXPECT_EQ(enc->weights(), before);
  EXPECT_THROW(train_matcher(head, {}, MatcherConfig{}), std::invalid_argument);
}

TEST(PositiveProposal, MaxIouAboveThreshold) {
  const Box3D target(10, 0, 0, 4, 2, 1.5, 0);
  std::vector<Proposal> props{proposal({}, 0.9, Box3D(10.5, 0, 0, 4, 2, 1.5, 0)),
                              proposal({}, 0.8, Box3D(10.1, 0, 0, 4, 2, 1.5, 0)),
                              proposal({}, 0.7, Box3D(30, 0, 0, 4, 2, 1.5, 0))};
  EXPECT_EQ(positive_proposal(props, target), 1);
  props.erase(props.begin(), props.begin() + 2);
  EXPECT_FALSE(positive_proposal(props, target).has_value());
}

TEST(ReferenceSelect, Modes) {
  Rng rng(1);
  const Box3D a(1, 0, 0, 1, 1, 1, 0), b(5, 0, 0, 1, 1, 1, 0), c(9, 0, 0, 1, 1, 1, 0);
  const std::vector<SceneObject> one_gt{{a, Category::car}};
  const std::vector<Proposal> props{proposal({}, 0.3, a), proposal({}, 0.9, b), proposal({}, 0.9, c)};
  for (int i = 0; i < 10; ++i) EXPECT_EQ(reference_select(ReferenceMode::gt_rand, one_gt, props, rng), a);
  EXPECT_EQ(reference_select(ReferenceMode::pred_best, one_gt, props, rng), b);  // tie -> lowest index
  const std::vector<Proposal> single{proposal({}, 0.9, c)};
  EXPECT_EQ(reference_select(ReferenceMode::pred_best, {}, single, rng), c);
  auto sequence = [&](std::uint64_t seed) {
    Rng r(seed);
    std::vector<double> xs;
    for (int i = 0; i < 20; ++i) xs.push_back(reference_select(ReferenceMode::pred_rand, {}, props, r).x);
    return xs;
  };
  EXPECT_EQ(sequence(7), sequence(7));
  const auto xs = sequence(7);
  EXPECT_EQ(std::set<double>(xs.begin(), xs.end()).size(), 3u);
  EXPECT_THROW(reference_select(ReferenceMode::gt_rand, {}, props, rng), std::invalid_argument);
  EXPECT_THROW(reference_select(ReferenceMode::pred_rand, one_gt, {}, rng), std::invalid_argument);
  EXPECT_EQ(parse_reference_mode("pred-best"), ReferenceMode::pred_best);
  EXPECT_FALSE(parse_reference_mode("oracle").has_value());
}

TEST(MatcherArchive, RoundTrip) {
  MatchHead head(4, 6, 8, 4, 5);
  TempDir dir("matcher");
  const EncoderSpec spec{"hash-test", 4, 3};
  save_match_head(dir.path() / "m.bin", head, spec);
  const auto loaded = load_match_head(dir.path() / "m.bin");
  EXPECT_EQ(loaded.encoder.seed, 3u);
  EXPECT_EQ(loaded.head->hidden(), 8);
  const std::vector<Proposal> props{proposal({1, 0, 0, 0, 0.5, 0}), proposal({0, 1, 0, 0, 0, 0.5})};
  EXPECT_EQ(match_scores(props, sentence({0.1, 0.2, 0.3, 0.4}), *loaded.head),
            match_scores(props, sentence({0.1, 0.2, 0.3, 0.4}), head));
}

TEST(Detector, DeterministicCappedAndValid) {
  SynthOptions so;
  so.n_scenes = 3;
  so.write_images = false;
  const auto corpus = synth_corpus(so);
  NoisyDetectorOptions opt;
  opt.seed = 4;
  for (const auto& sc : corpus.scenes) {
    const auto a = detect_scene(sc.scene, opt);
    EXPECT_EQ(to_json(a), to_json(detect_scene(sc.scene, opt)));
    EXPECT_EQ(a.frame_id, sc.scene.scene_id);
    for (const auto& p : a.proposals) {
      EXPECT_GE(p.score, 0.0);
      EXPECT_LE(p.score, 1.0);
      EXPECT_EQ(p.feature.size(), static_cast<std::size_t>(kProposalFeatureDim));
    }
    ProposalFrame capped = a;
    cap_proposals(capped, 2);
    ASSERT_EQ(capped.proposals.size(), 2u);
    EXPECT_GE(capped.proposals[0].score, capped.proposals[1].score);
    EXPECT_EQ(to_json(proposal_frame_from_json(to_json(a))), to_json(a));
  }
}

}  // namespace
}  // namespace bevg
