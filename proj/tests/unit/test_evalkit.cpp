// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "bevg/evalkit.hpp"
#include "test_support.hpp"

namespace bevg {
namespace {

using testing::TempDir;

/// Pair of 2 x 1 boxes shifted along x so that their IoU equals `iou`:
/// (2 - s) / (2 + s) = iou.
EvalRecord record_with_iou(const std::string& id, double iou, Attribute attr) {
  const double s = 2.0 * (1.0 - iou) / (1.0 + iou);
  return {id, Box3D(s, 0, 0, 2, 1, 1, 0), Box3D(0, 0, 0, 2, 1, 1, 0), attr};
}

std::vector<EvalRecord> hand_fixture() {
  return {record_with_iou("a", 0.1, Attribute::unique), record_with_iou("b", 0.3, Attribute::unique),
          record_with_iou("c", 0.6, Attribute::multiple), record_with_iou("d", 0.9, Attribute::unique)};
}

TEST(Accuracy, HandFixture) {
  const auto recs = hand_fixture();
  EXPECT_NEAR(record_iou(recs[0], IouKind::bev), 0.1, 1e-9);
  EXPECT_NEAR(record_iou(recs[2], IouKind::iou3d), 0.6, 1e-9);
  EXPECT_EQ(accuracy(recs, IouKind::bev, 0.25), 0.75);
  EXPECT_EQ(accuracy(recs, IouKind::bev, 0.5), 0.5);
  EXPECT_EQ(accuracy(recs, IouKind::iou3d, 0.25), 0.75);
  EXPECT_THROW(accuracy({}, IouKind::bev, 0.25), std::invalid_argument);
}

TEST(Accuracy, ThresholdIsInclusive) {
  const std::vector<EvalRecord> same{{"x", Box3D(0, 0, 0, 2, 1, 1, 0), Box3D(0, 0, 0, 2, 1, 1, 0)}};
  EXPECT_EQ(accuracy(same, IouKind::bev, 1.0), 1.0);
}

TEST(Report, GroupsAndWeightedMean) {
  const auto rep = report(hand_fixture());
  ASSERT_EQ(rep.groups.size(), 3u);
  const auto& u = rep.groups.at("unique");
  const auto& m = rep.groups.at("multiple");
  const auto& o = rep.groups.at("overall");
  EXPECT_EQ(u.count, 3u);
  EXPECT_EQ(m.count, 1u);
  EXPECT_EQ(o.acc.at(IouKind::bev), (std::vector<double>{0.75, 0.5}));
  EXPECT_EQ(m.acc.at(IouKind::bev), (std::vector<double>{1.0, 1.0}));
  for (IouKind k : {IouKind::bev, IouKind::iou3d}) {
    for (std::size_t t = 0; t < 2; ++t) {
      EXPECT_EQ(o.acc.at(k)[t], (u.count * u.acc.at(k)[t] + m.count * m.acc.at(k)[t]) / o.count);
    }
  }
}

TEST(Report, WeightedMeanOnRandomSets) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<EvalRecord> recs;
    const int n = 1 + static_cast<int>(rng.index(40));
    for (int i = 0; i < n; ++i) {
      recs.push_back(record_with_iou(std::to_string(i), rng.uniform(0.0, 1.0),
                                     rng.bernoulli(0.5) ? Attribute::unique : Attribute::multiple));
    }
    const auto rep = report(recs);
    const auto& o = rep.groups.at("overall");
    for (std::size_t t = 0; t < 2; ++t) {
      double hits = 0.0;
      for (const char* g : {"unique", "multiple"}) {
        if (rep.groups.count(g)) hits += rep.groups.at(g).count * rep.groups.at(g).acc.at(IouKind::bev)[t];
      }
      EXPECT_NEAR(o.acc.at(IouKind::bev)[t], hits / o.count, 1e-12);
    }
  }
}

TEST(Report, AbsentGroupOmitted) {
  auto recs = hand_fixture();
  recs.erase(recs.begin() + 2);
  const auto rep = report(recs);
  EXPECT_FALSE(rep.groups.count("multiple"));
  const auto j = to_json(rep);
  EXPECT_TRUE(j["groups"]["multiple"].is_null());
  EXPECT_NE(format_report(rep).find("(absent)"), std::string::npos);
}

TEST(Report, JsonKeysAndCustomThresholds) {
  const std::vector<IouKind> kinds{IouKind::iou3d};
  const std::vector<double> thr{0.7};
  const auto rep = report(hand_fixture(), kinds, thr);
  EXPECT_EQ(rep.groups.at("overall").acc.at(IouKind::iou3d), (std::vector<double>{0.25}));
  const auto j = to_json(rep);
  EXPECT_DOUBLE_EQ(j["groups"]["overall"]["3d"]["acc@0.7"].get<double>(), 0.25);
}

TEST(Report, MeanOverTrials) {
  const auto a = report(hand_fixture());
  auto recs = hand_fixture();
  recs[0] = record_with_iou("a", 0.95, Attribute::unique);
  const auto b = report(recs);
  const std::vector<EvalReport> both{a, b};
  const auto mean = mean_report(both);
  EXPECT_DOUBLE_EQ(mean.groups.at("overall").acc.at(IouKind::bev)[0], (0.75 + 1.0) / 2);
  EXPECT_EQ(mean.groups.at("overall").count, 4u);
}

TEST(Predictions, RoundTripAndJoin) {
  const GroundingSample g1{.sample_id = "s1", .referred = Box3D(1, 0, 0, 2, 1, 1, 0)};
  const GroundingSample g2{.sample_id = "s2", .referred = Box3D(5, 0, 0, 2, 1, 1, 0),
                           .attribute = Attribute::multiple};
  const std::vector<GroundingSample> gt{g1, g2};
  std::vector<PredictionRow> preds{{"s2", Box3D(5, 0, 0, 2, 1, 1, 0), 0.4}, {"s1", Box3D(1, 0, 0, 2, 1, 1, 0), 0.9}};
  TempDir dir("preds");
  write_predictions(dir.path() / "p.jsonl", preds);
  const auto back = read_predictions(dir.path() / "p.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].box, preds[1].box);
  EXPECT_DOUBLE_EQ(back[0].confidence, 0.4);
  const auto recs = join_predictions(back, gt);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[1].attribute, Attribute::multiple);
  EXPECT_EQ(accuracy(recs, IouKind::bev, 0.5), 1.0);

  preds.pop_back();
  EXPECT_THROW(join_predictions(preds, gt), std::runtime_error);
  preds.push_back(preds[0]);
  EXPECT_THROW(join_predictions(preds, gt), std::runtime_error);
}

TEST(IouKindNames, Parse) {
  EXPECT_EQ(parse_iou_kind("bev"), IouKind::bev);
  EXPECT_EQ(parse_iou_kind("3d"), IouKind::iou3d);
  EXPECT_FALSE(parse_iou_kind("2d").has_value());
  EXPECT_EQ(iou_kind_name(IouKind::iou3d), "3d");
}

}  // namespace
}  // namespace bevg
