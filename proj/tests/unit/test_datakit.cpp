// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bevg/datakit.hpp"
#include "bevg/image.hpp"
#include "bevg/textenc.hpp"
#include "test_support.hpp"

namespace bevg {
namespace {

using testing::data_dir;
using testing::TempDir;

PreprocessResult run_fixture() {
  std::ifstream in(data_dir() / "preprocess_fixture.jsonl");
  return preprocess_jsonl(in);
}

TEST(Preprocess, FixtureSurvivorsAndReasons) {
  const auto expected = nlohmann::json::parse(std::ifstream(data_dir() / "preprocess_fixture_expected.json"));
  const auto r = run_fixture();
  ASSERT_EQ(r.samples.size(), expected["survivors"].size());
  for (const auto& s : r.samples) {
    ASSERT_TRUE(expected["survivors"].contains(s.sample_id)) << s.sample_id;
    EXPECT_EQ(attribute_name(s.attribute), expected["survivors"][s.sample_id].get<std::string>()) << s.sample_id;
  }
  ASSERT_EQ(r.rejected.size(), expected["rejected"].size());
  for (const auto& d : r.rejected) {
    EXPECT_EQ(d.reason, expected["rejected"][d.sample_id].get<std::string>()) << d.sample_id;
  }
  EXPECT_EQ(r.malformed, 0u);
  EXPECT_EQ(r.dropped_by_reason.at("out_of_range"), 3u);
  EXPECT_EQ(r.dropped_by_reason.at("too_few_points"), 2u);
  EXPECT_EQ(r.dropped_by_reason.at("unmapped_category"), 1u);
}

TEST(Preprocess, OutOfRangeSceneBoxesAreDropped) {
  const auto r = run_fixture();
  for (const auto& s : r.samples) {
    if (s.sample_id != "fx09") continue;
    ASSERT_EQ(s.scene_boxes.size(), 1u);
    EXPECT_EQ(s.scene_boxes[0].box, s.referred);
  }
}

TEST(Preprocess, IdempotentOnItsOwnOutput) {
  // Output records carry no point counts; with the point filter off they
  // need no point cloud.
  PreprocessOptions no_points;
  no_points.min_points = 0;
  std::ifstream in(data_dir() / "preprocess_fixture.jsonl");
  const auto first = preprocess_jsonl(in, no_points);
  std::vector<RawRecord> raw;
  for (const auto& s : first.samples) raw.push_back(to_raw(s));
  const auto second = preprocess(raw, no_points);
  EXPECT_EQ(second.samples, first.samples);
  EXPECT_TRUE(second.rejected.empty());
}

TEST(Preprocess, IdempotentWithPointCloudsOnDisk) {
  SynthOptions so;
  so.n_scenes = 6;
  so.write_images = false;
  TempDir dir("idem");
  const auto corpus = synth_corpus(so);
  write_corpus(corpus, dir.path(), false);
  std::vector<RawRecord> raw;
  for (const auto& s : corpus.all_samples()) raw.push_back(to_raw(s));
  PreprocessOptions opt;
  opt.min_points = 5;
  const auto first = preprocess(raw, opt, directory_loader(dir.path()));
  ASSERT_FALSE(first.samples.empty());
  raw.clear();
  for (const auto& s : first.samples) raw.push_back(to_raw(s));
  const auto second = preprocess(raw, opt, directory_loader(dir.path()));
  EXPECT_EQ(second.samples, first.samples);
  EXPECT_TRUE(second.rejected.empty());
}

TEST(Preprocess, FilterOrderDecidesTheReason) {
  RawRecord r;
  r.sample_id = "both";
  r.prompt = "the cat far away";
  r.referred = {Box3D(80, 0, -1, 1, 1, 1, 0), "animal", 100};
  PreprocessOptions opt;
  EXPECT_EQ(preprocess(std::span(&r, 1), opt).rejected.at(0).reason, "unmapped_category");
  opt.order = {FilterKind::range, FilterKind::category, FilterKind::points};
  EXPECT_EQ(preprocess(std::span(&r, 1), opt).rejected.at(0).reason, "out_of_range");
}

TEST(Preprocess, MalformedLinesBecomeDiagnostics) {
  std::istringstream in("not json\n\n{\"sample_id\": \"x\"}\n");
  const auto r = preprocess_jsonl(in);
  EXPECT_TRUE(r.samples.empty());
  EXPECT_EQ(r.malformed, 2u);
  EXPECT_EQ(r.dropped_by_reason.at("malformed"), 2u);
  EXPECT_EQ(r.rejected.at(0).record_index, 1u);
  EXPECT_EQ(r.rejected.at(1).record_index, 3u);
}

TEST(Preprocess, PointCountsFromLoader) {
  RawRecord r;
  r.sample_id = "pc";
  r.prompt = "the car";
  r.lidar_ref = "cloud";
  r.referred = {Box3D(5, 0, 0, 2, 2, 2, 0), "car", std::nullopt};
  PointCloudFrame inside;
  inside.points = {{5.0f, 0.0f, 0.0f, 0.0f}, {5.5f, 0.5f, 0.5f, 0.0f}};
  PreprocessOptions opt;
  opt.min_points = 2;
  auto loader = [&](const std::string&) { return inside; };
  EXPECT_EQ(preprocess(std::span(&r, 1), opt, loader).samples.size(), 1u);
  opt.min_points = 3;
  EXPECT_EQ(preprocess(std::span(&r, 1), opt, loader).rejected.at(0).reason, "too_few_points");
}

TEST(Attribute, UniqueIffNoOtherBoxSharesCategory) {
  const Box3D a(1, 1, 0, 4, 2, 1.5, 0), b(9, 1, 0, 4, 2, 1.5, 0);
  const std::vector<SceneObject> two_cars{{a, Category::car}, {b, Category::car}};
  const std::vector<SceneObject> car_truck{{a, Category::car}, {b, Category::truck}};
  EXPECT_EQ(label_attribute(a, Category::car, two_cars), Attribute::multiple);
  EXPECT_EQ(label_attribute(a, Category::car, car_truck), Attribute::unique);
  EXPECT_THROW(label_attribute(a, Category::truck, car_truck), IntegrityError);
}

TEST(Split, SceneLevelAndDeterministic) {
  SynthOptions so;
  so.n_scenes = 30;
  so.write_images = false;
  const auto samples = synth_corpus(so).all_samples();
  const auto m = make_split(samples, 0.2, 5);
  EXPECT_EQ(to_json(m), to_json(make_split(samples, 0.2, 5)));
  EXPECT_EQ(m.train.size() + m.test.size(), samples.size());
  std::map<std::string, std::string> scene_of;
  for (const auto& s : samples) scene_of[s.sample_id] = s.scene_id;
  std::set<std::string> train_scenes, test_scenes;
  for (const auto& id : m.train) train_scenes.insert(scene_of[id]);
  for (const auto& id : m.test) test_scenes.insert(scene_of[id]);
  EXPECT_EQ(test_scenes.size(), 6u);
  for (const auto& s : test_scenes) EXPECT_FALSE(train_scenes.count(s));
  EXPECT_THROW(make_split(samples, 1.5, 0), std::invalid_argument);
}

TEST(Serialization, SampleRoundTrip) {
  SynthOptions so;
  so.n_scenes = 3;
  so.write_images = false;
  for (const auto& s : synth_corpus(so).all_samples()) EXPECT_EQ(sample_from_json(to_json(s)), s);
  EXPECT_THROW(box_from_json(nlohmann::json{{"x", 0}}), std::exception);
}

TEST(Serialization, PointCloudRoundTrip) {
  PointCloudFrame f;
  f.points = {{1.5f, -2.0f, 0.25f, 0.5f}, {3.0f, 4.0f, -1.0f, 1.0f}};
  const auto bytes = encode_point_cloud(f);
  EXPECT_EQ(bytes.size(), 32u);
  const auto back = decode_point_cloud(bytes);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.points[1].y, 4.0f);
  std::vector<std::uint8_t> five(40, 0);
  EXPECT_EQ(decode_point_cloud(five, 5).size(), 2u);
  EXPECT_THROW(decode_point_cloud(std::vector<std::uint8_t>(10, 0)), std::exception);
  TempDir dir("pc");
  write_point_cloud(dir.path() / "a.bin", f);
  EXPECT_EQ(read_point_cloud(dir.path() / "a.bin").points[0].x, 1.5f);
}

TEST(Synth, DeterministicBySeed) {
  SynthOptions so;
  so.n_scenes = 4;
  so.seed = 3;
  const auto a = synth_corpus(so);
  const auto b = synth_corpus(so);
  ASSERT_EQ(a.scenes.size(), b.scenes.size());
  for (std::size_t i = 0; i < a.scenes.size(); ++i) {
    EXPECT_EQ(a.scenes[i].samples, b.scenes[i].samples);
    EXPECT_EQ(encode_point_cloud(a.scenes[i].cloud), encode_point_cloud(b.scenes[i].cloud));
    EXPECT_EQ(encode_png(a.scenes[i].images[0]), encode_png(b.scenes[i].images[0]));
  }
  so.seed = 4;
  EXPECT_NE(synth_corpus(so).all_samples(), a.all_samples());
}

TEST(Synth, PromptsResolveToTheirReferent) {
  SynthOptions so;
  so.n_scenes = 40;
  so.write_images = false;
  std::size_t n = 0;
  for (const auto& sc : synth_corpus(so).scenes) {
    for (const auto& s : sc.samples) {
      const auto idx = resolve_template_prompt(s.prompt, sc.scene.objects);
      ASSERT_TRUE(idx.has_value()) << s.prompt;
      EXPECT_EQ(sc.scene.objects[*idx].box, s.referred) << s.prompt;
      EXPECT_EQ(s.viewpoint, viewpoint_of(s.referred));
      EXPECT_EQ(s.attribute, label_attribute(s));
      ++n;
    }
  }
  EXPECT_GT(n, 80u);
}

TEST(Synth, ObjectsHavePoints) {
  SynthOptions so;
  so.n_scenes = 5;
  so.write_images = false;
  for (const auto& sc : synth_corpus(so).scenes) {
    for (const auto& o : sc.scene.objects) EXPECT_GE(points_in_box(sc.cloud, o.box), 1u);
  }
}

TEST(Synth, WriteCorpusLayout) {
  SynthOptions so;
  so.n_scenes = 2;
  so.image_width = 32;
  so.image_height = 18;
  const auto c = synth_corpus(so);
  TempDir dir("corpus");
  write_corpus(c, dir.path());
  EXPECT_EQ(read_samples(dir.path() / "samples.jsonl"), c.all_samples());
  const auto scenes = read_scenes(dir.path() / "scenes.jsonl");
  ASSERT_EQ(scenes.size(), 2u);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / scenes[0].lidar_ref));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / scenes[0].image_refs[5]));
}

TEST(Stats, CountsAndDistances) {
  const auto r = run_fixture();
  const auto st = corpus_stats(r.samples);
  EXPECT_EQ(st.num_samples, 4u);
  EXPECT_EQ(st.num_scenes, 4u);
  EXPECT_EQ(st.attribute_counts.at("unique"), 3u);
  EXPECT_EQ(st.attribute_counts.at("multiple"), 1u);
  EXPECT_EQ(st.category_histogram.at("car"), 2u);
  EXPECT_GT(st.mean_distance.at("overall"), 0.0);
  std::size_t the = 0;
  for (const auto& s : r.samples) {
    for (const auto& t : tokenize(s.prompt)) the += t == "the";
  }
  EXPECT_EQ(st.vocabulary.at("the"), the);
  EXPECT_THROW(corpus_stats({}), std::invalid_argument);
}

}  // namespace
}  // namespace bevg
