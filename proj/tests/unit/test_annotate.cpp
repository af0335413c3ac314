// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>
#include <mutex>
#include <regex>
#include <sstream>

#include "bevg/annotate.hpp"
#include "bevg/camera.hpp"
#include "test_support.hpp"

namespace bevg {
namespace {

using testing::TempDir;

AnnotationFrame frame_with_box(const std::string& id, const Box3D& box) {
  AnnotationFrame f;
  f.sample.sample_id = id;
  f.sample.scene_id = id;
  f.sample.prompt = "placeholder";
  f.sample.referred = box;
  f.sample.scene_boxes = {{box, Category::car}};
  f.scene.scene_id = id;
  f.scene.cameras = make_camera_rig();
  f.scene.objects = {{box, Category::car, Color::red}};
  return f;
}

std::vector<AnnotationFrame> visible_frames(int n) {
  std::vector<AnnotationFrame> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(frame_with_box("f" + std::to_string(100 + i), Box3D(15.0 + 0.1 * i, 0, 0, 4, 2, 1.5, 0)));
  }
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RetryPolicy no_sleep(int retries = 2) {
  RetryPolicy r;
  r.max_retries = retries;
  r.sleep = [](std::chrono::duration<double>) {};
  return r;
}

TEST(SampleAndFilter, TwentyPercentOfHundred) {
  const auto frames = visible_frames(100);
  const auto r = sample_and_filter(frames, 0.2, 1);
  EXPECT_EQ(r.sampled.size(), 20u);
  EXPECT_TRUE(std::is_sorted(r.sampled.begin(), r.sampled.end()));
  EXPECT_EQ(r.kept, r.sampled);
  EXPECT_EQ(sample_and_filter(frames, 0.2, 1).sampled, r.sampled);
  EXPECT_NE(sample_and_filter(frames, 0.2, 2).sampled, r.sampled);
  EXPECT_EQ(sample_and_filter(frames, 0.013, 1).sampled.size(), 2u);  // ceil(1.3)
}

TEST(SampleAndFilter, FullRateIsIdentity) {
  const auto frames = visible_frames(7);
  const auto r = sample_and_filter(frames, 1.0, 9);
  EXPECT_EQ(r.sampled, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6}));
}

TEST(SampleAndFilter, ClippedBoxIsDiscarded) {
  // Front camera, 70 degree field of view. A 6 m wide box 3-5 m ahead has
  // corners at atan(3 / 3) = 45 degrees off-axis, beyond the 35 degree edge.
  std::vector<AnnotationFrame> frames{frame_with_box("a_visible", Box3D(20, 0, 0, 4, 2, 1.5, 0)),
                                      frame_with_box("b_clipped", Box3D(4, 0, 0, 2, 6, 1.5, 0))};
  const auto r = sample_and_filter(frames, 1.0, 0);
  EXPECT_EQ(r.kept, (std::vector<std::size_t>{0}));
  EXPECT_EQ(r.filtered, (std::vector<std::size_t>{1}));
}

TEST(CaptionRequest, PromptIsVerbatimOnTheWire) {
  const auto f = frame_with_box("x", Box3D(15, 0, 0, 4, 2, 1.5, 0));
  const Raster img = render_view(f.scene.cameras[0], {});
  const auto req = caption_request(f, img);
  const std::string body = request_body(req);
  const std::string expected =
      "Attention: only need to focus on the object in the bounding box. Please use one or two sentences to "
      "describe the object in the red bounding box with greater detail, including its precise location, type, "
      "and color characteristics.";
  EXPECT_NE(body.find(expected), std::string::npos);
  const auto j = nlohmann::json::parse(body);
  EXPECT_EQ(j["prompt"], expected);
  EXPECT_FALSE(j.contains("mock_context"));
  // The image is the viewpoint render with a red outline drawn on it.
  const Raster sent = decode_png(base64_decode(j["image"].get<std::string>()));
  int red = 0;
  for (int y = 0; y < sent.height(); ++y) {
    for (int x = 0; x < sent.width(); ++x) red += sent.at(x, y) == Rgb{255, 0, 0};
  }
  EXPECT_GT(red, 20);
}

TEST(Paraphrase, RequestFormatAndEmptyDescription) {
  const std::vector<std::string> templates(kParaphraseTemplates.begin(), kParaphraseTemplates.end());
  EXPECT_EQ(paraphrase_request("A red car.", 4, templates).prompt,
            "Please help me reword a sentence with richer vocabulary but keep its meaning.\nA red car.");
  EXPECT_THROW(paraphrase_request("", 0, templates), std::invalid_argument);
  EXPECT_THROW(paraphrase_request("  \n", 0, templates), std::invalid_argument);
}

TEST(Paraphrase, BackRightExamplePattern) {
  const std::string original = "A car is driving down the street at night.";
  const std::regex pattern(
      "(Be aware of|Look out for) the back right! A (automobile|vehicle) is (navigating|cruising along) the "
      "(boulevard|road|avenue) (under the cover of darkness|after dark)\\.");
  bool fixed_wording = false;
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    MockParaphraser mock(MockOptions{seed});
    const std::vector<std::string> templates{std::string(kParaphraseTemplates[0])};
    const std::string out = sector_prefix(Viewpoint::back_right, seed) + " " +
                            mock.complete(paraphrase_request(original, 0, templates));
    EXPECT_TRUE(std::regex_match(out, pattern)) << out;
    fixed_wording = fixed_wording ||
                    out == "Be aware of the back right! A automobile is navigating the boulevard under the cover "
                           "of darkness.";
    EXPECT_EQ(out, sector_prefix(Viewpoint::back_right, seed) + " " +
                       MockParaphraser(MockOptions{seed}).complete(paraphrase_request(original, 0, templates)));
  }
  EXPECT_TRUE(fixed_wording);
}

TEST(Synonyms, WordBoundariesAndCase) {
  EXPECT_EQ(substitute_synonyms("carpet scar", 0), "carpet scar");
  const std::string out = substitute_synonyms("Car, car.", 1);
  EXPECT_TRUE(std::regex_match(out, std::regex("(Automobile|Vehicle), (automobile|vehicle)\\."))) << out;
}

TEST(MockCaptioner, TemplateFromGroundTruth) {
  const auto f = frame_with_box("x", Box3D(15, 0, 0, 4, 2, 1.5, 0));
  MockCaptioner cap;
  const std::string text = cap.complete(caption_request(f, render_view(f.scene.cameras[0], {})));
  EXPECT_EQ(text, "A red car is in the front of the scene, about 15 meters away.");
}

TEST(Retries, BackoffDoublesAndErrorsAreKept) {
  MockCaptioner always_fails(MockOptions{0, 1.0});
  std::vector<double> waits;
  RetryPolicy p;
  p.max_retries = 3;
  p.backoff_initial_s = 0.5;
  p.sleep = [&](std::chrono::duration<double> d) { waits.push_back(d.count()); };
  const auto out = call_with_retries(always_fails, FMRequest{"hi", std::nullopt, {}}, p);
  EXPECT_FALSE(out.text.has_value());
  EXPECT_EQ(out.attempts, 4);
  EXPECT_EQ(out.errors.size(), 4u);
  EXPECT_EQ(waits, (std::vector<double>{0.5, 1.0, 2.0}));
}

class Pipeline : public ::testing::Test {
 protected:
  void SetUp() override {
    SynthOptions so;
    so.n_scenes = 40;
    so.seed = 2;
    so.write_images = false;
    write_corpus(synth_corpus(so), dir.path(), false);
    frames = load_annotation_frames(dir.path());
  }
  AnnotationOutput run(std::uint64_t seed, double rate, double failure_rate, int in_flight) {
    AnnotationJob job;
    job.frames = frames;
    job.sampling_rate = rate;
    job.seed = seed;
    MockCaptioner cap(MockOptions{seed, failure_rate});
    MockParaphraser para(MockOptions{seed, failure_rate});
    AnnotateOptions opt;
    opt.retry = no_sleep();
    opt.max_in_flight = in_flight;
    return run_annotation(job, cap, para, directory_image_loader(dir.path()), opt);
  }
  TempDir dir{"annotate"};
  std::vector<AnnotationFrame> frames;
};

TEST_F(Pipeline, FailureAccountingBalances) {
  const auto out = run(5, 1.0, 0.3, 4);
  EXPECT_EQ(out.sampled, frames.size());
  EXPECT_GT(out.filtered, 0u);
  EXPECT_GT(out.failures.size(), 0u);
  EXPECT_GT(out.samples.size(), 0u);
  EXPECT_EQ(out.samples.size(), out.sampled - out.filtered - out.failures.size());
  EXPECT_EQ(out.review_queue.size(), out.samples.size());
  for (const auto& f : out.failures) {
    EXPECT_EQ(f.attempts, 3);
    EXPECT_EQ(f.errors.size(), 3u);
  }
}

TEST_F(Pipeline, ByteDeterministicBySeed) {
  TempDir a("ann_a"), b("ann_b"), c("ann_c");
  write_annotation(run(3, 0.5, 0.2, 4), a.path());
  write_annotation(run(3, 0.5, 0.2, 1), b.path());
  write_annotation(run(4, 0.5, 0.2, 4), c.path());
  for (const char* name : {"samples.jsonl", "failures.jsonl", "review_queue.jsonl"}) {
    EXPECT_EQ(slurp(a.path() / name), slurp(b.path() / name)) << name;
  }
  EXPECT_NE(slurp(a.path() / "samples.jsonl"), slurp(c.path() / "samples.jsonl"));
}

TEST_F(Pipeline, EmittedRecordsValidate) {
  const auto out = run(1, 1.0, 0.0, 3);
  ASSERT_FALSE(out.samples.empty());
  EXPECT_TRUE(std::is_sorted(out.samples.begin(), out.samples.end(),
                             [](const auto& x, const auto& y) { return x.sample_id < y.sample_id; }));
  for (const auto& s : out.samples) {
    EXPECT_EQ(sample_from_json(to_json(s)), s);
    EXPECT_EQ(s.viewpoint, viewpoint_of(s.referred));
    const std::string phrase(viewpoint_phrase(s.viewpoint));
    EXPECT_TRUE(s.prompt.rfind("Be aware of the " + phrase + "!", 0) == 0 ||
                s.prompt.rfind("Look out for the " + phrase + "!", 0) == 0)
        << s.prompt;
  }
}

TEST(Job, Validation) {
  AnnotationJob job;
  job.sampling_rate = 0.0;
  EXPECT_THROW(job.validate(), std::invalid_argument);
  job.sampling_rate = 0.5;
  job.prompt_templates.clear();
  EXPECT_THROW(job.validate(), std::invalid_argument);
}

TEST(Wire, Base64RoundTrip) {
  const std::vector<std::uint8_t> bytes{0, 1, 2, 250, 251, 252, 253};
  EXPECT_EQ(base64_decode(base64_encode(bytes)), bytes);
  EXPECT_EQ(base64_encode({'M', 'a'}), "TWE=");
  EXPECT_EQ(parse_response_body(R"({"text": "hello"})"), "hello");
  EXPECT_THROW(parse_response_body(R"({"nope": 1})"), TransportError);
  EXPECT_THROW(parse_response_body("not json"), TransportError);
}

}  // namespace
}  // namespace bevg
