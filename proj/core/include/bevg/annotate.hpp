// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "bevg/datakit.hpp"
#include "bevg/fm_client.hpp"

namespace bevg {

/// Instruction sent with every captioning image.
inline constexpr std::string_view kCaptionerPrompt =
    "Attention: only need to focus on the object in the bounding box. Please use one or two sentences to "
    "describe the object in the red bounding box with greater detail, including its precise location, type, "
    "and color characteristics.";

/// Paraphrase instructions, cycled by seed.
inline constexpr std::array<std::string_view, 3> kParaphraseTemplates{
    "Please help me paraphrase this sentence while keeping its meaning.",
    "Please help me reword a sentence with richer vocabulary but keep its meaning.",
    "Help me reword a sentence, you should describe it in a different way.",
};

/// Viewpoint prefixes; {} is the sector phrase ("back right").
inline constexpr std::array<std::string_view, 2> kSectorPrefixes{"Be aware of the {}!", "Look out for the {}!"};

/// One candidate: a referred object in a frame, with the frame's ground truth.
struct AnnotationFrame {
  GroundingSample sample;
  SceneRecord scene;
};

struct AnnotationJob {
  std::vector<AnnotationFrame> frames;
  double sampling_rate = 0.2;
  std::vector<std::string> prompt_templates{kParaphraseTemplates.begin(), kParaphraseTemplates.end()};
  std::uint64_t seed = 0;

  void validate() const;
};

struct SampleResult {
  std::vector<std::size_t> sampled;   // indices into the input, in input order
  std::vector<std::size_t> kept;      // subset of `sampled` passing the completeness test
  std::vector<std::size_t> filtered;  // sampled but clipped by the image border
};

/// Seeded uniform sample of ceil(rate * N) frames, then drops frames whose
/// referred box is not fully inside the image of its viewpoint camera.
SampleResult sample_and_filter(std::span<const AnnotationFrame> frames, double rate, std::uint64_t seed);

/// Sector phrase prefix for a viewpoint; `seed` picks the wording.
std::string sector_prefix(Viewpoint v, std::uint64_t seed);

/// Request for the captioner: the fixed instruction plus the viewpoint image
/// with the referred box outlined in red.
FMRequest caption_request(const AnnotationFrame& frame, const Raster& view_image);
/// Request for the paraphraser: "<template>\n<description>". Throws
/// std::invalid_argument on an empty description.
FMRequest paraphrase_request(const std::string& description, std::size_t template_index,
                             std::span<const std::string> templates);

struct FailureRecord {
  std::string sample_id;
  std::string stage;  // "caption" | "paraphrase" | "image"
  int attempts = 0;
  std::vector<std::string> errors;
};
nlohmann::json to_json(const FailureRecord& f);

struct ReviewItem {
  std::string sample_id;
  std::string image_ref;
  std::string caption;
  std::string paraphrase;
  std::string prompt;
};
nlohmann::json to_json(const ReviewItem& r);

using ImageLoader = std::function<Raster(const AnnotationFrame&)>;
/// Loads image_refs[viewpoint] relative to `root`; renders the view from the
/// scene record when the file is absent.
ImageLoader directory_image_loader(std::filesystem::path root);

struct AnnotateOptions {
  RetryPolicy retry;
  int max_in_flight = 4;
};

struct AnnotationOutput {
  std::vector<GroundingSample> samples;  // sorted by sample_id
  std::vector<FailureRecord> failures;   // sorted by sample_id
  std::vector<ReviewItem> review_queue;  // one per emitted sample
  std::size_t sampled = 0;
  std::size_t filtered = 0;
};

AnnotationOutput run_annotation(const AnnotationJob& job, FMClient& captioner, FMClient& paraphraser,
                                const ImageLoader& images, const AnnotateOptions& options = {});

/// Writes samples.jsonl, failures.jsonl and review_queue.jsonl under `dir`.
void write_annotation(const AnnotationOutput& out, const std::filesystem::path& dir);

/// Frames from a synthetic corpus directory (samples.jsonl + scenes.jsonl).
std::vector<AnnotationFrame> load_annotation_frames(const std::filesystem::path& corpus_dir);

}  // namespace bevg
