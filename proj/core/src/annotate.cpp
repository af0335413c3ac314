// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include "bevg/annotate.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <unordered_map>

#include "bevg/image.hpp"
#include "bevg/random.hpp"

namespace bevg {

void AnnotationJob::validate() const {
  if (!(sampling_rate > 0.0 && sampling_rate <= 1.0)) {
    throw std::invalid_argument("sampling_rate must be in (0, 1]");
  }
  if (prompt_templates.empty()) throw std::invalid_argument("prompt_templates must not be empty");
  for (const auto& t : prompt_templates) {
    if (t.empty()) throw std::invalid_argument("prompt_templates must not contain empty strings");
  }
}

SampleResult sample_and_filter(std::span<const AnnotationFrame> frames, double rate, std::uint64_t seed) {
  if (!(rate > 0.0 && rate <= 1.0)) throw std::invalid_argument("sampling rate must be in (0, 1]");
  const std::size_t n = frames.size();
  // The epsilon keeps products like 0.2 * 100 at 20.
  const auto take = std::min(n, static_cast<std::size_t>(std::ceil(rate * static_cast<double>(n) - 1e-9)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix64(seed ^ 0x53414d504c45ULL));
  rng.shuffle(order);
  SampleResult out;
  out.sampled.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take));
  std::sort(out.sampled.begin(), out.sampled.end());
  for (std::size_t i : out.sampled) {
    const auto& f = frames[i];
    const auto view = viewpoint_of(f.sample.referred);
    const auto& cam = f.scene.cameras[static_cast<std::size_t>(view)];
    (box_fully_visible(cam, f.sample.referred) ? out.kept : out.filtered).push_back(i);
  }
  return out;
}

std::string sector_prefix(Viewpoint v, std::uint64_t seed) {
  const std::string_view pattern = kSectorPrefixes[mix64(seed) % kSectorPrefixes.size()];
  const auto slot = pattern.find("{}");
  std::string out(pattern.substr(0, slot));
  out += viewpoint_phrase(v);
  out += pattern.substr(slot + 2);
  return out;
}

namespace {

// Color tag of the scene object at the referred box, if the scene lists one.
std::optional<Color> referred_color(const AnnotationFrame& f) {
  const SceneObjectInfo* best = nullptr;
  double best_d = 0.25;
  for (const auto& o : f.scene.objects) {
    const double d = std::hypot(o.box.x - f.sample.referred.x, o.box.y - f.sample.referred.y);
    if (d < best_d) {
      best_d = d;
      best = &o;
    }
  }
  if (!best) return std::nullopt;
  return best->color;
}

}  // namespace

FMRequest caption_request(const AnnotationFrame& frame, const Raster& view_image) {
  const auto view = viewpoint_of(frame.sample.referred);
  Raster marked = view_image;
  draw_box_outline(marked, frame.scene.cameras[static_cast<std::size_t>(view)], frame.sample.referred,
                   Rgb{255, 0, 0});
  FMRequest req;
  req.prompt = std::string(kCaptionerPrompt);
  req.image_png = encode_png(marked);
  nlohmann::json ctx;
  ctx["category"] = std::string(category_phrase(frame.sample.category));
  ctx["sector"] = std::string(viewpoint_phrase(view));
  ctx["range"] = std::hypot(frame.sample.referred.x, frame.sample.referred.y);
  if (const auto c = referred_color(frame)) ctx["color"] = std::string(color_name(*c));
  req.mock_context = std::move(ctx);
  return req;
}

FMRequest paraphrase_request(const std::string& description, std::size_t template_index,
                             std::span<const std::string> templates) {
  const bool blank = std::all_of(description.begin(), description.end(),
                                 [](unsigned char c) { return std::isspace(c) != 0; });
  if (blank) throw std::invalid_argument("empty description");
  if (templates.empty()) throw std::invalid_argument("no paraphrase templates");
  FMRequest req;
  req.prompt = templates[template_index % templates.size()] + "\n" + description;
  return req;
}

nlohmann::json to_json(const FailureRecord& f) {
  return {{"sample_id", f.sample_id}, {"stage", f.stage}, {"attempts", f.attempts}, {"errors", f.errors}};
}

nlohmann::json to_json(const ReviewItem& r) {
  return {{"sample_id", r.sample_id},
          {"image_ref", r.image_ref},
          {"caption", r.caption},
          {"paraphrase", r.paraphrase},
          {"prompt", r.prompt}};
}

ImageLoader directory_image_loader(std::filesystem::path root) {
  return [root = std::move(root)](const AnnotationFrame& f) {
    const auto view = static_cast<std::size_t>(viewpoint_of(f.sample.referred));
    const auto path = root / f.sample.image_refs[view];
    if (!f.sample.image_refs[view].empty() && std::filesystem::exists(path)) return read_png(path);
    std::vector<ColoredBox> boxes;
    for (const auto& o : f.scene.objects) boxes.push_back({o.box, o.color});
    return render_view(f.scene.cameras[view], boxes);
  };
}

namespace {

struct JobResult {
  std::optional<GroundingSample> sample;
  std::optional<FailureRecord> failure;
  ReviewItem review;
};

JobResult annotate_one(const AnnotationFrame& f, std::size_t ordinal, const AnnotationJob& job,
                       FMClient& captioner, FMClient& paraphraser, const ImageLoader& images,
                       const RetryPolicy& retry) {
  JobResult r;
  const auto view = viewpoint_of(f.sample.referred);
  r.review.sample_id = f.sample.sample_id;
  r.review.image_ref = f.sample.image_refs[static_cast<std::size_t>(view)];
  auto fail = [&](std::string stage, int attempts, std::vector<std::string> errors) {
    r.failure = FailureRecord{f.sample.sample_id, std::move(stage), attempts, std::move(errors)};
    return r;
  };

  FMRequest creq;
  try {
    creq = caption_request(f, images(f));
  } catch (const std::exception& e) {
    return fail("image", 0, {e.what()});
  }
  const auto caption = call_with_retries(captioner, creq, retry);
  if (!caption.text) return fail("caption", caption.attempts, caption.errors);
  r.review.caption = *caption.text;

  FMRequest preq;
  try {
    preq = paraphrase_request(*caption.text, static_cast<std::size_t>((job.seed + ordinal) % job.prompt_templates.size()),
                              job.prompt_templates);
  } catch (const std::invalid_argument& e) {
    return fail("paraphrase", 0, {e.what()});
  }
  const auto para = call_with_retries(paraphraser, preq, retry);
  if (!para.text) return fail("paraphrase", para.attempts, para.errors);
  r.review.paraphrase = *para.text;

  GroundingSample s = f.sample;
  s.viewpoint = view;
  s.prompt = sector_prefix(view, job.seed ^ fnv1a64(s.sample_id)) + " " + *para.text;
  r.review.prompt = s.prompt;
  // Round trip through the schema so malformed records never reach the output.
  r.sample = sample_from_json(to_json(s));
  return r;
}

}  // namespace

AnnotationOutput run_annotation(const AnnotationJob& job, FMClient& captioner, FMClient& paraphraser,
                                const ImageLoader& images, const AnnotateOptions& options) {
  job.validate();
  if (captioner.kind() != ClientKind::captioner || paraphraser.kind() != ClientKind::paraphraser) {
    throw std::invalid_argument("run_annotation: client kinds do not match their roles");
  }
  const auto sel = sample_and_filter(job.frames, job.sampling_rate, job.seed);
  AnnotationOutput out;
  out.sampled = sel.sampled.size();
  out.filtered = sel.filtered.size();

  std::vector<JobResult> results(sel.kept.size());
  const std::size_t wave = static_cast<std::size_t>(std::max(1, options.max_in_flight));
  for (std::size_t start = 0; start < sel.kept.size(); start += wave) {
    const std::size_t end = std::min(sel.kept.size(), start + wave);
    if (end - start == 1) {
      results[start] = annotate_one(job.frames[sel.kept[start]], start, job, captioner, paraphraser, images,
                                    options.retry);
      continue;
    }
    std::vector<std::future<JobResult>> inflight;
    for (std::size_t k = start; k < end; ++k) {
      inflight.push_back(std::async(std::launch::async, [&, k] {
        return annotate_one(job.frames[sel.kept[k]], k, job, captioner, paraphraser, images, options.retry);
      }));
    }
    for (std::size_t k = start; k < end; ++k) results[k] = inflight[k - start].get();
  }

  for (auto& r : results) {
    if (r.sample) {
      out.samples.push_back(std::move(*r.sample));
      out.review_queue.push_back(std::move(r.review));
    } else {
      out.failures.push_back(std::move(*r.failure));
    }
  }
  auto by_id = [](const auto& a, const auto& b) { return a.sample_id < b.sample_id; };
  std::stable_sort(out.samples.begin(), out.samples.end(), by_id);
  std::stable_sort(out.failures.begin(), out.failures.end(), by_id);
  std::stable_sort(out.review_queue.begin(), out.review_queue.end(), by_id);
  return out;
}

void write_annotation(const AnnotationOutput& out, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_samples(dir / "samples.jsonl", out.samples);
  std::vector<nlohmann::json> rows;
  for (const auto& f : out.failures) rows.push_back(to_json(f));
  write_jsonl(dir / "failures.jsonl", rows);
  rows.clear();
  for (const auto& r : out.review_queue) rows.push_back(to_json(r));
  write_jsonl(dir / "review_queue.jsonl", rows);
}

std::vector<AnnotationFrame> load_annotation_frames(const std::filesystem::path& corpus_dir) {
  const auto samples = read_samples(corpus_dir / "samples.jsonl");
  const auto scenes = read_scenes(corpus_dir / "scenes.jsonl");
  std::unordered_map<std::string, const SceneRecord*> by_id;
  for (const auto& s : scenes) by_id[s.scene_id] = &s;
  std::vector<AnnotationFrame> out;
  for (const auto& s : samples) {
    const auto it = by_id.find(s.scene_id);
    if (it == by_id.end()) throw IntegrityError("sample " + s.sample_id + " references unknown scene " + s.scene_id);
    out.push_back({s, *it->second});
  }
  return out;
}

}  // namespace bevg
