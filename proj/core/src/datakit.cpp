// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include "bevg/datakit.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <set>
#include <sstream>

#include "bevg/random.hpp"
#include "bevg/textenc.hpp"

namespace bevg {

namespace {

bool same_box(const Box3D& a, const Box3D& b) {
  constexpr double kTol = 1e-6;
  return std::abs(a.x - b.x) < kTol && std::abs(a.y - b.y) < kTol && std::abs(a.z - b.z) < kTol &&
         std::abs(a.l - b.l) < kTol && std::abs(a.w - b.w) < kTol && std::abs(a.h - b.h) < kTol &&
         std::abs(normalize_angle(a.alpha - b.alpha)) < kTol;
}

}  // namespace

Attribute label_attribute(const Box3D& referred, Category category,
                          std::span<const SceneObject> scene_boxes) {
  const bool present = std::any_of(scene_boxes.begin(), scene_boxes.end(), [&](const SceneObject& o) {
    return o.category == category && same_box(o.box, referred);
  });
  if (!present) throw IntegrityError("label_attribute: referred box is not among scene_boxes");
  const auto same_class = std::count_if(scene_boxes.begin(), scene_boxes.end(),
                                        [&](const SceneObject& o) { return o.category == category; });
  return same_class == 1 ? Attribute::unique : Attribute::multiple;
}

// ---------------------------------------------------------------------------

namespace {

struct ObjectCheck {
  std::optional<Category> category;
  bool in_range = false;
  std::optional<std::size_t> points;  // resolved lazily
};

const char* filter_reason(FilterKind k) {
  switch (k) {
    case FilterKind::category:
      return "unmapped_category";
    case FilterKind::range:
      return "out_of_range";
    case FilterKind::points:
      return "too_few_points";
  }
  return "filtered";
}

class RecordFilter {
 public:
  RecordFilter(const RawRecord& rec, const PreprocessOptions& opt, const PointCloudLoader& loader)
      : rec_(rec), opt_(opt), loader_(loader) {}

  /// First failing filter in the configured order, or nullopt when the object
  /// survives all three.
  std::optional<FilterKind> first_failure(const RawObject& obj) {
    for (FilterKind k : opt_.order) {
      if (!passes(obj, k)) return k;
    }
    return std::nullopt;
  }

 private:
  bool passes(const RawObject& obj, FilterKind k) {
    switch (k) {
      case FilterKind::category:
        return map_raw_category(obj.category).has_value();
      case FilterKind::range:
        return in_range(obj.box, opt_.range_lo, opt_.range_hi);
      case FilterKind::points:
        return opt_.min_points <= 0 || point_count(obj) >= static_cast<std::size_t>(opt_.min_points);
    }
    return false;
  }

  std::size_t point_count(const RawObject& obj) {
    if (obj.num_points) return static_cast<std::size_t>(*obj.num_points);
    if (!cloud_) {
      if (!loader_) {
        throw std::invalid_argument("record has no point counts and no point cloud loader was given");
      }
      if (rec_.lidar_ref.empty()) throw std::invalid_argument("record has no point counts and no lidar_ref");
      cloud_ = loader_(rec_.lidar_ref);
    }
    return points_in_box(*cloud_, obj.box);
  }

  const RawRecord& rec_;
  const PreprocessOptions& opt_;
  const PointCloudLoader& loader_;
  std::optional<PointCloudFrame> cloud_;
};

}  // namespace

PreprocessResult preprocess(std::span<const RawRecord> records, const PreprocessOptions& options,
                            const PointCloudLoader& loader) {
  PreprocessResult result;
  auto reject = [&](std::size_t idx, const std::string& id, const std::string& reason) {
    result.rejected.push_back({idx, id, reason});
    ++result.dropped_by_reason[reason];
  };
  for (std::size_t idx = 0; idx < records.size(); ++idx) {
    const RawRecord& rec = records[idx];
    try {
      if (rec.sample_id.empty()) throw std::invalid_argument("empty sample_id");
      if (rec.prompt.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw std::invalid_argument("empty prompt");
      }
      if (!rec.image_refs.empty() && rec.image_refs.size() != kNumCameras) {
        throw std::invalid_argument("expected 6 image_refs, got " + std::to_string(rec.image_refs.size()));
      }
      RecordFilter filter(rec, options, loader);
      if (auto fail = filter.first_failure(rec.referred)) {
        reject(idx, rec.sample_id, filter_reason(*fail));
        continue;
      }
      const Category referred_cat = *map_raw_category(rec.referred.category);

      GroundingSample s;
      s.sample_id = rec.sample_id;
      s.scene_id = rec.scene_id.empty() ? rec.sample_id : rec.scene_id;
      s.prompt = rec.prompt;
      s.lidar_ref = rec.lidar_ref;
      for (std::size_t i = 0; i < rec.image_refs.size(); ++i) s.image_refs[i] = rec.image_refs[i];
      s.referred = rec.referred.box;
      s.category = referred_cat;
      s.viewpoint = viewpoint_of(rec.referred.box);

      bool referred_listed = rec.scene_boxes.empty();
      for (const auto& obj : rec.scene_boxes) {
        const auto cat = map_raw_category(obj.category);
        if (cat == referred_cat && same_box(obj.box, rec.referred.box)) referred_listed = true;
        if (filter.first_failure(obj)) continue;
        s.scene_boxes.push_back({obj.box, *cat});
      }
      if (!referred_listed) throw IntegrityError("referred box missing from scene_boxes");
      if (rec.scene_boxes.empty()) s.scene_boxes.push_back({s.referred, s.category});
      s.attribute = label_attribute(s);
      result.samples.push_back(std::move(s));
    } catch (const std::exception& e) {
      ++result.malformed;
      reject(idx, rec.sample_id, std::string("malformed: ") + e.what());
    }
  }
  return result;
}

PreprocessResult preprocess_jsonl(std::istream& in, const PreprocessOptions& options,
                                  const PointCloudLoader& loader) {
  std::vector<RawRecord> records;
  std::vector<std::size_t> line_of;
  std::vector<Diagnostic> parse_errors;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(raw_from_json(nlohmann::json::parse(line)));
      line_of.push_back(lineno);
    } catch (const std::exception& e) {
      parse_errors.push_back({lineno, "", std::string("malformed: line ") + std::to_string(lineno) +
                                              ": " + e.what()});
    }
  }
  PreprocessResult result = preprocess(records, options, loader);
  for (auto& d : result.rejected) d.record_index = line_of[d.record_index];
  for (auto& d : parse_errors) {
    ++result.malformed;
    ++result.dropped_by_reason[d.reason.substr(0, d.reason.find(':'))];
    result.rejected.push_back(std::move(d));
  }
  std::stable_sort(result.rejected.begin(), result.rejected.end(),
                   [](const Diagnostic& a, const Diagnostic& b) { return a.record_index < b.record_index; });
  // Aggregate malformed reasons under one key so counts stay readable.
  std::map<std::string, std::size_t> merged;
  for (const auto& [reason, n] : result.dropped_by_reason) {
    merged[reason.rfind("malformed", 0) == 0 ? "malformed" : reason] += n;
  }
  result.dropped_by_reason = std::move(merged);
  return result;
}

RawRecord to_raw(const GroundingSample& s) {
  RawRecord r;
  r.sample_id = s.sample_id;
  r.scene_id = s.scene_id;
  r.prompt = s.prompt;
  r.lidar_ref = s.lidar_ref;
  r.image_refs.assign(s.image_refs.begin(), s.image_refs.end());
  r.referred = {s.referred, std::string(category_name(s.category)), std::nullopt};
  for (const auto& o : s.scene_boxes) {
    r.scene_boxes.push_back({o.box, std::string(category_name(o.category)), std::nullopt});
  }
  return r;
}

// ---------------------------------------------------------------------------

SplitManifest make_split(std::span<const GroundingSample> samples, double test_fraction,
                         std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) {
    throw std::invalid_argument("make_split: test_fraction must be in [0, 1]");
  }
  std::vector<std::string> scenes;
  std::set<std::string> seen;
  for (const auto& s : samples) {
    if (seen.insert(s.scene_id).second) scenes.push_back(s.scene_id);
  }
  Rng rng(seed);
  rng.shuffle(scenes);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * scenes.size()));
  const std::set<std::string> test_scenes(scenes.begin(), scenes.begin() + n_test);
  SplitManifest m;
  for (const auto& s : samples) {
    const bool is_test = test_scenes.count(s.scene_id) > 0;
    (is_test ? m.test : m.train).push_back(s.sample_id);
    ++(is_test ? m.test_counts : m.train_counts)[std::string(attribute_name(s.attribute))];
  }
  return m;
}

// ---------------------------------------------------------------------------

CorpusStats corpus_stats(std::span<const GroundingSample> samples) {
  if (samples.empty()) throw std::invalid_argument("corpus_stats: empty corpus");
  CorpusStats st;
  st.num_samples = samples.size();
  std::set<std::string> scenes;
  std::map<std::string, double> dist_sum;
  std::map<std::string, std::size_t> dist_n;
  std::size_t tokens_total = 0;
  for (const auto& s : samples) {
    scenes.insert(s.scene_id);
    const std::string attr(attribute_name(s.attribute));
    const std::string cat(category_name(s.category));
    ++st.attribute_counts[attr];
    ++st.category_histogram[cat];
    ++st.category_by_attribute[attr][cat];
    const double d = planar_range(s.referred);
    dist_sum[attr] += d;
    ++dist_n[attr];
    dist_sum["overall"] += d;
    ++dist_n["overall"];
    const auto tokens = tokenize(s.prompt);
    tokens_total += tokens.size();
    for (const auto& t : tokens) ++st.vocabulary[t];
  }
  st.num_scenes = scenes.size();
  st.prompts_per_scene = static_cast<double>(st.num_samples) / static_cast<double>(st.num_scenes);
  st.mean_prompt_length = static_cast<double>(tokens_total) / static_cast<double>(st.num_samples);
  for (const auto& [k, sum] : dist_sum) st.mean_distance[k] = sum / static_cast<double>(dist_n[k]);
  return st;
}

nlohmann::json to_json(const CorpusStats& st) {
  return nlohmann::json{{"num_samples", st.num_samples},
                        {"num_scenes", st.num_scenes},
                        {"prompts_per_scene", st.prompts_per_scene},
                        {"mean_prompt_length", st.mean_prompt_length},
                        {"attribute_counts", st.attribute_counts},
                        {"category_histogram", st.category_histogram},
                        {"category_by_attribute", st.category_by_attribute},
                        {"mean_distance", st.mean_distance},
                        {"vocabulary_size", st.vocabulary.size()},
                        {"vocabulary", st.vocabulary}};
}

std::string format_stats(const CorpusStats& st) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "samples            " << st.num_samples << '\n';
  os << "scenes             " << st.num_scenes << '\n';
  os << "prompts per scene  " << st.prompts_per_scene << '\n';
  os << "tokens per prompt  " << st.mean_prompt_length << '\n';
  os << "vocabulary size    " << st.vocabulary.size() << '\n';
  for (const auto& [attr, n] : st.attribute_counts) {
    os << "attribute " << std::left << std::setw(9) << attr << std::right << std::setw(8) << n
       << "   mean distance " << st.mean_distance.at(attr) << " m\n";
  }
  os << "mean distance (all) " << st.mean_distance.at("overall") << " m\n";
  os << "category histogram\n";
  for (Category c : kAllCategories) {
    const std::string name(category_name(c));
    const auto it = st.category_histogram.find(name);
    const std::size_t n = it == st.category_histogram.end() ? 0 : it->second;
    os << "  " << std::left << std::setw(22) << name << std::right << std::setw(8) << n << '\n';
  }
  return os.str();
}

}  // namespace bevg
