// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bevg/datakit.hpp"

namespace bevg {

struct EvalRecord {
  std::string sample_id;
  Box3D predicted;
  Box3D gt;
  Attribute attribute = Attribute::unique;
};

enum class IouKind { bev, iou3d };
std::string_view iou_kind_name(IouKind k);
std::optional<IouKind> parse_iou_kind(std::string_view name);  // "bev" | "3d"

inline constexpr std::array<double, 2> kDefaultThresholds{0.25, 0.5};

double record_iou(const EvalRecord& r, IouKind kind);

/// Fraction of records with IoU >= threshold. Throws on an empty set.
double accuracy(std::span<const EvalRecord> records, IouKind kind, double threshold);

struct GroupResult {
  std::size_t count = 0;
  // acc[kind][threshold index]
  std::map<IouKind, std::vector<double>> acc;
};

struct EvalReport {
  std::vector<IouKind> kinds;
  std::vector<double> thresholds;
  std::map<std::string, GroupResult> groups;  // "unique", "multiple", "overall"; absent groups omitted
};

EvalReport report(std::span<const EvalRecord> records, std::span<const IouKind> kinds = {},
                  std::span<const double> thresholds = {});
/// Element-wise mean of reports over trials (same kinds, thresholds, groups).
EvalReport mean_report(std::span<const EvalReport> reports);

nlohmann::json to_json(const EvalReport& r);
/// Aligned text table: rows unique / multiple / overall, columns kind x threshold.
std::string format_report(const EvalReport& r);

struct PredictionRow {
  std::string sample_id;
  Box3D box;
  double confidence = 1.0;
};

nlohmann::json to_json(const PredictionRow& p);
PredictionRow prediction_from_json(const nlohmann::json& j);
std::vector<PredictionRow> read_predictions(const std::filesystem::path& path);
void write_predictions(const std::filesystem::path& path, std::span<const PredictionRow> rows);

/// Pairs predictions with ground truth by sample_id. Every ground-truth sample
/// needs exactly one prediction; throws std::runtime_error otherwise.
std::vector<EvalRecord> join_predictions(std::span<const PredictionRow> preds, std::span<const GroundingSample> gt);

}  // namespace bevg
