// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include "bevg/evalkit.hpp"

#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace bevg {

std::string_view iou_kind_name(IouKind k) { return k == IouKind::bev ? "bev" : "3d"; }

std::optional<IouKind> parse_iou_kind(std::string_view name) {
  if (name == "bev") return IouKind::bev;
  if (name == "3d") return IouKind::iou3d;
  return std::nullopt;
}

double record_iou(const EvalRecord& r, IouKind kind) {
  return kind == IouKind::bev ? bev_iou(r.predicted, r.gt) : iou_3d(r.predicted, r.gt);
}

double accuracy(std::span<const EvalRecord> records, IouKind kind, double threshold) {
  if (records.empty()) throw std::invalid_argument("accuracy: empty record set");
  std::size_t ok = 0;
  for (const auto& r : records) ok += record_iou(r, kind) >= threshold;
  return static_cast<double>(ok) / static_cast<double>(records.size());
}

EvalReport report(std::span<const EvalRecord> records, std::span<const IouKind> kinds,
                  std::span<const double> thresholds) {
  EvalReport rep;
  rep.kinds = kinds.empty() ? std::vector<IouKind>{IouKind::bev, IouKind::iou3d}
                            : std::vector<IouKind>(kinds.begin(), kinds.end());
  rep.thresholds = thresholds.empty() ? std::vector<double>(kDefaultThresholds.begin(), kDefaultThresholds.end())
                                      : std::vector<double>(thresholds.begin(), thresholds.end());
  if (records.empty()) return rep;

  // IoUs once per record; every group reads the same values.
  std::map<IouKind, std::vector<double>> ious;
  for (IouKind k : rep.kinds) {
    auto& v = ious[k];
    for (const auto& r : records) v.push_back(record_iou(r, k));
  }
  auto fill = [&](const std::string& name, auto&& member) {
    GroupResult g;
    for (std::size_t i = 0; i < records.size(); ++i) g.count += member(records[i]);
    if (g.count == 0) return;
    for (IouKind k : rep.kinds) {
      for (double t : rep.thresholds) {
        std::size_t ok = 0;
        for (std::size_t i = 0; i < records.size(); ++i) ok += member(records[i]) && ious[k][i] >= t;
        g.acc[k].push_back(static_cast<double>(ok) / static_cast<double>(g.count));
      }
    }
    rep.groups[name] = std::move(g);
  };
  fill("unique", [](const EvalRecord& r) { return r.attribute == Attribute::unique; });
  fill("multiple", [](const EvalRecord& r) { return r.attribute == Attribute::multiple; });
  fill("overall", [](const EvalRecord&) { return true; });
  return rep;
}

EvalReport mean_report(std::span<const EvalReport> reports) {
  if (reports.empty()) throw std::invalid_argument("mean_report: no reports");
  EvalReport out = reports[0];
  for (std::size_t i = 1; i < reports.size(); ++i) {
    const auto& r = reports[i];
    if (r.kinds != out.kinds || r.thresholds != out.thresholds || r.groups.size() != out.groups.size()) {
      throw std::invalid_argument("mean_report: reports have different layouts");
    }
    for (auto& [name, g] : out.groups) {
      const auto it = r.groups.find(name);
      if (it == r.groups.end()) throw std::invalid_argument("mean_report: group " + name + " missing in a trial");
      for (auto& [k, accs] : g.acc) {
        for (std::size_t t = 0; t < accs.size(); ++t) accs[t] += it->second.acc.at(k)[t];
      }
    }
  }
  const double n = static_cast<double>(reports.size());
  for (auto& [name, g] : out.groups) {
    for (auto& [k, accs] : g.acc) {
      for (double& a : accs) a /= n;
    }
  }
  return out;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["thresholds"] = r.thresholds;
  nlohmann::json kinds = nlohmann::json::array();
  for (IouKind k : r.kinds) kinds.push_back(std::string(iou_kind_name(k)));
  j["iou"] = kinds;
  nlohmann::json groups = nlohmann::json::object();
  for (const char* name : {"unique", "multiple", "overall"}) {
    const auto it = r.groups.find(name);
    if (it == r.groups.end()) {
      groups[name] = nullptr;
      continue;
    }
    nlohmann::json g;
    g["count"] = it->second.count;
    for (const auto& [k, accs] : it->second.acc) {
      nlohmann::json per = nlohmann::json::object();
      for (std::size_t t = 0; t < accs.size(); ++t) {
        std::ostringstream key;
        key << "acc@" << r.thresholds[t];
        per[key.str()] = accs[t];
      }
      g[std::string(iou_kind_name(k))] = per;
    }
    groups[name] = g;
  }
  j["groups"] = groups;
  return j;
}

std::string format_report(const EvalReport& r) {
  std::ostringstream os;
  os << std::left << std::setw(10) << "group" << std::right << std::setw(7) << "n";
  for (IouKind k : r.kinds) {
    for (double t : r.thresholds) {
      std::ostringstream h;
      h << (k == IouKind::bev ? "BEV" : "3D") << "@" << t;
      os << std::setw(11) << h.str();
    }
  }
  os << '\n';
  for (const char* name : {"unique", "multiple", "overall"}) {
    os << std::left << std::setw(10) << name << std::right;
    const auto it = r.groups.find(name);
    if (it == r.groups.end()) {
      os << std::setw(7) << 0 << "  (absent)\n";
      continue;
    }
    os << std::setw(7) << it->second.count;
    for (IouKind k : r.kinds) {
      for (double a : it->second.acc.at(k)) os << std::setw(11) << std::fixed << std::setprecision(2) << 100.0 * a;
    }
    os << '\n';
  }
  return os.str();
}

nlohmann::json to_json(const PredictionRow& p) {
  return {{"sample_id", p.sample_id}, {"box", to_json(p.box)}, {"confidence", p.confidence}};
}

PredictionRow prediction_from_json(const nlohmann::json& j) {
  PredictionRow p;
  p.sample_id = j.at("sample_id").get<std::string>();
  p.box = box_from_json(j.at("box"));
  p.confidence = j.value("confidence", 1.0);
  return p;
}

std::vector<PredictionRow> read_predictions(const std::filesystem::path& path) {
  std::vector<PredictionRow> out;
  for (const auto& j : read_jsonl(path)) out.push_back(prediction_from_json(j));
  return out;
}

void write_predictions(const std::filesystem::path& path, std::span<const PredictionRow> rows) {
  std::vector<nlohmann::json> js;
  for (const auto& r : rows) js.push_back(to_json(r));
  write_jsonl(path, js);
}

std::vector<EvalRecord> join_predictions(std::span<const PredictionRow> preds, std::span<const GroundingSample> gt) {
  std::unordered_map<std::string, const PredictionRow*> by_id;
  for (const auto& p : preds) {
    if (!by_id.emplace(p.sample_id, &p).second) {
      throw std::runtime_error("duplicate prediction for sample " + p.sample_id);
    }
  }
  std::vector<EvalRecord> out;
  for (const auto& s : gt) {
    const auto it = by_id.find(s.sample_id);
    if (it == by_id.end()) throw std::runtime_error("no prediction for sample " + s.sample_id);
    out.push_back({s.sample_id, it->second->box, s.referred, s.attribute});
  }
  return out;
}

}  // namespace bevg
