// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include <stdexcept>

#include "bevg/bev_train.hpp"
#include "bevg/nn/params.hpp"

namespace bevg {

namespace {

constexpr nn::Magic kMagic{'B', 'E', 'V', 'G', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

nn::NamedArray to_array(const std::string& name, const nn::Shape& shape, const std::vector<double>& v) {
  nn::NamedArray a{name, shape, {}};
  a.data.reserve(v.size());
  for (double x : v) a.data.push_back(static_cast<float>(x));
  return a;
}

}  // namespace

nlohmann::json to_json(const EncoderSpec& s) {
  return {{"name", s.name}, {"dim", s.dim}, {"seed", s.seed}, {"vocab_path", s.vocab_path.string()},
          {"trainable", s.trainable}};
}

EncoderSpec encoder_spec_from_json(const nlohmann::json& j) {
  EncoderSpec s;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "name") s.name = it->get<std::string>();
    else if (k == "dim") s.dim = it->get<int>();
    else if (k == "seed") s.seed = it->get<std::uint64_t>();
    else if (k == "vocab_path") s.vocab_path = it->get<std::string>();
    else if (k == "trainable") s.trainable = it->get<bool>();
    else throw std::invalid_argument("encoder config: unknown key '" + k + "'");
  }
  return s;
}

void save_checkpoint(const std::filesystem::path& path, const BevGroundingModel& model, const EncoderSpec& encoder,
                     Trainer* trainer, const nlohmann::json& extra) {
  nlohmann::json header;
  header["model"] = to_json(model.config());
  header["encoder"] = to_json(encoder);
  header["extra"] = extra;
  std::vector<nn::NamedArray> arrays;
  for (auto& a : nn::export_params(model.params())) {
    a.name = "param/" + a.name;
    arrays.push_back(std::move(a));
  }
  if (trainer) {
    header["train"] = to_json(trainer->config());
    header["state"] = to_json(trainer->state());
    header["adam_steps"] = trainer->optimizer().steps();
    for (const auto* p : model.params().all()) {
      const auto& m = trainer->optimizer().first_moments();
      const auto& v = trainer->optimizer().second_moments();
      if (auto it = m.find(p->name); it != m.end()) arrays.push_back(to_array("adam.m/" + p->name, p->shape, it->second));
      if (auto it = v.find(p->name); it != v.end()) arrays.push_back(to_array("adam.v/" + p->name, p->shape, it->second));
    }
  }
  nn::write_archive(path, kMagic, kVersion, std::move(header), arrays);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  auto archive = nn::read_archive(path, kMagic, kVersion);
  const auto& header = archive.header;

  LoadedCheckpoint out;
  out.meta.model = model_config_from_json(header.at("model"));
  out.meta.encoder = encoder_spec_from_json(header.at("encoder"));
  if (header.contains("extra")) out.meta.extra = header["extra"];
  if (header.contains("train")) out.meta.train = train_config_from_json(header["train"]);
  if (header.contains("state")) out.meta.state = train_state_from_json(header["state"]);
  out.adam_steps = header.value("adam_steps", std::int64_t{0});

  std::vector<nn::NamedArray> params;
  for (auto& a : archive.arrays) {
    auto widen = [](const nn::NamedArray& x) { return std::vector<double>(x.data.begin(), x.data.end()); };
    if (a.name.rfind("param/", 0) == 0) {
      params.push_back(std::move(a));
    } else if (a.name.rfind("adam.m/", 0) == 0) {
      out.adam_m[a.name.substr(7)] = widen(a);
    } else if (a.name.rfind("adam.v/", 0) == 0) {
      out.adam_v[a.name.substr(7)] = widen(a);
    } else {
      throw std::runtime_error("checkpoint: unexpected array " + a.name);
    }
  }
  out.model = std::make_unique<BevGroundingModel>(out.meta.model);
  nn::import_params(out.model->params(), params, "param/");
  return out;
}

void restore_trainer(Trainer& trainer, const LoadedCheckpoint& ckpt) {
  if (!ckpt.meta.state) throw std::runtime_error("checkpoint: no training state to resume from");
  trainer.optimizer().first_moments() = ckpt.adam_m;
  trainer.optimizer().second_moments() = ckpt.adam_v;
  trainer.optimizer().set_steps(ckpt.adam_steps);
  trainer.restore(*ckpt.meta.state);
}

}  // namespace bevg
