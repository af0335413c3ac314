// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <vector>

#include "bevg/bev_model.hpp"
#include "bevg/datakit.hpp"
#include "bevg/geometry.hpp"
#include "bevg/hungarian.hpp"
#include "bevg/random.hpp"
#include "bevg/textenc.hpp"

namespace {

std::vector<bevg::Box3D> random_boxes(std::size_t n, std::uint64_t seed) {
  bevg::Rng rng(seed);
  std::vector<bevg::Box3D> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.emplace_back(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-1, 1), rng.uniform(1, 5),
                     rng.uniform(1, 3), rng.uniform(1, 3), rng.uniform(-3.14, 3.14));
  }
  return out;
}

void BM_BevIou(benchmark::State& state) {
  const auto a = random_boxes(256, 1), b = random_boxes(256, 2);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(bevg::bev_iou(a[i & 255], b[i & 255]));
    ++i;
  }
}
BENCHMARK(BM_BevIou);

void BM_Iou3d(benchmark::State& state) {
  const auto a = random_boxes(256, 3), b = random_boxes(256, 4);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(bevg::iou_3d(a[i & 255], b[i & 255]));
    ++i;
  }
}
BENCHMARK(BM_Iou3d);

void BM_Hungarian(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  const int m = static_cast<int>(state.range(1));
  bevg::Rng rng(5);
  bevg::CostMatrix c{k, m, {}};
  for (int i = 0; i < k * m; ++i) c.data.push_back(rng.uniform());
  for (auto _ : state) benchmark::DoNotOptimize(bevg::hungarian_match(c));
}
BENCHMARK(BM_Hungarian)->Args({200, 1})->Args({200, 10})->Args({50, 50});

void BM_ModelForward(benchmark::State& state) {
  bevg::SynthOptions so;
  so.n_scenes = 1;
  so.seed = 7;
  so.write_images = false;
  const auto corpus = bevg::synth_corpus(so);
  bevg::ModelConfig cfg;
  cfg.grid.cell = 1.5;
  cfg.grid.z_bins = 4;
  cfg.bev_channels = 16;
  cfg.model_dim = 32;
  cfg.ffn_dim = 64;
  cfg.num_proposals = 32;
  const bevg::BevGroundingModel model(cfg);
  const auto scene = bevg::prepare_scene(corpus.scenes[0].cloud, cfg);
  const auto enc = bevg::make_encoder({"hash-test", cfg.text_dim, 0});
  const auto text = enc->encode(corpus.scenes[0].samples[0].prompt);
  const bool grad = state.range(0) != 0;
  for (auto _ : state) {
    bevg::nn::Tape t;
    t.set_grad_enabled(grad);
    auto fr = model.forward(t, scene, text);
    if (grad) {
      auto loss = model.loss(fr, corpus.scenes[0].samples[0].referred);
      t.backward(loss.total);
    }
    benchmark::DoNotOptimize(fr.head.value().data());
  }
}
BENCHMARK(BM_ModelForward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
