// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <vector>

#include "mvse/adam.hpp"
#include "mvse/encoders.hpp"
#include "mvse/random.hpp"
#include "mvse/synth.hpp"
#include "mvse/train.hpp"

namespace {

std::vector<mvse::Coordinate> random_coordinates(std::size_t n) {
  mvse::Rng rng(1);
  std::vector<mvse::Coordinate> out;
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(rng.uniform(-180, 180), rng.uniform(-90, 90));
  return out;
}

// Args: SH degree L, embedding dimension d.
void BM_LocationEncode(benchmark::State& state) {
  auto config = mvse::preset("EU16_OSM16");
  config.sh_degree = static_cast<int>(state.range(0));
  config.embed_dim = static_cast<std::size_t>(state.range(1));
  const mvse::MultiViewModel model(config, 1);
  const auto coords = random_coordinates(1024);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.location_encode(coords[i++ % coords.size()]));
  }
}
BENCHMARK(BM_LocationEncode)->Args({7, 8})->Args({7, 64})->Args({16, 16})->Args({16, 64})->Unit(benchmark::kMicrosecond);

void BM_LocationEncodeBatch(benchmark::State& state) {
  const mvse::MultiViewModel model(mvse::preset("EU16_OSM16"), 1);
  const auto coords = random_coordinates(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(model.location_encode_batch(coords));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LocationEncodeBatch)->Arg(128)->Arg(1024)->Unit(benchmark::kMillisecond);

// One forward/backward pass plus Adam update on a batch of the given size.
void BM_TrainStep(benchmark::State& state) {
  const auto records = mvse::synthesize_world({.seed = 2, .count = 256});
  auto config = mvse::preset("EU8_GS32_OSM32");
  config.feature_dim = records.front().gs_features.size();
  mvse::MultiViewModel model(config, 3);
  model.set_normalization(mvse::InputNormalization::fit(records, config));
  std::vector<std::size_t> idx(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const auto batch = mvse::make_batch(model, records, idx);
  mvse::AdamState adam;
  adam.options = {.lr = config.learning_rate, .weight_decay = config.weight_decay};
  for (auto _ : state) {
    model.parameters().zero_grad();
    mvse::ad::Tape tape;
    tape.bind(model.parameters());
    const auto loss = mvse::batch_loss(model, tape, batch);
    tape.backward(loss);
    mvse::adam_step(model.parameters(), adam);
  }
}
BENCHMARK(BM_TrainStep)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
