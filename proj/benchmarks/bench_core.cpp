// Copyright 2026 The noisyner Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include "noisyner/synthetic.hpp"
#include "noisyner/trainer.hpp"

using namespace noisyner;

namespace {

Lattice random_lattice(std::size_t n, std::size_t labels, std::uint64_t seed) {
  Rng rng(seed);
  Lattice lat{Matrix(n, labels), Matrix(labels + 2, labels + 2)};
  for (double& v : lat.emissions.values()) v = 4.0 * rng.uniform01() - 2.0;
  for (double& v : lat.transitions.values()) v = 2.0 * rng.uniform01() - 1.0;
  return lat;
}

void BM_ForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto labels = static_cast<std::size_t>(state.range(1));
  const Lattice lat = random_lattice(n, labels, 1);
  for (auto _ : state) benchmark::DoNotOptimize(forward_backward(lat).log_z);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_ForwardBackward)->ArgsProduct({{10, 40, 160}, {9, 17}});

void BM_Viterbi(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Lattice lat = random_lattice(n, 9, 2);
  for (auto _ : state) benchmark::DoNotOptimize(viterbi(lat).score);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Viterbi)->Arg(10)->Arg(40)->Arg(160);

void BM_PartialMarginal(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Lattice lat = random_lattice(n, 9, 3);
  Rng rng(4);
  ConstraintMask mask(n, 9, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.uniform01() < 0.2) {
      mask.allow_all(i);
    } else {
      mask.set(i, rng.uniform_index(9));
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(partial_marginal(lat, mask).log_marginal);
}
BENCHMARK(BM_PartialMarginal)->Arg(10)->Arg(40);

void BM_TrainEpoch(benchmark::State& state) {
  const Corpus corpus = generate_synthetic(SyntheticConfig{static_cast<std::size_t>(state.range(0)), 3, 120, 5});
  CrfModel model = CrfModel::initialize(corpus);
  const auto features = model.encode(corpus);
  std::vector<ConstraintMask> masks;
  for (const Sentence& s : corpus.sentences) {
    masks.push_back(ConstraintMask::singleton(s.observed_tags(), corpus.tagset.size()));
  }
  TrainConfig cfg;
  int epoch = 0;
  for (auto _ : state) benchmark::DoNotOptimize(train_epoch(model, corpus, features, masks, cfg, epoch++));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(corpus.num_tokens()));
}
BENCHMARK(BM_TrainEpoch)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_FitConfident(benchmark::State& state) {
  const Corpus clean = generate_synthetic(SyntheticConfig{500, 3, 120, 6});
  PerturbationConfig pc;
  const Corpus noisy = perturb(clean, pc).corpus;
  TrainConfig cfg;
  cfg.schedule = {0.1, 0.1, 5};
  for (auto _ : state) benchmark::DoNotOptimize(fit(noisy, cfg).epochs.back().loss);
}
BENCHMARK(BM_FitConfident)->Unit(benchmark::kMillisecond);

void BM_Perturb(benchmark::State& state) {
  const Corpus clean = generate_synthetic(SyntheticConfig{1000, 3, 120, 7});
  PerturbationConfig pc;
  for (auto _ : state) {
    ++pc.seed;
    benchmark::DoNotOptimize(perturb(clean, pc).recall);
  }
}
BENCHMARK(BM_Perturb)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
