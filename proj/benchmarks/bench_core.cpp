// Copyright 2026 The mvforge Authors
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

#include <memory>
#include <random>

#include "mvforge/attack.hpp"
#include "mvforge/audio.hpp"
#include "mvforge/coverage.hpp"
#include "mvforge/encoder.hpp"

namespace {

using namespace mvforge;

audio::Waveform noise(int length, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<double> s(static_cast<std::size_t>(length));
  for (auto& v : s) v = u(rng);
  return audio::Waveform(std::move(s));
}

void BM_Spectrogram(benchmark::State& state) {
  const audio::Waveform w = noise(audio::kStandardLength, 1);
  for (auto _ : state) benchmark::DoNotOptimize(audio::spectrogram(w));
}
BENCHMARK(BM_Spectrogram)->Unit(benchmark::kMillisecond);

void BM_SpectrogramBackward(benchmark::State& state) {
  const audio::Waveform w = noise(audio::kStandardLength, 2);
  const audio::StftConfig cfg;
  const audio::Matrix up = audio::spectrogram(w, cfg).mag;
  for (auto _ : state) benchmark::DoNotOptimize(audio::spectrogram_backward(w, cfg, up));
}
BENCHMARK(BM_SpectrogramBackward)->Unit(benchmark::kMillisecond);

void BM_Encode(benchmark::State& state) {
  const encoder::ToyEncoder enc = encoder::stock_encoder("spec-a");
  const encoder::Matrix feats = enc.frontend().features(noise(audio::kStandardLength, 3));
  for (auto _ : state) benchmark::DoNotOptimize(encoder::encode(enc, feats));
}
BENCHMARK(BM_Encode)->Unit(benchmark::kMicrosecond);

void BM_EncodeBackward(benchmark::State& state) {
  const encoder::ToyEncoder enc = encoder::stock_encoder("spec-a");
  const encoder::Matrix feats = enc.frontend().features(noise(audio::kStandardLength, 4));
  const encoder::Embedding target = encoder::encode(enc, feats);
  for (auto _ : state) benchmark::DoNotOptimize(encoder::encode_backward(enc, feats, target));
}
BENCHMARK(BM_EncodeBackward)->Unit(benchmark::kMicrosecond);

void BM_NesStep(benchmark::State& state) {
  const auto enc = std::make_shared<encoder::ToyEncoder>(encoder::stock_encoder("spec-a"));
  const encoder::EncoderHandle handle(enc, encoder::EncoderHandle::Mode::kBlackBox);
  const audio::Waveform seed = noise(audio::kStandardLength, 5);
  const std::vector<encoder::Embedding> batch{handle.embed(noise(audio::kStandardLength, 6))};
  const attack::NesConfig nes{static_cast<int>(state.range(0)), 0.001};
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(seed.size()));
  Rng rng = make_rng(7);
  auto objective = [&](const Eigen::VectorXd& v) {
    return encoder::blackbox_score(handle, attack::apply_waveform(seed, v), batch);
  };
  for (auto _ : state) benchmark::DoNotOptimize(attack::nes_gradient(objective, x, nes, rng));
  state.SetItemsProcessed(state.iterations() * 2 * state.range(0));
}
BENCHMARK(BM_NesStep)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_GreedyCoverage(benchmark::State& state) {
  Rng rng = make_rng(8);
  std::bernoulli_distribution bit(0.1);
  std::vector<std::vector<int>> rows(static_cast<std::size_t>(state.range(0)),
                                     std::vector<int>(200));
  for (auto& r : rows) {
    for (auto& v : r) v = bit(rng);
  }
  const auto b = coverage::ImpersonationMatrix::from_rows(rows);
  for (auto _ : state) benchmark::DoNotOptimize(coverage::select_complementary(b, 10));
}
BENCHMARK(BM_GreedyCoverage)->Arg(20)->Arg(200)->Unit(benchmark::kMicrosecond);

void BM_GriffinLim(benchmark::State& state) {
  const audio::Spectrogram target = audio::spectrogram(noise(16000, 9));
  Rng rng = make_rng(10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(audio::griffin_lim(target, static_cast<int>(state.range(0)), rng));
  }
}
BENCHMARK(BM_GriffinLim)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_Playback(benchmark::State& state) {
  const attack::PlaybackKernels k = attack::PlaybackKernels::synthetic(11);
  const audio::Waveform w = noise(audio::kStandardLength, 12);
  Rng rng = make_rng(13);
  for (auto _ : state) benchmark::DoNotOptimize(attack::playback(w, k, rng));
}
BENCHMARK(BM_Playback)->Unit(benchmark::kMillisecond);

}  // namespace

// The distribution ships benchmark_main as LTO bytecode tied to one compiler
// release, so the entry point is defined here.
BENCHMARK_MAIN();
