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

#include "mvforge/playback.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>

#include "fft.hpp"
#include "mvforge/errors.hpp"

namespace mvforge::attack {
namespace {

// Short kernels use direct summation, which keeps delta kernels bit exact.
constexpr std::size_t kDirectMaxTaps = 64;

using Complex = std::complex<double>;

std::vector<double> fft_filter(std::span<const double> x, std::span<const double> h, bool adjoint) {
  const int n = detail::next_pow2(static_cast<int>(x.size() + h.size()));
  auto& fft = detail::fft_for_size(n);
  std::vector<Complex> xs(fft.bins()), hs(fft.bins());
  fft.forward(x, xs);
  fft.forward(h, hs);
  for (std::size_t k = 0; k < xs.size(); ++k) xs[k] *= adjoint ? std::conj(hs[k]) : hs[k];
  std::vector<double> full(n);
  fft.inverse(xs, full);
  std::vector<double> out(x.size());
  const double scale = 1.0 / n;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = full[i] * scale;
  return out;
}

std::vector<double> decaying_noise(Rng& rng, std::size_t taps, double decay_taps, double lead) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> h(taps);
  h[0] = lead;
  for (std::size_t k = 1; k < taps; ++k) {
    h[k] = gauss(rng) * std::exp(-static_cast<double>(k) / decay_taps);
  }
  return h;
}

void normalize_l1(std::vector<double>& h) {
  double s = 0.0;
  for (double v : h) s += std::abs(v);
  for (double& v : h) v /= s;
}

}  // namespace

void PlaybackKernels::validate() const {
  for (const auto* cat : {&speaker_irs, &room_irs, &mic_irs}) {
    require(!cat->empty(), "every playback kernel category needs at least one impulse response");
    for (const auto& h : *cat) {
      require(!h.empty(), "impulse responses must be non-empty");
      for (double v : h) {
        if (!std::isfinite(v)) throw_precondition("impulse responses must be finite");
      }
    }
  }
  require(noise_sigma >= 0.0 && std::isfinite(noise_sigma), "noise_sigma must be finite and >= 0");
}

PlaybackKernels PlaybackKernels::synthetic(std::uint64_t seed) {
  PlaybackKernels k;
  const double fs = static_cast<double>(audio::kSampleRate);
  Rng rng = make_rng(seed, 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Loudspeakers: 2 ms positive lowpass bursts with unit DC gain.
  for (int i = 0; i < 4; ++i) {
    const std::size_t taps = static_cast<std::size_t>(0.002 * fs);
    const double decay = 2.0 + 6.0 * unit(rng);
    std::vector<double> h(taps);
    for (std::size_t t = 0; t < taps; ++t) {
      h[t] = (0.5 + unit(rng)) * std::exp(-static_cast<double>(t) / decay);
    }
    normalize_l1(h);
    k.speaker_irs.push_back(std::move(h));
  }
  // Rooms: direct path plus an exponentially decaying noise tail, T60 50-300 ms.
  for (int i = 0; i < 9; ++i) {
    const double t60 = 0.05 + 0.25 * static_cast<double>(i) / 8.0;
    const std::size_t taps = static_cast<std::size_t>(t60 * fs);
    const double decay_taps = t60 * fs / std::log(1000.0);
    std::vector<double> h = decaying_noise(rng, taps, decay_taps, 0.0);
    double tail = 0.0;
    for (double v : h) tail += v * v;
    // Reverberant energy at -6 dB relative to the direct path.
    const double gain = std::sqrt(0.25 / tail);
    for (double& v : h) v *= gain;
    h[0] = 1.0;
    k.room_irs.push_back(std::move(h));
  }
  // Microphones: 1-5 ms damped resonances added to a direct tap.
  for (int i = 0; i < 7; ++i) {
    const double len_s = 0.001 + 0.004 * static_cast<double>(i) / 6.0;
    const std::size_t taps = static_cast<std::size_t>(len_s * fs);
    const double freq = 1000.0 + 5000.0 * unit(rng);
    const double decay = static_cast<double>(taps) / 3.0;
    std::vector<double> h(taps);
    for (std::size_t t = 0; t < taps; ++t) {
      h[t] = 0.3 * std::cos(2.0 * M_PI * freq * static_cast<double>(t) / fs) *
             std::exp(-static_cast<double>(t) / decay);
    }
    h[0] += 1.0;
    normalize_l1(h);
    for (double& v : h) v *= 2.0;
    k.mic_irs.push_back(std::move(h));
  }
  return k;
}

PlaybackKernels PlaybackKernels::identity() {
  PlaybackKernels k;
  k.speaker_irs = {{1.0}};
  k.room_irs = {{1.0}};
  k.mic_irs = {{1.0}};
  k.noise_sigma = 0.0;
  return k;
}

std::vector<double> convolve_same(std::span<const double> x, std::span<const double> h) {
  require(!h.empty(), "convolution kernel is empty");
  if (h.size() > kDirectMaxTaps) return fft_filter(x, h, false);
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t n = 0; n < x.size(); ++n) {
    const std::size_t kmax = std::min(h.size() - 1, n);
    double acc = 0.0;
    for (std::size_t k = 0; k <= kmax; ++k) acc += h[k] * x[n - k];
    y[n] = acc;
  }
  return y;
}

std::vector<double> correlate_same(std::span<const double> y, std::span<const double> h) {
  require(!h.empty(), "convolution kernel is empty");
  if (h.size() > kDirectMaxTaps) return fft_filter(y, h, true);
  std::vector<double> g(y.size(), 0.0);
  for (std::size_t m = 0; m < y.size(); ++m) {
    const std::size_t kmax = std::min(h.size() - 1, y.size() - 1 - m);
    double acc = 0.0;
    for (std::size_t k = 0; k <= kmax; ++k) acc += h[k] * y[m + k];
    g[m] = acc;
  }
  return g;
}

PlaybackDraw draw_playback(const PlaybackKernels& kernels, Rng& rng) {
  kernels.validate();
  PlaybackDraw d;
  d.speaker = std::uniform_int_distribution<std::size_t>(0, kernels.speaker_irs.size() - 1)(rng);
  d.room = std::uniform_int_distribution<std::size_t>(0, kernels.room_irs.size() - 1)(rng);
  d.mic = std::uniform_int_distribution<std::size_t>(0, kernels.mic_irs.size() - 1)(rng);
  const double z = kernels.noise_sigma > 0.0
                       ? std::normal_distribution<double>(0.0, kernels.noise_sigma)(rng)
                       : 0.0;
  d.noise_std = std::abs(z);
  d.noise_seed = rng();
  return d;
}

namespace {

std::vector<double> playback_unclipped(std::span<const double> x, const PlaybackKernels& kernels,
                                       const PlaybackDraw& draw) {
  require(draw.speaker < kernels.speaker_irs.size() && draw.room < kernels.room_irs.size() &&
              draw.mic < kernels.mic_irs.size(),
          "playback draw does not match the kernel set");
  std::vector<double> y = convolve_same(x, kernels.speaker_irs[draw.speaker]);
  if (draw.noise_std > 0.0) {
    Rng rng = make_rng(draw.noise_seed, 0);
    std::normal_distribution<double> gauss(0.0, draw.noise_std);
    for (double& v : y) v += gauss(rng);
  }
  y = convolve_same(y, kernels.room_irs[draw.room]);
  return convolve_same(y, kernels.mic_irs[draw.mic]);
}

}  // namespace

Waveform playback(const Waveform& w, const PlaybackKernels& kernels, const PlaybackDraw& draw) {
  Waveform out{playback_unclipped(w.samples, kernels, draw), w.sample_rate};
  audio::clip_in_place(out.samples);
  return out;
}

Waveform playback(const Waveform& w, const PlaybackKernels& kernels, Rng& rng) {
  return playback(w, kernels, draw_playback(kernels, rng));
}

std::vector<double> playback_backward(const Waveform& w, const PlaybackKernels& kernels,
                                      const PlaybackDraw& draw, std::span<const double> upstream) {
  require(upstream.size() == w.size(), "playback upstream gradient has the wrong length");
  const std::vector<double> pre = playback_unclipped(w.samples, kernels, draw);
  std::vector<double> g(upstream.begin(), upstream.end());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (pre[i] < -1.0 || pre[i] > 1.0) g[i] = 0.0;
  }
  g = correlate_same(g, kernels.mic_irs[draw.mic]);
  g = correlate_same(g, kernels.room_irs[draw.room]);
  return correlate_same(g, kernels.speaker_irs[draw.speaker]);
}

}  // namespace mvforge::attack
