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

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mvforge/audio.hpp"
#include "mvforge/rng.hpp"

namespace mvforge::attack {

using audio::Waveform;

/// Loudspeaker, room and microphone impulse responses plus the AWGN scale.
struct PlaybackKernels {
  std::vector<std::vector<double>> speaker_irs;
  std::vector<std::vector<double>> room_irs;
  std::vector<std::vector<double>> mic_irs;
  double noise_sigma = 0.025;  // std of z; the noise variance is z^2

  /// Non-empty categories, non-empty finite kernels, noise_sigma >= 0.
  void validate() const;

  /// 4 speaker, 9 room and 7 microphone responses generated from `seed`.
  static PlaybackKernels synthetic(std::uint64_t seed);
  /// One unit delta per category and no noise.
  static PlaybackKernels identity();
};

/// Random choices of one playback simulation, fixed so that forward and
/// adjoint passes see the same channel.
struct PlaybackDraw {
  std::size_t speaker = 0;
  std::size_t room = 0;
  std::size_t mic = 0;
  double noise_std = 0.0;
  std::uint64_t noise_seed = 0;
};

PlaybackDraw draw_playback(const PlaybackKernels& kernels, Rng& rng);

/// (((w * k_s) + n) * k_r) * k_m, causal same-length convolutions, clipped.
Waveform playback(const Waveform& w, const PlaybackKernels& kernels, const PlaybackDraw& draw);
Waveform playback(const Waveform& w, const PlaybackKernels& kernels, Rng& rng);

/// dL/dw for the fixed draw given dL/d(playback output).
std::vector<double> playback_backward(const Waveform& w, const PlaybackKernels& kernels,
                                      const PlaybackDraw& draw, std::span<const double> upstream);

/// y[n] = sum_k h[k] x[n-k] for 0 <= n < |x|.
std::vector<double> convolve_same(std::span<const double> x, std::span<const double> h);
/// Adjoint of convolve_same: g[m] = sum_n y[n] h[n-m].
std::vector<double> correlate_same(std::span<const double> y, std::span<const double> h);

}  // namespace mvforge::attack
