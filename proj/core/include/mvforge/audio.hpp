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

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <vector>

#include "mvforge/rng.hpp"

namespace mvforge::audio {

inline constexpr int kSampleRate = 16000;
/// 2.58 s at 16 kHz: the clip length every utterance is standardized to.
inline constexpr int kStandardLength = 41280;

using Matrix = Eigen::MatrixXd;

/// Mono audio with samples in [-1, 1] at kSampleRate.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  Waveform() = default;
  explicit Waveform(std::vector<double> s, int rate = kSampleRate)
      : samples(std::move(s)), sample_rate(rate) {}

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  /// Throws if a sample falls outside [-1, 1], is not finite, or the rate is wrong.
  void validate() const;
};

/// Clamps every sample into [-1, 1] in place.
void clip_in_place(std::vector<double>& samples);

struct StftConfig {
  int window_len = 400;  // 25 ms
  int hop = 160;         // 10 ms
  int fft_size = 512;

  void validate() const;
  int bins() const { return fft_size / 2 + 1; }
  /// Number of complete frames in a signal of `length` samples (0 if too short).
  int frames(std::size_t length) const;
  /// Length of the signal spanned by `frames` frames.
  std::size_t span(int frames) const;
};

/// Symmetric Hamming window of the configured length.
std::vector<double> hamming_window(int length);

/// Magnitude spectrogram, bins x frames.
struct Spectrogram {
  Matrix mag;
  StftConfig config;
};

/// Log mel filter-bank energies, bands x frames.
struct FilterBankFeatures {
  Matrix energies;
  std::vector<double> band_edges;  // Hz, bands + 2 entries
};

enum class PadMode { kCrop, kPad, kAuto };

/// Crops (uniformly random offset) or zero-pads at the end to exactly `target_len`.
Waveform standardize(const Waveform& w, int target_len, PadMode mode, Rng& rng);

Spectrogram spectrogram(const Waveform& w, const StftConfig& cfg = {});

/// Vector-Jacobian product of the magnitude spectrogram: given dL/d|X| (bins x
/// frames) returns dL/dw. At |X| == 0 the subgradient 0 is used.
std::vector<double> spectrogram_backward(const Waveform& w, const StftConfig& cfg,
                                         const Matrix& upstream);

/// Triangular HTK-mel filters spanning 0 Hz .. Nyquist, bands x bins.
Matrix mel_filter_matrix(const StftConfig& cfg, int bands, std::vector<double>* edges_hz = nullptr);

inline constexpr double kLogFloor = 1e-10;

FilterBankFeatures filterbank(const Waveform& w, const StftConfig& cfg = {}, int bands = 24);

/// Per time step (column) standardization: zero mean, unit (population) std.
/// The variance carries a small epsilon so constant columns map to zeros.
Matrix feature_normalize(const Matrix& a);
Spectrogram feature_normalize(const Spectrogram& s);
FilterBankFeatures feature_normalize(const FilterBankFeatures& f);

/// VJP of feature_normalize evaluated at `input`.
Matrix feature_normalize_backward(const Matrix& input, const Matrix& upstream);

/// Griffin-Lim phase reconstruction from a random initial phase. When
/// `consistency_trace` is given it receives || |STFT(x_i)| - mag || (norm over
/// the two-sided spectrum) after every iteration; that sequence never
/// increases. The output has span(frames) samples and is clipped to [-1, 1].
Waveform griffin_lim(const Spectrogram& mag, int iters, Rng& rng,
                     std::vector<double>* consistency_trace = nullptr);

/// 10 log10(|ref|^2 / |ref - test|^2); +infinity when identical.
double snr_db(const Waveform& reference, const Waveform& test);

/// Mono 16 kHz RIFF/WAVE. Float samples keep perturbations far below the
/// 16-bit quantization step.
enum class WavEncoding { kPcm16, kFloat32 };

Waveform load_wav(const std::filesystem::path& path);
void save_wav(const Waveform& w, const std::filesystem::path& path,
              WavEncoding encoding = WavEncoding::kPcm16);
std::vector<unsigned char> encode_wav(const Waveform& w,
                                      WavEncoding encoding = WavEncoding::kPcm16);
Waveform decode_wav(const std::vector<unsigned char>& bytes);

}  // namespace mvforge::audio
