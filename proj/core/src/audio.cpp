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

#include "mvforge/audio.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include "fft.hpp"
#include "mvforge/errors.hpp"

namespace mvforge::audio {
namespace {

constexpr double kMagEps = 1e-12;
constexpr double kVarEps = 1e-12;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Complex STFT, bins x frames.
Eigen::MatrixXcd stft(const std::vector<double>& x, const StftConfig& cfg) {
  const int frames = cfg.frames(x.size());
  const auto win = hamming_window(cfg.window_len);
  auto& fft = detail::fft_for_size(cfg.fft_size);
  Eigen::MatrixXcd out(cfg.bins(), frames);
  std::vector<double> frame(cfg.window_len);
  for (int t = 0; t < frames; ++t) {
    const std::size_t off = static_cast<std::size_t>(t) * cfg.hop;
    for (int n = 0; n < cfg.window_len; ++n) frame[n] = x[off + n] * win[n];
    fft.forward(frame, std::span<std::complex<double>>(out.col(t).data(), cfg.bins()));
  }
  return out;
}

}  // namespace

void Waveform::validate() const {
  require(sample_rate == kSampleRate, "waveform sample rate must be 16000 Hz");
  for (double s : samples) {
    require(std::isfinite(s) && s >= -1.0 && s <= 1.0, "waveform sample outside [-1, 1]");
  }
}

void clip_in_place(std::vector<double>& samples) {
  for (double& s : samples) s = std::clamp(s, -1.0, 1.0);
}

void StftConfig::validate() const {
  require(window_len >= 1 && window_len <= fft_size, "window_len must be in [1, fft_size]");
  require(hop >= 1, "hop must be >= 1");
  require(fft_size >= 2 && fft_size % 2 == 0, "fft_size must be even");
}

int StftConfig::frames(std::size_t length) const {
  if (length < static_cast<std::size_t>(window_len)) return 0;
  return static_cast<int>((length - window_len) / hop) + 1;
}

std::size_t StftConfig::span(int frames) const {
  if (frames <= 0) return 0;
  return static_cast<std::size_t>(frames - 1) * hop + window_len;
}

std::vector<double> hamming_window(int length) {
  std::vector<double> w(length, 1.0);
  if (length == 1) return w;
  for (int n = 0; n < length; ++n) {
    w[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (length - 1));
  }
  return w;
}

Waveform standardize(const Waveform& w, int target_len, PadMode mode, Rng& rng) {
  require(target_len > 0, "target length must be positive");
  require(!w.empty(), "cannot standardize an empty waveform");
  const auto len = static_cast<long>(w.size());
  if (mode == PadMode::kAuto) mode = len > target_len ? PadMode::kCrop : PadMode::kPad;

  Waveform out;
  out.sample_rate = w.sample_rate;
  if (len == target_len) {
    out.samples = w.samples;
  } else if (mode == PadMode::kCrop) {
    require(len > target_len, "crop requires an input longer than the target");
    std::uniform_int_distribution<long> pick(0, len - target_len);
    const long off = pick(rng);
    out.samples.assign(w.samples.begin() + off, w.samples.begin() + off + target_len);
  } else {
    require(len < target_len, "pad requires an input shorter than the target");
    out.samples = w.samples;
    out.samples.resize(target_len, 0.0);
  }
  return out;
}

Spectrogram spectrogram(const Waveform& w, const StftConfig& cfg) {
  cfg.validate();
  require(w.size() >= static_cast<std::size_t>(cfg.window_len),
          "waveform is shorter than one analysis window");
  Spectrogram s;
  s.config = cfg;
  s.mag = stft(w.samples, cfg).cwiseAbs();
  return s;
}

std::vector<double> spectrogram_backward(const Waveform& w, const StftConfig& cfg,
                                         const Matrix& upstream) {
  cfg.validate();
  const int frames = cfg.frames(w.size());
  require(frames > 0, "waveform is shorter than one analysis window");
  require(upstream.rows() == cfg.bins() && upstream.cols() == frames,
          "upstream gradient shape does not match the spectrogram");

  const Eigen::MatrixXcd spec = stft(w.samples, cfg);
  const auto win = hamming_window(cfg.window_len);
  auto& fft = detail::fft_for_size(cfg.fft_size);
  const int nb = cfg.bins();

  // d|X_k|/dy_n = Re(X_k e^{+i theta_kn}) / |X_k|. Summing over the one-sided
  // spectrum is a Hermitian inverse with interior bins halved.
  std::vector<double> grad(w.size(), 0.0);
  std::vector<std::complex<double>> h(nb);
  std::vector<double> frame_grad(cfg.fft_size);
  for (int t = 0; t < frames; ++t) {
    for (int k = 0; k < nb; ++k) {
      const std::complex<double> x = spec(k, t);
      const double mag = std::sqrt(std::norm(x) + kMagEps);
      std::complex<double> v = upstream(k, t) * x / mag;
      if (k != 0 && k != nb - 1) v *= 0.5;
      h[k] = v;
    }
    fft.inverse(h, frame_grad);
    const std::size_t off = static_cast<std::size_t>(t) * cfg.hop;
    for (int n = 0; n < cfg.window_len; ++n) grad[off + n] += win[n] * frame_grad[n];
  }
  return grad;
}

Matrix mel_filter_matrix(const StftConfig& cfg, int bands, std::vector<double>* edges_hz) {
  cfg.validate();
  require(bands >= 1, "filter bank needs at least one band");
  require(bands <= cfg.fft_size / 2, "more bands than spectral bins");
  const double nyquist = kSampleRate / 2.0;
  const double mel_lo = hz_to_mel(0.0);
  const double mel_hi = hz_to_mel(nyquist);
  std::vector<double> edges(bands + 2);
  for (int i = 0; i < bands + 2; ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (bands + 1));
  }
  Matrix fb = Matrix::Zero(bands, cfg.bins());
  for (int b = 0; b < bands; ++b) {
    const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
    for (int k = 0; k < cfg.bins(); ++k) {
      const double f = static_cast<double>(k) * kSampleRate / cfg.fft_size;
      if (f > lo && f < mid) fb(b, k) = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi) fb(b, k) = (hi - f) / (hi - mid);
    }
  }
  if (edges_hz) *edges_hz = std::move(edges);
  return fb;
}

FilterBankFeatures filterbank(const Waveform& w, const StftConfig& cfg, int bands) {
  FilterBankFeatures out;
  const Matrix fb = mel_filter_matrix(cfg, bands, &out.band_edges);
  const Spectrogram s = spectrogram(w, cfg);
  out.energies = (fb * s.mag.cwiseAbs2()).unaryExpr([](double e) {
    return std::log(std::max(e, kLogFloor));
  });
  return out;
}

Matrix feature_normalize(const Matrix& a) {
  require(a.rows() >= 2, "normalization needs at least two components per time step");
  Matrix out(a.rows(), a.cols());
  const double k = static_cast<double>(a.rows());
  for (Eigen::Index t = 0; t < a.cols(); ++t) {
    const double mean = a.col(t).mean();
    const double var = (a.col(t).array() - mean).square().sum() / k;
    out.col(t) = (a.col(t).array() - mean) / std::sqrt(var + kVarEps);
  }
  return out;
}

Spectrogram feature_normalize(const Spectrogram& s) {
  return Spectrogram{feature_normalize(s.mag), s.config};
}

FilterBankFeatures feature_normalize(const FilterBankFeatures& f) {
  return FilterBankFeatures{feature_normalize(f.energies), f.band_edges};
}

Matrix feature_normalize_backward(const Matrix& input, const Matrix& upstream) {
  require(input.rows() == upstream.rows() && input.cols() == upstream.cols(),
          "upstream gradient shape does not match the features");
  require(input.rows() >= 2, "normalization needs at least two components per time step");
  Matrix out(input.rows(), input.cols());
  const double k = static_cast<double>(input.rows());
  for (Eigen::Index t = 0; t < input.cols(); ++t) {
    const double mean = input.col(t).mean();
    const Eigen::ArrayXd centered = input.col(t).array() - mean;
    const double sigma = std::sqrt(centered.square().sum() / k + kVarEps);
    const Eigen::ArrayXd z = centered / sigma;
    const Eigen::ArrayXd g = upstream.col(t).array();
    // y = c / sigma  =>  dx = (g - mean(g) - z * mean(g * z)) / sigma
    out.col(t) = ((g - g.mean() - z * (g * z).mean()) / sigma).matrix();
  }
  return out;
}

Waveform griffin_lim(const Spectrogram& target, int iters, Rng& rng,
                     std::vector<double>* consistency_trace) {
  require(iters >= 1, "Griffin-Lim needs at least one iteration");
  const StftConfig& cfg = target.config;
  cfg.validate();
  require(target.mag.rows() == cfg.bins(), "magnitude rows must equal fft_size/2 + 1");
  require((target.mag.array() >= 0.0).all(), "magnitudes must be nonnegative");
  const int frames = static_cast<int>(target.mag.cols());
  const std::size_t len = cfg.span(frames);
  const int nb = cfg.bins();
  const auto win = hamming_window(cfg.window_len);
  auto& fft = detail::fft_for_size(cfg.fft_size);

  // Least-squares overlap-add normalizer.
  std::vector<double> denom(len, 0.0);
  for (int t = 0; t < frames; ++t) {
    for (int n = 0; n < cfg.window_len; ++n) denom[t * cfg.hop + n] += win[n] * win[n];
  }

  std::uniform_real_distribution<double> phase_dist(-std::numbers::pi, std::numbers::pi);
  Eigen::MatrixXcd spec(nb, frames);
  for (int t = 0; t < frames; ++t) {
    for (int k = 0; k < nb; ++k) spec(k, t) = std::polar(target.mag(k, t), phase_dist(rng));
  }

  std::vector<double> x(len, 0.0);
  std::vector<double> frame(cfg.fft_size);
  std::vector<std::complex<double>> column(nb);
  auto reconstruct = [&](const Eigen::MatrixXcd& s) {
    // Projection onto consistent spectrograms (least-squares ISTFT).
    std::fill(x.begin(), x.end(), 0.0);
    for (int t = 0; t < frames; ++t) {
      for (int k = 0; k < nb; ++k) column[k] = s(k, t);
      fft.inverse(column, frame);
      for (int n = 0; n < cfg.window_len; ++n) {
        x[t * cfg.hop + n] += win[n] * frame[n] / cfg.fft_size;
      }
    }
    for (std::size_t i = 0; i < len; ++i) x[i] = denom[i] > 0.0 ? x[i] / denom[i] : 0.0;
    return stft(x, cfg);
  };
  // Norm over the full two-sided spectrum: interior bins appear twice.
  auto distance = [&](const Eigen::MatrixXcd& rebuilt) {
    const Matrix diff2 = (rebuilt.cwiseAbs() - target.mag).cwiseAbs2();
    return std::sqrt(2.0 * diff2.sum() - diff2.row(0).sum() - diff2.row(nb - 1).sum());
  };
  auto project_magnitude = [&](const Eigen::MatrixXcd& rebuilt) {
    Eigen::MatrixXcd out(nb, frames);
    for (int t = 0; t < frames; ++t) {
      for (int k = 0; k < nb; ++k) {
        const std::complex<double> z = rebuilt(k, t);
        const double a = std::abs(z);
        out(k, t) = a > 0.0 ? target.mag(k, t) * (z / a) : std::complex<double>(target.mag(k, t));
      }
    }
    return out;
  };

  // Fast Griffin-Lim momentum. An extrapolated step is kept only if it does
  // not increase the consistency error; otherwise the plain projection is
  // used, which never does.
  constexpr double kMomentum = 0.99;
  Eigen::MatrixXcd plain = spec;
  Eigen::MatrixXcd previous;
  double last = std::numeric_limits<double>::infinity();
  if (consistency_trace) consistency_trace->clear();
  for (int it = 0; it < iters; ++it) {
    Eigen::MatrixXcd rebuilt = reconstruct(spec);
    double err = distance(rebuilt);
    if (err > last) {
      rebuilt = reconstruct(plain);
      err = distance(rebuilt);
      previous.resize(0, 0);
    }
    if (consistency_trace) consistency_trace->push_back(err);
    last = err;
    plain = project_magnitude(rebuilt);
    spec = previous.size() == 0 ? plain : Eigen::MatrixXcd(plain + kMomentum * (plain - previous));
    previous = plain;
  }
  // A final plain step; its error is at most the last traced value.
  reconstruct(plain);
  clip_in_place(x);
  return Waveform(std::move(x));
}

double snr_db(const Waveform& reference, const Waveform& test) {
  require(reference.size() == test.size(), "SNR needs equal-length signals");
  double signal = 0.0, residual = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    signal += reference.samples[i] * reference.samples[i];
    const double d = reference.samples[i] - test.samples[i];
    residual += d * d;
  }
  require(signal > 0.0, "SNR reference is all zeros");
  if (residual == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / residual);
}

}  // namespace mvforge::audio
