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

#include "mvforge/voicegen.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "fft.hpp"
#include "mvforge/errors.hpp"

namespace mvforge::voicegen {
namespace {

constexpr double kFs = audio::kSampleRate;
constexpr double kTargetRms = 0.06;
constexpr double kNoiseFloor = 1e-3;
constexpr double kPauseProbability = 0.12;
constexpr double kEnvelopeLimitDb = 24.0;
constexpr double kEnvelopeSpreadDb = 4.0;

// Sub-ranges keep every realized pitch (speaker f0 x 3% utterance jitter x 4%
// token contour) inside its cluster: A within [85, 165), B within [165, 255].
constexpr ParamRange kF0RangeA{95.0, 145.0};
constexpr ParamRange kF0RangeB{185.0, 235.0};

struct TokenShape {
  double pitch;
  double amplitude;
};

TokenShape token_shape(char c) {
  if (c == ' ') return {1.0, 0.0};
  const auto u = static_cast<unsigned>(static_cast<unsigned char>(c));
  const double p = static_cast<double>((u * 37u) % 9u) / 8.0;  // 0..1
  const double a = static_cast<double>((u * 53u) % 7u) / 6.0;  // 0..1
  return {1.0 + 0.04 * (2.0 * p - 1.0), 0.4 + 0.6 * a};
}

double poly_blep(double t, double dt) {
  if (t < dt) {
    t /= dt;
    return t + t - t * t - 1.0;
  }
  if (t > 1.0 - dt) {
    t = (t - 1.0) / dt;
    return t * t + t + t + 1.0;
  }
  return 0.0;
}

struct Resonator {
  double a = 0.0, b = 0.0, c = 0.0;
  double y1 = 0.0, y2 = 0.0;

  Resonator(double center, double bandwidth) {
    const double r = std::exp(-std::numbers::pi * bandwidth / kFs);
    c = -r * r;
    b = 2.0 * r * std::cos(2.0 * std::numbers::pi * center / kFs);
    a = 1.0 - b - c;
  }

  double step(double x) {
    const double y = a * x + b * y1 + c * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

double uniform_in(Rng& rng, ParamRange r) {
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

struct PitchAnalysis {
  double f0 = 0.0;
  double harmonicity = 0.0;
};

PitchAnalysis analyze_pitch(const Waveform& w) {
  constexpr int kFrame = 1024;
  constexpr int kHop = 512;
  constexpr int kMinLag = 40;   // 400 Hz
  constexpr int kMaxLag = 267;  // 60 Hz
  auto& fft = detail::fft_for_size(2 * kFrame);
  std::vector<double> frame(kFrame), acf(2 * kFrame);
  std::vector<std::complex<double>> spec(kFrame + 1);
  std::vector<double> f0s, peaks;
  for (std::size_t off = 0; off + kFrame <= w.size(); off += kHop) {
    double energy = 0.0;
    for (int n = 0; n < kFrame; ++n) {
      frame[n] = w.samples[off + n];
      energy += frame[n] * frame[n];
    }
    if (std::sqrt(energy / kFrame) < 0.01) continue;
    fft.forward(frame, spec);
    for (auto& z : spec) z = std::norm(z);
    fft.inverse(spec, acf);
    const double r0 = acf[0];
    if (r0 <= 0.0) continue;
    double best = -1.0;
    for (int lag = kMinLag; lag <= kMaxLag; ++lag) {
      // Unbiased normalization so long lags are not penalized.
      acf[lag] = acf[lag] / r0 * kFrame / (kFrame - lag);
      best = std::max(best, acf[lag]);
    }
    // First local maximum close to the global one avoids sub-octave picks.
    int pick = -1;
    for (int lag = kMinLag + 1; lag < kMaxLag; ++lag) {
      if (acf[lag] >= 0.85 * best && acf[lag] >= acf[lag - 1] && acf[lag] >= acf[lag + 1]) {
        pick = lag;
        break;
      }
    }
    if (pick < 0 || best < 0.3) continue;
    const double l = acf[pick - 1], c = acf[pick], r = acf[pick + 1];
    const double denom = l - 2.0 * c + r;
    const double shift = denom != 0.0 ? 0.5 * (l - r) / denom : 0.0;
    f0s.push_back(kFs / (pick + std::clamp(shift, -0.5, 0.5)));
    peaks.push_back(std::min(1.0, c));
  }
  PitchAnalysis out;
  if (f0s.empty()) return out;
  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  };
  out.f0 = median(f0s);
  out.harmonicity = median(peaks);
  return out;
}

double unit_clamp(double x) { return std::clamp(x, 0.0, 1.0); }

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Zero-phase spectral shaping by the interpolated envelope. The transform is
// long enough that the (short) shaping filter does not wrap around.
void apply_envelope(std::vector<double>& y, const std::array<double, kEnvelopeBands>& gains_db) {
  if (std::all_of(gains_db.begin(), gains_db.end(), [](double g) { return g == 0.0; })) return;
  const int n = detail::next_pow2(static_cast<int>(y.size()) + 4096);
  auto& fft = detail::fft_for_size(n);
  std::vector<std::complex<double>> spec(fft.bins());
  fft.forward(y, spec);
  const auto& centers = envelope_band_centers();
  std::array<double, kEnvelopeBands> mels{};
  for (int b = 0; b < kEnvelopeBands; ++b) mels[b] = hz_to_mel(centers[b]);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double mel = hz_to_mel(static_cast<double>(k) * kFs / n);
    double db;
    if (mel <= mels.front()) {
      db = gains_db.front();
    } else if (mel >= mels.back()) {
      db = gains_db.back();
    } else {
      const auto it = std::upper_bound(mels.begin(), mels.end(), mel);
      const std::size_t hi = static_cast<std::size_t>(it - mels.begin());
      const double t = (mel - mels[hi - 1]) / (mels[hi] - mels[hi - 1]);
      db = (1.0 - t) * gains_db[hi - 1] + t * gains_db[hi];
    }
    spec[k] *= std::pow(10.0, db / 20.0) / n;
  }
  std::vector<double> out(n);
  fft.inverse(spec, out);
  std::copy(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(y.size()), y.begin());
}

}  // namespace

const std::array<double, kEnvelopeBands>& envelope_band_centers() {
  static const std::array<double, kEnvelopeBands> centers = [] {
    std::array<double, kEnvelopeBands> c{};
    const double lo = hz_to_mel(150.0), hi = hz_to_mel(7000.0);
    for (int b = 0; b < kEnvelopeBands; ++b) {
      c[b] = mel_to_hz(lo + (hi - lo) * b / (kEnvelopeBands - 1));
    }
    return c;
  }();
  return centers;
}

std::string to_string(Gender g) { return g == Gender::kA ? "A" : "B"; }

Gender gender_from_string(const std::string& s) {
  if (s == "A") return Gender::kA;
  if (s == "B") return Gender::kB;
  throw_precondition("unknown gender label '" + s + "'");
}

void SpeakerProfile::validate() const {
  require(f0 >= 60.0 && f0 <= 400.0, "speaker f0 must lie in [60, 400] Hz");
  double prev = 0.0;
  for (const auto& f : formants) {
    require(f.center_hz > prev, "formant centers must be strictly increasing");
    require(f.center_hz < 8000.0, "formant centers must lie below 8 kHz");
    require(f.bandwidth_hz > 0.0, "formant bandwidths must be positive");
    prev = f.center_hz;
  }
  require(tilt >= 0.0 && tilt < 1.0, "tilt must lie in [0, 1)");
  require(noise_mix >= 0.0, "noise mix must be nonnegative");
  for (double g : envelope_db) {
    require(std::isfinite(g) && std::abs(g) <= 24.0, "envelope gains must lie within +-24 dB");
  }
}

void TokenSequence::validate() const { require(!tokens.empty(), "token sequence is empty"); }

Waveform synthesize(const SpeakerProfile& profile, const TokenSequence& tokens, int length,
                    const SynthesisJitter& jitter, Rng& rng) {
  profile.validate();
  tokens.validate();
  require(length > 0, "synthesis length must be positive");

  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double f0 = profile.f0 * (1.0 + jitter.pitch * sym(rng));
  std::vector<Resonator> tract;
  for (const auto& f : profile.formants) {
    tract.emplace_back(f.center_hz * (1.0 + jitter.formant * sym(rng)), f.bandwidth_hz);
  }

  std::array<double, kEnvelopeBands> envelope = profile.envelope_db;
  if (jitter.envelope_db > 0.0) {
    for (double& g : envelope) g += jitter.envelope_db * gauss(rng);
  }

  const int segments = (length + kSegmentSamples - 1) / kSegmentSamples;
  std::vector<TokenShape> shapes(segments);
  for (int s = 0; s < segments; ++s) {
    shapes[s] = token_shape(tokens.tokens[s % tokens.tokens.size()]);
    if (jitter.amplitude_noise > 0.0 && shapes[s].amplitude > 0.0) {
      shapes[s].amplitude *= std::max(0.0, 1.0 + jitter.amplitude_noise * gauss(rng));
    }
  }

  const double smooth = std::exp(-1.0 / (0.015 * kFs));
  double pitch = shapes[0].pitch;
  double amp = 0.0;
  double phase = 0.0;
  double source = 0.0;
  std::vector<double> y(length);
  for (int n = 0; n < length; ++n) {
    const TokenShape& target = shapes[n / kSegmentSamples];
    pitch = smooth * pitch + (1.0 - smooth) * target.pitch;
    amp = smooth * amp + (1.0 - smooth) * target.amplitude;
    const double dt = f0 * pitch / kFs;
    const double saw = 2.0 * phase - 1.0 - poly_blep(phase, dt);
    phase += dt;
    if (phase >= 1.0) phase -= 1.0;
    source = (1.0 - profile.tilt) * saw + profile.tilt * source;
    double x = amp * (source + profile.noise_mix * gauss(rng));
    for (auto& r : tract) x = r.step(x);
    y[n] = x;
  }
  apply_envelope(y, envelope);

  double energy = 0.0;
  for (double v : y) energy += v * v;
  const double rms = std::sqrt(energy / length);
  const double gain = rms > 0.0 ? kTargetRms / rms : 0.0;
  for (double& v : y) v = v * gain + kNoiseFloor * gauss(rng);
  audio::clip_in_place(y);
  return Waveform(std::move(y));
}

void PopulationSpec::validate() const {
  require(num_speakers >= 2, "population needs at least two speakers");
  require(utterances_per_speaker >= 1, "population needs at least one utterance per speaker");
  require(gender_balance >= 0.0 && gender_balance <= 1.0, "gender balance must lie in [0, 1]");
}

TokenSequence random_tokens(Rng& rng, int segments) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> letter(0, 25);
  TokenSequence t;
  for (int i = 0; i < segments; ++i) {
    t.tokens.push_back(u(rng) < kPauseProbability ? ' ' : static_cast<char>('a' + letter(rng)));
  }
  if (t.tokens.find_first_not_of(' ') == std::string::npos) t.tokens[0] = 'a';
  return t;
}

Population generate_population(const PopulationSpec& spec) {
  spec.validate();
  Population pop;
  pop.spec = spec;
  const int num_b = static_cast<int>(std::lround(spec.num_speakers * spec.gender_balance));
  std::vector<Gender> genders(spec.num_speakers, Gender::kA);
  std::fill(genders.begin(), genders.begin() + num_b, Gender::kB);
  Rng order = make_rng(spec.seed, 0);
  std::shuffle(genders.begin(), genders.end(), order);

  for (int i = 0; i < spec.num_speakers; ++i) {
    Rng rng = make_rng(spec.seed, 1000 + static_cast<std::uint64_t>(i));
    SpeakerProfile p;
    p.gender = genders[i];
    const bool b = p.gender == Gender::kB;
    p.f0 = uniform_in(rng, b ? kF0RangeB : kF0RangeA);
    p.formants[0] = {uniform_in(rng, b ? ParamRange{380, 800} : ParamRange{300, 650}),
                     uniform_in(rng, {60, 160})};
    p.formants[1] = {uniform_in(rng, b ? ParamRange{1100, 2300} : ParamRange{950, 1900}),
                     uniform_in(rng, {80, 200})};
    p.formants[2] = {uniform_in(rng, b ? ParamRange{2700, 3400} : ParamRange{2550, 3000}),
                     uniform_in(rng, {100, 250})};
    p.tilt = uniform_in(rng, {0.6, 0.95});
    p.noise_mix = uniform_in(rng, {0.02, 0.3});
    std::normal_distribution<double> spread(0.0, kEnvelopeSpreadDb);
    for (double& g : p.envelope_db) g = std::clamp(spread(rng), -kEnvelopeLimitDb, kEnvelopeLimitDb);

    Speaker s;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%04d", spec.id_prefix.c_str(), i);
    s.id = buf;
    s.profile = p;
    for (int j = 0; j < spec.utterances_per_speaker; ++j) {
      s.utterance_seeds.push_back(
          mix_seed(spec.seed, (static_cast<std::uint64_t>(i) << 20) + static_cast<std::uint64_t>(j)));
    }
    pop.speakers.push_back(std::move(s));
  }
  return pop;
}

Waveform Population::utterance(std::size_t speaker, std::size_t index) const {
  require(speaker < speakers.size(), "speaker index out of range");
  const Speaker& s = speakers[speaker];
  require(index < s.utterance_seeds.size(), "utterance index out of range");
  Rng rng = make_rng(s.utterance_seeds[index]);
  const int segments = (audio::kStandardLength + kSegmentSamples - 1) / kSegmentSamples;
  const TokenSequence tokens = random_tokens(rng, segments);
  return synthesize(s.profile, tokens, audio::kStandardLength, kUtteranceJitter, rng);
}

std::vector<std::size_t> Population::speakers_of(Gender g) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < speakers.size(); ++i) {
    if (speakers[i].profile.gender == g) out.push_back(i);
  }
  return out;
}

const std::array<ParamRange, 9>& clone_param_ranges() {
  static const std::array<ParamRange, 9> ranges{{{85.0, 255.0},
                                                 {250.0, 900.0},
                                                 {950.0, 2500.0},
                                                 {2550.0, 3600.0},
                                                 {60.0, 160.0},
                                                 {80.0, 200.0},
                                                 {100.0, 250.0},
                                                 {0.6, 0.95},
                                                 {0.02, 0.3}}};
  return ranges;
}

const std::array<std::vector<int>, 9>& clone_param_groups() {
  static const std::array<std::vector<int>, 9> groups = [] {
    const std::array<int, 9> sizes{5, 4, 4, 4, 3, 3, 3, 3, 3};
    std::array<std::vector<int>, 9> g;
    int next = 0;
    for (int p = 0; p < 9; ++p) {
      for (int i = 0; i < sizes[p]; ++i) g[p].push_back(next++);
    }
    return g;
  }();
  return groups;
}

CloneModel::CloneModel(SynthesisJitter jitter) : jitter_(jitter) {}

SpeakerProfile CloneModel::decode(const Eigen::VectorXd& v) const {
  require(v.size() == dim(), "clone embedding has the wrong dimension");
  const auto& ranges = clone_param_ranges();
  const auto& groups = clone_param_groups();
  std::array<double, 9> p{};
  for (int i = 0; i < 9; ++i) {
    double m = 0.0;
    for (int idx : groups[i]) m += v[idx];
    m /= static_cast<double>(groups[i].size());
    p[i] = ranges[i].lo + (ranges[i].hi - ranges[i].lo) * m;
  }
  SpeakerProfile out;
  out.f0 = p[0];
  out.formants = {Formant{p[1], p[4]}, Formant{p[2], p[5]}, Formant{p[3], p[6]}};
  out.tilt = p[7];
  out.noise_mix = p[8];
  out.gender = out.f0 < kGenderBoundaryHz ? Gender::kA : Gender::kB;
  return out;
}

Eigen::VectorXd CloneModel::get_speaker_embedding(const Waveform& w) const {
  Eigen::VectorXd out = Eigen::VectorXd::Constant(dim(), 0.5);
  double energy = 0.0;
  for (double s : w.samples) energy += s * s;
  if (w.size() < 1024 || std::sqrt(energy / static_cast<double>(w.size())) < 1e-4) return out;

  const auto& ranges = clone_param_ranges();
  const auto& groups = clone_param_groups();
  auto fill = [&](int param, double value) {
    for (int idx : groups[param]) out[idx] = unit_clamp(value);
  };

  const PitchAnalysis pitch = analyze_pitch(w);
  if (pitch.f0 > 0.0) fill(0, (pitch.f0 - ranges[0].lo) / (ranges[0].hi - ranges[0].lo));
  fill(8, (0.97 - pitch.harmonicity) / 0.25);

  // Long-term average power spectrum over the louder frames.
  const audio::Spectrogram spec = audio::spectrogram(w);
  const Eigen::MatrixXd power = spec.mag.cwiseAbs2();
  const Eigen::RowVectorXd frame_energy = power.colwise().sum();
  const double gate = 0.1 * frame_energy.maxCoeff();
  Eigen::VectorXd ltas = Eigen::VectorXd::Zero(power.rows());
  for (Eigen::Index t = 0; t < power.cols(); ++t) {
    if (frame_energy[t] >= gate) ltas += power.col(t);
  }
  constexpr int kSmooth = 4;
  Eigen::VectorXd env = Eigen::VectorXd::Zero(ltas.size());
  for (Eigen::Index k = 0; k < ltas.size(); ++k) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, k - kSmooth);
    const Eigen::Index hi = std::min<Eigen::Index>(ltas.size() - 1, k + kSmooth);
    env[k] = ltas.segment(lo, hi - lo + 1).mean();
  }
  const double bin_hz = static_cast<double>(audio::kSampleRate) / spec.config.fft_size;
  for (int f = 0; f < 3; ++f) {
    const ParamRange band = ranges[1 + f];
    double num = 0.0, den = 0.0, peak = 0.0, sum = 0.0;
    int count = 0;
    for (Eigen::Index k = 0; k < env.size(); ++k) {
      const double hz = k * bin_hz;
      if (hz < band.lo || hz > band.hi) continue;
      const double e2 = env[k] * env[k];
      num += hz * e2;
      den += e2;
      peak = std::max(peak, env[k]);
      sum += env[k];
      ++count;
    }
    if (den > 0.0) fill(1 + f, (num / den - band.lo) / (band.hi - band.lo));
    if (count > 0 && sum > 0.0) fill(4 + f, 1.0 - (peak / (sum / count) - 1.0) / 4.0);
  }

  // Spectral slope in dB per kHz, 100 Hz .. 7 kHz.
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int m = 0;
  for (Eigen::Index k = 0; k < env.size(); ++k) {
    const double khz = k * bin_hz / 1000.0;
    if (khz < 0.1 || khz > 7.0 || env[k] <= 0.0) continue;
    const double db = 10.0 * std::log10(env[k]);
    sx += khz;
    sy += db;
    sxx += khz * khz;
    sxy += khz * db;
    ++m;
  }
  if (m > 2) {
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    fill(7, (-slope - 2.0) / 6.0);
  }
  return out;
}

Waveform CloneModel::generate_speech(const TokenSequence& tokens, const Eigen::VectorXd& embedding,
                                     int max_len, Rng& rng) const {
  require(embedding.size() == dim(), "clone embedding has the wrong dimension");
  require((embedding.array() >= 0.0).all() && (embedding.array() <= 1.0).all(),
          "clone embedding lies outside [0,1]^d; clip it before synthesis");
  return synthesize(decode(embedding), tokens, max_len, jitter_, rng);
}

double estimate_f0(const Waveform& w) { return analyze_pitch(w).f0; }

}  // namespace mvforge::voicegen
