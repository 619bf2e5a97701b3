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

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "mvforge/audio.hpp"
#include "mvforge/errors.hpp"

namespace mvforge::audio {
namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

std::uint32_t get_u32(const std::vector<unsigned char>& b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::uint16_t get_u16(const std::vector<unsigned char>& b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

}  // namespace

std::vector<unsigned char> encode_wav(const Waveform& w, WavEncoding encoding) {
  require(w.sample_rate == kSampleRate, "only 16 kHz audio can be written");
  const bool pcm = encoding == WavEncoding::kPcm16;
  const std::uint16_t width = pcm ? 2 : 4;
  const auto data_bytes = static_cast<std::uint32_t>(w.size() * width);
  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, pcm ? 1 : 3);  // PCM or IEEE float
  put_u16(out, 1);            // mono
  put_u32(out, kSampleRate);
  put_u32(out, kSampleRate * width);
  put_u16(out, width);
  put_u16(out, static_cast<std::uint16_t>(8 * width));
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_bytes);
  for (double s : w.samples) {
    const double c = std::clamp(s, -1.0, 1.0);
    if (pcm) {
      put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::round(c * 32767.0))));
    } else {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(c)));
    }
  }
  return out;
}

Waveform decode_wav(const std::vector<unsigned char>& b) {
  require(b.size() >= 12 && std::memcmp(b.data(), "RIFF", 4) == 0 &&
              std::memcmp(b.data() + 8, "WAVE", 4) == 0,
          "not a RIFF/WAVE file");
  bool have_fmt = false;
  bool is_float = false;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::string id(reinterpret_cast<const char*>(b.data() + pos), 4);
    const std::uint32_t size = get_u32(b, pos + 4);
    const std::size_t body = pos + 8;
    require(body + size <= b.size() || id == "data", "truncated WAV chunk '" + id + "'");
    if (id == "fmt ") {
      require(size >= 16, "WAV fmt chunk too small");
      const std::uint16_t format = get_u16(b, body);
      const std::uint16_t channels = get_u16(b, body + 2);
      const std::uint32_t rate = get_u32(b, body + 4);
      const std::uint16_t bits = get_u16(b, body + 14);
      require(format == 1 || format == 3, "unsupported WAV encoding " + std::to_string(format) +
                                              " (expected PCM or IEEE float)");
      require(channels == 1, "unsupported WAV channel count " + std::to_string(channels) +
                                 " (expected mono)");
      require(rate == kSampleRate, "unsupported WAV sample rate " + std::to_string(rate) +
                                       " Hz (expected 16000)");
      is_float = format == 3;
      require(bits == (is_float ? 32 : 16), "unsupported WAV bit depth " + std::to_string(bits) +
                                                (is_float ? " (expected 32)" : " (expected 16)"));
      have_fmt = true;
    } else if (id == "data") {
      require(have_fmt, "WAV data chunk precedes fmt chunk");
      const std::size_t avail = std::min<std::size_t>(size, b.size() - body);
      Waveform w;
      if (is_float) {
        w.samples.resize(avail / 4);
        for (std::size_t i = 0; i < w.samples.size(); ++i) {
          const double v = std::bit_cast<float>(get_u32(b, body + 4 * i));
          require(std::isfinite(v), "non-finite sample in WAV data");
          w.samples[i] = std::clamp(v, -1.0, 1.0);
        }
      } else {
        w.samples.resize(avail / 2);
        for (std::size_t i = 0; i < w.samples.size(); ++i) {
          const auto v = static_cast<std::int16_t>(get_u16(b, body + 2 * i));
          w.samples[i] = std::max(-1.0, v / 32767.0);
        }
      }
      return w;
    }
    pos = body + size + (size & 1u);
  }
  throw_precondition("WAV file has no data chunk");
}

Waveform load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

void save_wav(const Waveform& w, const std::filesystem::path& path, WavEncoding encoding) {
  const auto bytes = encode_wav(w, encoding);
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace mvforge::audio
