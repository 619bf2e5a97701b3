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

#include <complex>
#include <span>

namespace mvforge::detail {

/// Real-input FFT of a fixed size backed by FFTW. Plans are created with
/// FFTW_ESTIMATE so that results are bit-reproducible across runs.
class RealFft {
 public:
  explicit RealFft(int n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  int size() const { return n_; }
  int bins() const { return n_ / 2 + 1; }

  /// out[k] = sum_n in[n] exp(-2 pi i k n / N), k = 0..N/2. `in` may be shorter
  /// than N; it is zero padded.
  void forward(std::span<const double> in, std::span<std::complex<double>> out);

  /// Unnormalized Hermitian inverse: out[n] = sum over the full (implicitly
  /// mirrored) spectrum. Imaginary parts of bins 0 and N/2 are ignored.
  void inverse(std::span<const std::complex<double>> in, std::span<double> out);

 private:
  int n_;
  double* real_ = nullptr;
  void* spec_ = nullptr;
  void* plan_fwd_ = nullptr;
  void* plan_inv_ = nullptr;
};

/// Per-thread cached transform of size n.
RealFft& fft_for_size(int n);

/// Smallest power of two >= n.
int next_pow2(int n);

}  // namespace mvforge::detail
