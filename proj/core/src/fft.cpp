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

#include "fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>

#include "mvforge/errors.hpp"

namespace mvforge::detail {
namespace {

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

RealFft::RealFft(int n) : n_(n) {
  require(n >= 2 && n % 2 == 0, "FFT size must be even and >= 2");
  std::lock_guard<std::mutex> lock(planner_mutex());
  real_ = fftw_alloc_real(static_cast<size_t>(n));
  auto* spec = fftw_alloc_complex(static_cast<size_t>(n / 2 + 1));
  spec_ = spec;
  plan_fwd_ = fftw_plan_dft_r2c_1d(n, real_, spec, FFTW_ESTIMATE);
  plan_inv_ = fftw_plan_dft_c2r_1d(n, spec, real_, FFTW_ESTIMATE);
}

RealFft::~RealFft() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
  fftw_destroy_plan(static_cast<fftw_plan>(plan_inv_));
  fftw_free(real_);
  fftw_free(spec_);
}

void RealFft::forward(std::span<const double> in, std::span<std::complex<double>> out) {
  const size_t m = std::min(in.size(), static_cast<size_t>(n_));
  std::copy_n(in.begin(), m, real_);
  std::fill(real_ + m, real_ + n_, 0.0);
  fftw_execute(static_cast<fftw_plan>(plan_fwd_));
  auto* spec = static_cast<fftw_complex*>(spec_);
  const int nb = bins();
  for (int k = 0; k < nb && k < static_cast<int>(out.size()); ++k) {
    out[k] = {spec[k][0], spec[k][1]};
  }
}

void RealFft::inverse(std::span<const std::complex<double>> in, std::span<double> out) {
  auto* spec = static_cast<fftw_complex*>(spec_);
  const int nb = bins();
  for (int k = 0; k < nb; ++k) {
    spec[k][0] = in[k].real();
    spec[k][1] = (k == 0 || k == nb - 1) ? 0.0 : in[k].imag();
  }
  fftw_execute(static_cast<fftw_plan>(plan_inv_));
  const size_t m = std::min(out.size(), static_cast<size_t>(n_));
  std::copy_n(real_, m, out.begin());
}

RealFft& fft_for_size(int n) {
  thread_local std::map<int, std::unique_ptr<RealFft>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<RealFft>(n);
  return *slot;
}

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace mvforge::detail
