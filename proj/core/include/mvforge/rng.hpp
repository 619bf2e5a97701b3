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
#include <random>

namespace mvforge {

/// All stochastic operations take this engine by reference so that runs are
/// reproducible from a single seed.
using Rng = std::mt19937_64;

/// Derives an independent engine for (seed, stream). Used wherever work items
/// must be reproducible regardless of evaluation order.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

/// Mixes two 64-bit values (splitmix64 finalizer). Handy for building stream ids.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace mvforge
