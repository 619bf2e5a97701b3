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

#include <stdexcept>
#include <string>

namespace mvforge {

/// Broad failure classes. The CLI maps these onto its exit codes.
enum class ErrorKind {
  kConfig,        // malformed or inconsistent configuration
  kPrecondition,  // input violates an operation's contract
  kNumerical,     // NaN/Inf or another numerical breakdown
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void throw_config(const std::string& what);
[[noreturn]] void throw_precondition(const std::string& what);
[[noreturn]] void throw_numerical(const std::string& what);

inline void require(bool ok, const std::string& what) {
  if (!ok) throw_precondition(what);
}

}  // namespace mvforge
