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

#include "mvforge/errors.hpp"

namespace mvforge {

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(what), kind_(kind) {}

void throw_config(const std::string& what) {
  throw Error(ErrorKind::kConfig, what);
}

void throw_precondition(const std::string& what) {
  throw Error(ErrorKind::kPrecondition, what);
}

void throw_numerical(const std::string& what) {
  throw Error(ErrorKind::kNumerical, what);
}

}  // namespace mvforge
