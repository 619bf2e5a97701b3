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

#include <string>
#include <vector>

namespace mvforge::harness {

/// Minimal deterministic SVG chart: line or scatter series on linear axes.
class SvgPlot {
 public:
  enum class Style { kLine, kPoints };

  SvgPlot(std::string title, std::string x_label, std::string y_label);

  void add_series(std::string name, std::vector<double> x, std::vector<double> y,
                  Style style = Style::kLine);
  /// Draws y = x across the plot area.
  void add_diagonal() { diagonal_ = true; }

  std::string render() const;

 private:
  struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    Style style;
  };

  std::string title_;
  std::string x_label_;
  std::string y_label_;
  std::vector<Series> series_;
  bool diagonal_ = false;
};

}  // namespace mvforge::harness
