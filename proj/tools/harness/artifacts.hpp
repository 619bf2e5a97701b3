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

#include <chrono>
#include <filesystem>
#include <initializer_list>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mvforge::harness {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);
nlohmann::json read_json(const std::filesystem::path& path);
/// Pretty-printed with sorted keys and a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// Shortest round-trip decimal form.
std::string format_double(double v);

/// RFC 4180 style writer; fields containing separators are quoted.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  CsvWriter& row(std::initializer_list<std::string> fields);
  CsvWriter& row(const std::vector<std::string>& fields);
  std::size_t rows() const { return rows_; }
  const std::string& text() const { return text_; }
  void save(const std::filesystem::path& path) const { write_file(path, text_); }

 private:
  std::size_t columns_;
  std::size_t rows_ = 0;
  std::string text_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
};
CsvTable read_csv(const std::filesystem::path& path);

/// Stage output inventory. Paths are stored relative to the output root;
/// timings go to a separate file that is not part of any checksum.
class StageManifest {
 public:
  StageManifest(std::string stage, std::filesystem::path root, nlohmann::json config);

  void add_input(const std::filesystem::path& manifest);
  void add_output(const std::filesystem::path& file);
  void set(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }
  void time(const std::string& step, double seconds) { timings_[step] = seconds; }

  /// Writes <dir>/manifest.json and <dir>/timings.json.
  void save(const std::filesystem::path& dir) const;

 private:
  std::string stage_;
  std::filesystem::path root_;
  nlohmann::json config_;
  nlohmann::json inputs_ = nlohmann::json::array();
  nlohmann::json outputs_ = nlohmann::json::array();
  nlohmann::json extra_ = nlohmann::json::object();
  std::map<std::string, double> timings_;
};

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline constexpr std::string_view kToolVersion = "0.3.0";

}  // namespace mvforge::harness
