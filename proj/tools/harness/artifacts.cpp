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

#include "artifacts.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <fstream>
#include <memory>
#include <sstream>

#include "mvforge/errors.hpp"

namespace mvforge::harness {
namespace {

std::string to_hex(const unsigned char* data, unsigned int len) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kDigits[data[i] >> 4]);
    out.push_back(kDigits[data[i] & 15]);
  }
  return out;
}

std::string escape_csv(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
    throw_numerical("SHA-256 computation failed");
  }
  return to_hex(digest.data(), len);
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_precondition("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_precondition("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw_precondition("write failed for " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw_precondition("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_file(path, j.dump(2) + "\n");
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
  require(!header.empty(), "CSV needs at least one column");
  row(header);
  rows_ = 0;
}

CsvWriter& CsvWriter::row(std::initializer_list<std::string> fields) {
  return row(std::vector<std::string>(fields));
}

CsvWriter& CsvWriter::row(const std::vector<std::string>& fields) {
  require(fields.size() == columns_, "CSV row has the wrong number of fields");
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) text_.push_back(',');
    text_ += escape_csv(fields[i]);
  }
  text_.push_back('\n');
  ++rows_;
  return *this;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw_precondition("CSV has no column '" + name + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw_precondition("empty CSV " + path.string());
  t.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    t.rows.push_back(split_csv_line(line));
    if (t.rows.back().size() != t.header.size()) {
      throw_precondition("ragged CSV row in " + path.string());
    }
  }
  return t;
}

StageManifest::StageManifest(std::string stage, std::filesystem::path root, nlohmann::json config)
    : stage_(std::move(stage)), root_(std::move(root)), config_(std::move(config)) {}

void StageManifest::add_input(const std::filesystem::path& manifest) {
  if (!std::filesystem::exists(manifest)) {
    throw_precondition("missing input manifest " + manifest.string() +
                       "; run the producing stage first");
  }
  inputs_.push_back({{"path", std::filesystem::relative(manifest, root_).generic_string()},
                     {"sha256", sha256_file(manifest)}});
}

void StageManifest::add_output(const std::filesystem::path& file) {
  outputs_.push_back({{"path", std::filesystem::relative(file, root_).generic_string()},
                      {"sha256", sha256_file(file)},
                      {"bytes", std::filesystem::file_size(file)}});
}

void StageManifest::save(const std::filesystem::path& dir) const {
  nlohmann::json j = {{"stage", stage_},
                      {"tool_version", std::string(kToolVersion)},
                      {"config", config_},
                      {"inputs", inputs_},
                      {"outputs", outputs_}};
  for (const auto& [k, v] : extra_.items()) j[k] = v;
  write_json(dir / "manifest.json", j);
  nlohmann::json t = nlohmann::json::object();
  for (const auto& [k, v] : timings_) t[k] = v;
  write_json(dir / "timings.json", t);
}

}  // namespace mvforge::harness
