#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace cachesub {

inline constexpr const char* kToolVersion = "1.0.0";

// 9 significant digits (%.9g): enough to diff against independent
// implementations without dragging binary noise into the files.
std::string format_g9(double v);

// Tabular experiment output with a leading "# key: value" metadata block.
// Cells are JSON scalars; doubles render via format_g9 in CSV and stay
// full-precision numbers in JSON. Rendering is deterministic: same table,
// same bytes.
struct OutputTable {
  std::vector<std::string> columns;
  std::vector<std::vector<nlohmann::json>> rows;
  std::vector<std::pair<std::string, std::string>> metadata;

  void add_row(std::initializer_list<nlohmann::json> cells);
  std::string to_csv() const;
  std::string to_json() const;                         // ordered document
  std::string render(const std::string& format) const;  // "csv" | "json"
};

std::string hash_hex(std::uint64_t h);  // 16 lowercase hex digits

// Throws std::runtime_error with a "file not found:" prefix when missing.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace cachesub
