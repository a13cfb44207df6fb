#include "cachesub/csvio.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cachesub {

std::string format_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

namespace {

std::string csv_cell(const nlohmann::json& v) {
  std::string s;
  if (v.is_null()) {
    return s;
  } else if (v.is_boolean()) {
    s = v.get<bool>() ? "true" : "false";
  } else if (v.is_number_integer()) {
    s = std::to_string(v.get<std::int64_t>());
  } else if (v.is_number_unsigned()) {
    s = std::to_string(v.get<std::uint64_t>());
  } else if (v.is_number()) {
    s = format_g9(v.get<double>());
  } else if (v.is_string()) {
    s = v.get<std::string>();
  } else {
    throw std::invalid_argument("table cells must be scalars");
  }
  if (s.find_first_of(",\"\n") != std::string::npos) {
    std::string quoted = "\"";
    for (char c : s) {
      if (c == '"') quoted += '"';
      quoted += c;
    }
    quoted += '"';
    return quoted;
  }
  return s;
}

}  // namespace

void OutputTable::add_row(std::initializer_list<nlohmann::json> cells) {
  if (cells.size() != columns.size()) {
    throw std::invalid_argument("row width does not match the header");
  }
  rows.emplace_back(cells);
}

std::string OutputTable::to_csv() const {
  std::string out;
  for (const auto& [key, value] : metadata) {
    out += "# " + key + ": " + value + "\n";
  }
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (c) out += ',';
    out += columns[c];
  }
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += csv_cell(row[c]);
    }
    out += '\n';
  }
  return out;
}

std::string OutputTable::to_json() const {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  for (const auto& [key, value] : metadata) meta[key] = value;
  doc["metadata"] = std::move(meta);
  doc["columns"] = columns;
  nlohmann::ordered_json out_rows = nlohmann::ordered_json::array();
  for (const auto& row : rows) {
    nlohmann::ordered_json r = nlohmann::ordered_json::array();
    for (const auto& cell : row) r.push_back(nlohmann::ordered_json(cell));
    out_rows.push_back(std::move(r));
  }
  doc["rows"] = std::move(out_rows);
  return doc.dump(2) + "\n";
}

std::string OutputTable::render(const std::string& format) const {
  if (format == "csv") return to_csv();
  if (format == "json") return to_json();
  throw std::invalid_argument("unknown output format: " + format);
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("file not found: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (!in.good() && !in.eof()) throw std::runtime_error("read failed: " + path);
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out.good()) throw std::runtime_error("write failed: " + path);
}

}  // namespace cachesub
