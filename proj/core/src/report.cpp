#include "cdl/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "cdl/error.hpp"

namespace cdl {

std::string format12(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

double fixed12(double v) {
  if (!std::isfinite(v)) return v;
  return std::strtod(format12(v).c_str(), nullptr);
}

void JsonWriter::comma() {
  if (!first_in_scope_.empty()) {
    if (!first_in_scope_.back()) out_ += ",";
    first_in_scope_.back() = false;
  }
}

void JsonWriter::key_prefix(const std::string& key) {
  comma();
  if (!key.empty()) out_ += "\"" + escape(key) + "\":";
}

std::string JsonWriter::escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out;
}

JsonWriter& JsonWriter::begin_object() {
  comma();
  out_ += "{";
  first_in_scope_.push_back(true);
  return *this;
}

JsonWriter& JsonWriter::end_object() {
  out_ += "}";
  first_in_scope_.pop_back();
  return *this;
}

JsonWriter& JsonWriter::begin_array(const std::string& key) {
  key_prefix(key);
  out_ += "[";
  first_in_scope_.push_back(true);
  return *this;
}

JsonWriter& JsonWriter::end_array() {
  out_ += "]";
  first_in_scope_.pop_back();
  return *this;
}

JsonWriter& JsonWriter::field(const std::string& key, double v) {
  key_prefix(key);
  const std::string s = format12(v);
  if (s == "nan" || s == "inf" || s == "-inf")
    out_ += "\"" + s + "\"";
  else
    out_ += s;
  return *this;
}

JsonWriter& JsonWriter::field(const std::string& key, int v) {
  key_prefix(key);
  out_ += std::to_string(v);
  return *this;
}

JsonWriter& JsonWriter::field(const std::string& key, std::uint64_t v) {
  key_prefix(key);
  out_ += std::to_string(v);
  return *this;
}

JsonWriter& JsonWriter::field(const std::string& key, bool v) {
  key_prefix(key);
  out_ += v ? "true" : "false";
  return *this;
}

JsonWriter& JsonWriter::field(const std::string& key, const std::string& v) {
  key_prefix(key);
  out_ += "\"" + escape(v) + "\"";
  return *this;
}

JsonWriter& JsonWriter::field(const std::string& key, const char* v) {
  return field(key, std::string(v));
}

JsonWriter& JsonWriter::field(const std::string& key, const std::vector<double>& v) {
  begin_array(key);
  for (double e : v) element(e);
  return end_array();
}

JsonWriter& JsonWriter::raw_field(const std::string& key, const std::string& json) {
  key_prefix(key);
  out_ += json;
  return *this;
}

JsonWriter& JsonWriter::element(double v) {
  comma();
  out_ += format12(v);
  return *this;
}

JsonWriter& JsonWriter::element(const std::string& v) {
  comma();
  out_ += "\"" + escape(v) + "\"";
  return *this;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out = open_output(path);
  out << content;
}

std::ofstream open_output(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path);
  return out;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<const std::vector<double>*>& columns) {
  if (header.size() != columns.size())
    throw Error("write_csv: header/column mismatch");
  std::string body;
  for (std::size_t c = 0; c < header.size(); ++c)
    body += (c ? "," : "") + header[c];
  body += "\n";
  const std::size_t rows = columns.empty() ? 0 : columns[0]->size();
  for (const auto* col : columns)
    if (col->size() != rows) throw Error("write_csv: ragged columns");
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c)
      body += (c ? "," : "") + format12((*columns[c])[r]);
    body += "\n";
  }
  write_text_file(path, body);
}

}  // namespace cdl
