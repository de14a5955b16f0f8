#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace cdl {

/// Rounds to 12 significant digits. Every float that lands in a report goes
/// through this, so identical runs serialize identically.
double fixed12(double v);
std::string format12(double v);

/// Minimal ordered JSON writer: insertion order is preserved and floats are
/// fixed-precision, which keeps reports byte-stable across runs and worker
/// counts.
class JsonWriter {
 public:
  JsonWriter& begin_object();
  JsonWriter& end_object();
  JsonWriter& begin_array(const std::string& key = "");
  JsonWriter& end_array();
  JsonWriter& field(const std::string& key, double v);
  JsonWriter& field(const std::string& key, int v);
  JsonWriter& field(const std::string& key, std::uint64_t v);
  JsonWriter& field(const std::string& key, bool v);
  JsonWriter& field(const std::string& key, const std::string& v);
  JsonWriter& field(const std::string& key, const char* v);
  JsonWriter& field(const std::string& key, const std::vector<double>& v);
  JsonWriter& raw_field(const std::string& key, const std::string& json);
  JsonWriter& element(double v);
  JsonWriter& element(const std::string& v);
  std::string str() const { return out_; }

 private:
  void comma();
  void key_prefix(const std::string& key);
  static std::string escape(const std::string& s);
  std::string out_;
  std::vector<bool> first_in_scope_;
};

void write_text_file(const std::string& path, const std::string& content);

/// Opens an output file for writing, creating parent directories.
std::ofstream open_output(const std::string& path);

/// CSV helper: header row then fixed-precision value rows, columns given as
/// equally sized vectors.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<const std::vector<double>*>& columns);

}  // namespace cdl
