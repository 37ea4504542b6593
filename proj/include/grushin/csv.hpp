#pragma once

#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>

namespace grushin {

/// Shortest round-trip-safe text for a double (17 significant digits).
std::string format_double(double v);

/// Minimal CSV writer; every number goes through format_double so that
/// identical data always produces identical bytes.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, std::initializer_list<std::string_view> header);

  CsvWriter& cell(double v);
  CsvWriter& cell(long long v);
  CsvWriter& cell(int v) { return cell(static_cast<long long>(v)); }
  CsvWriter& cell(std::size_t v) { return cell(static_cast<long long>(v)); }
  CsvWriter& cell(std::string_view s);
  CsvWriter& cell(const char* s) { return cell(std::string_view(s)); }
  CsvWriter& cell(bool b) { return cell(std::string_view(b ? "1" : "0")); }
  void end_row();
  void comment(std::string_view text);

 private:
  std::ofstream out_;
  bool first_ = true;
};

}  // namespace grushin
