#include "grushin/csv.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace grushin {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path, std::initializer_list<std::string_view> header)
    : out_(path, std::ios::binary) {
  if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
  for (auto h : header) cell(h);
  end_row();
}

CsvWriter& CsvWriter::cell(double v) { return cell(std::string_view(format_double(v))); }

CsvWriter& CsvWriter::cell(long long v) { return cell(std::string_view(std::to_string(v))); }

CsvWriter& CsvWriter::cell(std::string_view s) {
  if (!first_) out_ << ',';
  out_ << s;
  first_ = false;
  return *this;
}

void CsvWriter::end_row() {
  out_ << '\n';
  first_ = true;
}

void CsvWriter::comment(std::string_view text) {
  if (!first_) end_row();
  out_ << "# " << text << '\n';
}

}  // namespace grushin
