#ifndef GIBBSFLOW_IO_HPP
#define GIBBSFLOW_IO_HPP

// CSV output: RFC-4180 quoting, numbers printed with 12 significant digits.

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace gibbsflow {

inline std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";  // folds -0 into 0
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string csv_quote(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  CsvWriter& field(std::string_view s) {
    sep();
    os_ << csv_quote(s);
    return *this;
  }
  CsvWriter& field(double v) {
    sep();
    os_ << fmt_num(v);
    return *this;
  }
  template <class I, class = std::enable_if_t<std::is_integral_v<I>>>
  CsvWriter& field(I v) {
    sep();
    os_ << v;
    return *this;
  }
  CsvWriter& field(const char* s) { return field(std::string_view(s)); }
  CsvWriter& field(const std::string& s) { return field(std::string_view(s)); }

  void header(const std::vector<std::string>& names) {
    for (const auto& n : names) field(n);
    end();
  }
  void end() {
    os_ << '\n';
    first_ = true;
  }

 private:
  void sep() {
    if (!first_) os_ << ',';
    first_ = false;
  }
  std::ostream& os_;
  bool first_ = true;
};

}  // namespace gibbsflow

#endif  // GIBBSFLOW_IO_HPP
