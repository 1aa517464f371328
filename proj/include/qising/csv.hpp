#pragma once

#include <charconv>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace qising {

inline constexpr const char* kVersion = "1.0.0";

// 12 significant digits through to_chars: locale independent by construction
// and stable across thread counts, which is what makes identical
// (config, seed) runs byte-identical.
inline std::string csv_number(double x) {
  char buf[40];
  auto res =
      std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 12);
  return std::string(buf, res.ptr);
}

inline std::string csv_number(long long x) { return std::to_string(x); }

// RFC-4180 quoting: only fields containing separators, quotes or line
// breaks get wrapped, with embedded quotes doubled.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out;
  out.reserve(s.size() + 2);
  out.push_back('"');
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

// Row sink with the output contract baked in: header first, LF endings,
// trailing `# qising v... seed=... params=...` metadata comment. All rows
// funnel through one stream so parallel producers cannot interleave.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  void header(const std::vector<std::string>& names) { row(names); }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os_ << ',';
      os_ << csv_field(cells[i]);
    }
    os_ << '\n';
  }

  void trailer(std::uint64_t seed, const std::string& params) {
    os_ << "# qising v" << kVersion << " seed=" << seed << " params=" << params
        << '\n';
  }

 private:
  std::ostream& os_;
};

}  // namespace qising
