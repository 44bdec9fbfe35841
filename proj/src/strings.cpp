#include "dera/strings.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>

namespace dera {

namespace {

constexpr std::string_view kWhitespace = " \t\r\n\f\v";

}  // namespace

std::string trim(std::string_view text) {
  const auto begin = text.find_first_not_of(kWhitespace);
  if (begin == std::string_view::npos) return "";
  const auto end = text.find_last_not_of(kWhitespace);
  return std::string(text.substr(begin, end - begin + 1));
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  size_t start = 0;
  while (start <= text.size()) {
    auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    std::string_view line = text.substr(start, pos - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    if (pos == text.size()) break;
    start = pos + 1;
  }
  return lines;
}

std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && kWhitespace.find(text[i]) != std::string_view::npos) ++i;
    size_t start = i;
    while (i < text.size() && kWhitespace.find(text[i]) == std::string_view::npos) ++i;
    if (i > start) tokens.emplace_back(text.substr(start, i - start));
  }
  return tokens;
}

std::string join(const std::vector<std::string>& parts, std::string_view separator) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += separator;
    out += parts[i];
  }
  return out;
}

std::string to_lower(std::string_view text) {
  std::string out(text);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string format_percent(long count, long total) {
  const double pct = 100.0 * static_cast<double>(count) / static_cast<double>(total);
  const double rounded = std::round(pct);
  char buf[32];
  if (std::fabs(pct - rounded) < 1e-9) {
    std::snprintf(buf, sizeof(buf), "%ld%%", static_cast<long>(rounded));
  } else {
    std::snprintf(buf, sizeof(buf), "%.1f%%", pct);
  }
  return buf;
}

}  // namespace dera
