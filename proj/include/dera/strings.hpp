#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace dera {

std::string trim(std::string_view text);

/// Splits on '\n' and strips a trailing '\r' from each line.
std::vector<std::string> split_lines(std::string_view text);

std::vector<std::string> whitespace_tokens(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view separator);

std::string to_lower(std::string_view text);

/// Renders count/total as a percentage: integral values without a decimal
/// ("80%"), everything else with one ("33.3%").
std::string format_percent(long count, long total);

}  // namespace dera
