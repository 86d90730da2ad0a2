#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace facecap {

/// `key = value` lines; `#` starts a comment; blank lines are skipped.
/// Throws ParseError (with line number) on a line without `=` or an empty key,
/// and on a repeated key.
std::map<std::string, std::string> parse_config(const std::string& text);
std::map<std::string, std::string> load_config(const std::filesystem::path& path);

/// Strict numeric conversion of a config value; throws ParseError naming the key.
double config_number(const std::map<std::string, std::string>& config, const std::string& key, double fallback);

} // namespace facecap
