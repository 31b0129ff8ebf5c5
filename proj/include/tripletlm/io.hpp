#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>

namespace tripletlm {

/// Writes `content` to a sibling temporary file and renames it over `path`,
/// so readers never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// Fixed 6-decimal rendering used by every CSV output.
std::string format_fixed(double value);

/// `key = value` lines; `#` starts a comment. Duplicate keys are errors.
std::map<std::string, std::string> parse_key_values(std::istream& in,
                                                    const std::string& source);
std::map<std::string, std::string> load_key_values(
    const std::filesystem::path& path);

}  // namespace tripletlm
