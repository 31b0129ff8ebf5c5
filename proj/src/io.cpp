#include "tripletlm/io.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>
#include <system_error>

#include "tripletlm/errors.hpp"

namespace tripletlm {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path,
                       std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error("io", "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("io", "cannot rename onto " + path.string() + ": " +
                          ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_fixed(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  return buf;
}

std::map<std::string, std::string> parse_key_values(std::istream& in,
                                                    const std::string& source) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    std::string key = trim(std::string_view(content).substr(0, eq));
    std::string value = trim(std::string_view(content).substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": empty key");
    }
    if (!out.emplace(key, value).second) {
      throw ConfigError(source + ":" + std::to_string(line_no) +
                        ": duplicate key '" + key + "'");
    }
  }
  return out;
}

std::map<std::string, std::string> load_key_values(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_key_values(in, path.string());
}

}  // namespace tripletlm
