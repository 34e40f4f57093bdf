#include "ctr/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace ctr::config {

namespace {
std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}
}  // namespace

nlohmann::json parse_json(const std::string& text, const std::string& origin) {
  try {
    return nlohmann::json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    // byte is one past the offending character
    auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
  }
}

nlohmann::json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("file not found: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json(ss.str(), path.string());
}

const nlohmann::json& require(const nlohmann::json& j, const std::string& key, const std::string& where) {
  if (!j.is_object()) throw ConfigError((where.empty() ? "/" : where) + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(where + "/" + key + ": missing required key");
  return *it;
}

std::uint64_t hash_json(const nlohmann::json& j) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace ctr::config
