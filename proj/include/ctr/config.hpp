#pragma once

// JSON config helpers with path-qualified diagnostics.

#include <filesystem>
#include <string>

#include "json.hpp"

#include "ctr/errors.hpp"

namespace ctr::config {

// Parses a JSON file. Missing files raise ConfigError("file not found: <path>");
// syntax errors carry "<path>:<line>:<column>".
nlohmann::json load_json(const std::filesystem::path& path);

// Parses JSON text; `origin` names the source in diagnostics.
nlohmann::json parse_json(const std::string& text, const std::string& origin);

const nlohmann::json& require(const nlohmann::json& j, const std::string& key, const std::string& where);

template <typename T>
T get(const nlohmann::json& j, const std::string& key, const std::string& where) {
  const auto& v = require(j, key, where);
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "/" + key + ": " + e.what());
  }
}

template <typename T>
T get_or(const nlohmann::json& j, const std::string& key, const std::string& where, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  return get<T>(j, key, where);
}

// 64-bit FNV-1a over the compact dump; stable across runs and platforms.
std::uint64_t hash_json(const nlohmann::json& j);
std::string hex64(std::uint64_t v);

}  // namespace ctr::config
