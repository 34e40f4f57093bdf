#pragma once

// Command-line front end: train, evaluate, follow, compare-jacobian,
// export-workspace, plot, trace and validate.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace ctr::cli {

inline constexpr const char* kArtifactVersion = "0.1.0";
// Relative --out directories are resolved against this variable when set.
inline constexpr const char* kOutputRootEnv = "CTR_OUTPUT_ROOT";

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string artifact_version = kArtifactVersion;
  std::string started_at, finished_at;  // ISO-8601 UTC
  std::vector<std::string> arguments;
  std::vector<std::filesystem::path> outputs;

  nlohmann::json to_json() const;
};

std::string utc_now();
std::filesystem::path resolve_output_dir(const std::filesystem::path& out);

// Returns the process exit code; diagnostics go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ctr::cli
