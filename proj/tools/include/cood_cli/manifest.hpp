#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace cood::cli {

struct InputDigest {
  std::filesystem::path path;
  std::string fnv1a;
};

/// Record of one CLI invocation, written as manifest.json in the output
/// directory after every listed output has been written.
struct RunManifest {
  std::string run_id;
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config;
  std::string config_digest;
  nlohmann::json seeds;
  nlohmann::json extra = nlohmann::json::object();
  std::vector<InputDigest> inputs;
  std::vector<std::string> outputs;  // relative to the output directory
  double wall_clock_seconds = 0.0;
};

nlohmann::json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

InputDigest digest_file(const std::filesystem::path& path);

/// Writes via a temporary file and rename so readers never see partial files.
void write_text_file(const std::filesystem::path& path, std::string_view contents);
std::string read_text_file(const std::filesystem::path& path);

/// Verifies every listed output exists and is non-empty, then writes
/// `dir/name`. Throws std::runtime_error otherwise.
void write_manifest(const std::filesystem::path& dir, const RunManifest& m, const std::string& name = "manifest.json");

}  // namespace cood::cli
