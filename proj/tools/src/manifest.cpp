#include "cood_cli/manifest.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cood/datagen.hpp"
#include "cood_cli/config.hpp"

namespace cood::cli {

using nlohmann::json;

json manifest_to_json(const RunManifest& m) {
  json inputs = json::array();
  for (const auto& in : m.inputs) inputs.push_back({{"path", in.path.generic_string()}, {"fnv1a", in.fnv1a}});
  return {{"run_id", m.run_id},
          {"command", m.command},
          {"argv", m.argv},
          {"config", m.config},
          {"config_digest", m.config_digest},
          {"seeds", m.seeds},
          {"extra", m.extra},
          {"inputs", inputs},
          {"outputs", m.outputs},
          {"wall_clock_seconds", m.wall_clock_seconds}};
}

RunManifest manifest_from_json(const json& j) {
  RunManifest m;
  m.run_id = j.at("run_id").get<std::string>();
  m.command = j.at("command").get<std::string>();
  m.argv = j.at("argv").get<std::vector<std::string>>();
  m.config = j.at("config");
  m.config_digest = j.at("config_digest").get<std::string>();
  m.seeds = j.at("seeds");
  m.extra = j.value("extra", json::object());
  for (const auto& in : j.at("inputs")) m.inputs.push_back({in.at("path").get<std::string>(), in.at("fnv1a").get<std::string>()});
  m.outputs = j.at("outputs").get<std::vector<std::string>>();
  m.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
  return m;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

InputDigest digest_file(const std::filesystem::path& path) { return {path, fnv1a_hex(read_text_file(path))}; }

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_manifest(const std::filesystem::path& dir, const RunManifest& m, const std::string& name) {
  for (const auto& rel : m.outputs) {
    const auto p = dir / rel;
    std::error_code ec;
    if (!std::filesystem::is_regular_file(p, ec) || std::filesystem::file_size(p, ec) == 0)
      throw std::runtime_error("manifest output missing or empty: " + p.string());
  }
  write_text_file(dir / name, manifest_to_json(m).dump(2) + "\n");
}

}  // namespace cood::cli
