#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cood/datagen.hpp"
#include "cood/diagnostics.hpp"
#include "cood/scoring.hpp"
#include "cood/training.hpp"

namespace cood::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Optional overrides applied on top of a synthetic pair preset.
struct PairOverrides {
  std::optional<std::size_t> num_classes;
  std::optional<std::size_t> input_dim;
  std::optional<double> id_class_separation;
  std::optional<double> ood_shift;
  std::optional<std::size_t> samples_per_class;
  std::optional<std::size_t> test_samples_per_class;
  std::optional<double> style_scale;
  std::optional<std::size_t> style_rank;
  std::optional<double> class_spread;
  std::optional<double> residual_noise;

  void apply(PairConfig& cfg) const;
};

struct ScoringConfig {
  double jitter_scale = 1e-3;
  std::optional<double> kde_bandwidth;
  MahalanobisAggregation aggregation = MahalanobisAggregation::min_distance;
};

struct DiagnosticsConfig {
  double clp_threshold = 6.5;
  std::size_t ensemble_size = 3;
  KlAggregate kl_aggregate = KlAggregate::sum;
};

struct BenchmarkConfig {
  std::vector<std::string> pairs = {"near", "far", "shared-style"};
  std::vector<ModelKind> models = {ModelKind::ce, ModelKind::moco, ModelKind::supclr};
  std::size_t seeds = 5;
  std::uint64_t seed_base = 0;
};

struct RunConfig {
  TrainConfig train;
  PairOverrides data;
  /// Held-out fraction when a CSV pair directory has no id_test.csv.
  double test_fraction = 0.2;
  ScoringConfig scoring;
  DiagnosticsConfig diagnostics;
  BenchmarkConfig benchmark;
};

/// Every accepted key with its default rendered as text, in table order.
std::vector<std::pair<std::string, std::string>> config_key_defaults();

/// Applies one `key = value` assignment. Throws ConfigError on unknown keys
/// (naming the closest valid key) and on malformed values.
void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);

/// Parses line-oriented `key = value` text with `#` comments. Duplicate keys
/// are rejected. `source` labels error messages.
RunConfig parse_config(std::string_view text, std::string_view source = "<config>");

/// Reads a config file, then applies `overrides` (later wins).
RunConfig load_config(const std::optional<std::filesystem::path>& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides = {});

nlohmann::json config_to_json(const RunConfig& cfg);

/// FNV-1a (64-bit) of the canonical JSON dump, as 16 hex digits. Object keys
/// are sorted in the dump, so the digest ignores key order.
std::string config_digest(const nlohmann::json& config);

std::string fnv1a_hex(std::string_view bytes);

std::size_t levenshtein(std::string_view a, std::string_view b);

}  // namespace cood::cli
