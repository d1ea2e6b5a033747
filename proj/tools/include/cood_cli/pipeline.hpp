#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cood/diagnostics.hpp"
#include "cood/metrics.hpp"
#include "cood/scoring.hpp"
#include "cood/training.hpp"
#include "cood_cli/config.hpp"

namespace cood::cli {

/// `synthetic:<preset>` (or a bare preset name) or `csv:<dir>`. A CSV pair
/// directory holds id_train.csv, ood_test.csv and optionally id_test.csv.
struct PairSpec {
  std::string text;
  std::string name;  // preset name or directory stem
  std::optional<std::filesystem::path> csv_dir;

  bool synthetic() const noexcept { return !csv_dir; }
};

PairSpec parse_pair_spec(std::string_view text);

/// Synthetic pairs are drawn with `seed`; CSV pairs use it only for the
/// fallback train/test split.
DatasetPair load_pair(const PairSpec& spec, const RunConfig& cfg, std::uint64_t seed);

/// Files a pair was read from, for manifests. Empty for synthetic pairs.
std::vector<std::filesystem::path> pair_input_files(const PairSpec& spec);

enum class Inference { mahalanobis, kde };

std::string_view to_string(Inference inference);
Inference parse_inference(std::string_view text);

struct InferenceScores {
  std::vector<double> id_scores;
  std::vector<double> ood_scores;
  DetectionMetrics metrics;
};

struct ModelEvaluation {
  InferenceScores mahalanobis;
  InferenceScores kde;
  /// Spectral decay of the ID training features.
  double rho = 0.0;
  /// Overall-Class KL of the ID training features.
  OverallClassKl kl;

  const InferenceScores& scores(Inference inference) const {
    return inference == Inference::mahalanobis ? mahalanobis : kde;
  }
};

/// Scores both inference approaches. Throws ShapeError when the model's
/// input size does not match the pair.
ModelEvaluation evaluate_model(const TrainedModel& model, const DatasetPair& pair, const RunConfig& cfg);

/// Seeds of the CE ensemble members for a run seed.
std::vector<std::uint64_t> ensemble_seeds(std::uint64_t seed, std::size_t size);

/// Trains the CE ensemble on the pair's ID training split. A CE model
/// already trained with the first member's seed may be passed in for reuse.
ClassifierEnsemble train_ensemble(const DatasetPair& pair, const RunConfig& cfg, std::uint64_t seed,
                                  const TrainedModel* first_member = nullptr);

struct DiagnosticsReport {
  ModelKind model = ModelKind::ce;
  std::string pair;
  Inference inference = Inference::mahalanobis;
  DetectionMetrics metrics;
  ClpResult clp;
  double clp_threshold = 6.5;
  OverallClassKl kl;
  std::vector<double> normalized_kl;
  double rho = 0.0;
  /// Absent when KL or CLP is constant across classes.
  std::optional<Correlation> correlation;
  std::uint64_t train_seed = 0;
  std::uint64_t data_seed = 0;
  std::vector<std::uint64_t> ensemble_seeds;
  std::string config_digest;
};

DiagnosticsReport make_report(const TrainedModel& model, const ModelEvaluation& eval, const ClpResult& clp,
                              const PairSpec& pair, Inference inference, const RunConfig& cfg,
                              std::uint64_t data_seed);

nlohmann::json report_to_json(const DiagnosticsReport& report);

// ---- benchmark grid -------------------------------------------------------

struct BenchmarkRow {
  ModelKind model;
  std::string pair;
  Inference inference;
  std::uint64_t seed;
  DetectionMetrics metrics;
  double rho;
  double expected_kl;
  ClpResult clp;
};

struct KlClpRow {
  ModelKind model;
  std::string pair;
  std::uint64_t seed;
  std::size_t cls;
  double kl;
  double normalized_kl;
  double clp;
};

struct CorrelationRow {
  ModelKind model;
  std::string pair;
  std::uint64_t seed;
  std::optional<Correlation> correlation;
};

struct BenchmarkResult {
  std::vector<BenchmarkRow> rows;
  std::vector<KlClpRow> kl_clp;
  std::vector<CorrelationRow> correlations;
};

/// Runs every (pair, seed, model) cell and both inference approaches. Rows
/// are ordered by model, pair, inference, then seed, following the order
/// given in the config.
/// `log` receives one line per finished cell.
BenchmarkResult run_benchmark(const RunConfig& cfg, const std::function<void(const std::string&)>& log = {});

std::string format_benchmark_csv(const BenchmarkResult& result);
std::string format_kl_clp_csv(const BenchmarkResult& result);
std::string format_correlation_csv(const BenchmarkResult& result);
/// Mean/min/max of ρ per (model, pair) across seeds.
std::string format_rho_summary_csv(const BenchmarkResult& result, const RunConfig& cfg);

/// Same text as printf("%.17g").
std::string format_real(double v);

}  // namespace cood::cli
