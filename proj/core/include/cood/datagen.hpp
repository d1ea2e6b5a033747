#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cood/numerics.hpp"

namespace cood {

using Rng = std::mt19937_64;

/// Thrown for invalid datasets and dataset configuration.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inputs with integer class labels in [0, K).
///
/// The constructor enforces finite inputs, matching lengths and the label
/// range. Training-time code additionally calls require_min_per_class(2).
class LabeledDataset {
 public:
  LabeledDataset() = default;
  /// `num_classes` of 0 means max(label) + 1.
  LabeledDataset(Matrix inputs, std::vector<int> labels, std::size_t num_classes = 0);

  const Matrix& inputs() const noexcept { return inputs_; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t dim() const noexcept { return inputs_.cols(); }

  /// Original label value for each contiguous class index (identity unless
  /// the dataset was read from a file with non-contiguous labels).
  const std::vector<long long>& label_names() const noexcept { return label_names_; }
  void set_label_names(std::vector<long long> names);

  std::vector<std::size_t> class_counts() const;
  std::vector<std::size_t> indices_of(int label) const;
  void require_min_per_class(std::size_t minimum) const;

  LabeledDataset subset(std::span<const std::size_t> indices) const;

  bool operator==(const LabeledDataset&) const = default;

 private:
  Matrix inputs_;
  std::vector<int> labels_;
  std::size_t num_classes_ = 0;
  std::vector<long long> label_names_;
};

enum class OodMode { near, far, shared_style };

std::string_view to_string(OodMode mode);
OodMode parse_ood_mode(std::string_view text);

/// Synthetic ID/OOD pair description. Lengths are in units of the isotropic
/// per-class noise standard deviation.
struct PairConfig {
  std::size_t num_classes = 8;
  std::size_t input_dim = 32;
  /// Distance between any two ID class means (simplex edge length).
  double id_class_separation = 6.0;
  /// Displacement of the OOD mixture center from the ID mixture center.
  double ood_shift = 10.0;
  OodMode ood_mode = OodMode::far;
  std::size_t samples_per_class = 200;
  /// 0 selects samples_per_class / 2.
  std::size_t test_samples_per_class = 0;
  /// Standard deviation of the shared anisotropic ("style") component.
  double style_scale = 0.0;
  std::size_t style_rank = 4;
  /// Noise std multiplier for coordinates outside the class-mean block
  /// (the first min(K, d) coordinates). Values below 1 leave quiet
  /// directions in which ID data barely varies.
  double residual_noise = 1.0;
  /// Class k noise std is 1 + class_spread·k/(K-1); 0 keeps classes identical.
  double class_spread = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct DatasetPair {
  LabeledDataset id_train;
  LabeledDataset id_test;
  LabeledDataset ood_test;
};

/// Draws ID train/test and OOD test sets. Deterministic given cfg.seed.
DatasetPair generate_pair(const PairConfig& cfg);

/// Named desk-scale presets: "near", "far", "shared-style".
PairConfig preset_pair(std::string_view name);

/// Vector stand-in for image augmentations: random global scaling (intensity
/// change), additive Gaussian noise and independent coordinate masking
/// (information removal).
struct AugmentPolicy {
  double noise_sigma = 0.2;
  double mask_prob = 0.1;
  double scale_lo = 0.8;
  double scale_hi = 1.2;

  void validate() const;

  bool operator==(const AugmentPolicy&) const = default;
};

/// Returns (x·s + ε) with each coordinate zeroed independently with
/// probability mask_prob, s ~ U(scale_lo, scale_hi), ε ~ N(0, σ²I).
std::vector<double> augment(std::span<const double> x, const AugmentPolicy& policy, Rng& rng);

/// Row-wise augment().
Matrix augment_rows(const Matrix& x, const AugmentPolicy& policy, Rng& rng);

/// Per-class shuffle then split; each class contributes round(n_k·fraction)
/// test samples, clamped to [1, n_k - 1].
std::pair<LabeledDataset, LabeledDataset> stratified_split(const LabeledDataset& ds,
                                                           double test_fraction,
                                                           std::uint64_t seed);

// ---- feature CSV ----------------------------------------------------------

enum class CsvErrorKind { empty_file, missing_header, non_numeric, ragged_row, io };

std::string_view to_string(CsvErrorKind kind);

class CsvError : public DataError {
 public:
  CsvError(CsvErrorKind kind, std::size_t line, std::size_t column, const std::string& detail);
  CsvErrorKind kind() const noexcept { return kind_; }
  /// 1-based line number, 0 when not applicable.
  std::size_t line() const noexcept { return line_; }
  /// 1-based column number, 0 when not applicable.
  std::size_t column() const noexcept { return column_; }

 private:
  CsvErrorKind kind_;
  std::size_t line_;
  std::size_t column_;
};

/// Parses `label,f0,...,f{d-1}`. Labels are remapped to contiguous indices in
/// first-appearance order; the original values are kept as label_names().
LabeledDataset parse_features_csv(std::string_view text);
LabeledDataset load_features_csv(const std::filesystem::path& path);

/// Writes original label names and 17-significant-digit features.
std::string format_features_csv(const LabeledDataset& ds);
void write_features_csv(const LabeledDataset& ds, const std::filesystem::path& path);

}  // namespace cood
