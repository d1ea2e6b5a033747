#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "cood/numerics.hpp"
#include "cood/training.hpp"

namespace cood {

/// N cross-entropy classifiers sharing input size and class count.
class ClassifierEnsemble {
 public:
  explicit ClassifierEnsemble(std::vector<TrainedModel> members);

  const std::vector<TrainedModel>& members() const noexcept { return members_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t input_dim() const noexcept { return input_dim_; }

  /// Row i is c(xᵢ) = (1/N)·Σⱼ pʲ(ŷ | xᵢ).
  Matrix confusion_probabilities(const Matrix& xs) const;

 private:
  std::vector<TrainedModel> members_;
  std::size_t num_classes_ = 0;
  std::size_t input_dim_ = 0;
};

/// Ensemble-mean class probabilities for one input.
std::vector<double> confusion_probability(const ClassifierEnsemble& ensemble, std::span<const double> x);

enum class OodCategory { near, far, near_and_far };

std::string_view to_string(OodCategory category);

/// Compares |CLP| bound magnitudes with the threshold: both above → far,
/// both at or below → near, otherwise near-and-far.
OodCategory categorize_clp_bounds(double lower, double upper, double threshold = 6.5);

inline constexpr double kClpFloor = 1e-300;

struct ClpResult {
  std::vector<double> per_class;  // ln of mean confusion probability, ≤ 0
  double lower = 0.0;
  double upper = 0.0;
  OodCategory category = OodCategory::near;
  /// Classes whose mean probability underflowed and were clamped to ln(1e-300).
  std::vector<bool> clamped;

  bool any_clamped() const noexcept;
};

/// Class-wise confusion log probability from per-sample class probabilities
/// (rows of `probabilities`, one per OOD test sample).
ClpResult clp_from_probabilities(const Matrix& probabilities, double threshold = 6.5);
ClpResult clp(const ClassifierEnsemble& ensemble, const Matrix& ood_inputs, double threshold = 6.5);

enum class KlAggregate { sum, mean };

struct OverallClassKl {
  std::vector<double> per_class;  // KL(Overall ‖ Class_k)
  double expected = 0.0;
};

/// Gaussian fits to all features and to each class (same jitter policy),
/// then KL(Overall ‖ Class_k); `expected` is their sum (or mean).
OverallClassKl overall_class_kl(const Matrix& features, std::span<const int> labels,
                                double jitter_scale = 1e-3, KlAggregate aggregate = KlAggregate::sum);

/// Divides by the maximum entry.
std::vector<double> normalized_kl(std::span<const double> per_class);

/// KL between the uniform distribution over the D = min(N, cols) singular
/// values and the normalized singular-value spectrum. Zero for a flat
/// spectrum; larger when variance concentrates in few directions.
double spectral_decay(const Matrix& features);

struct Correlation {
  double spearman = 0.0;
  double pearson = 0.0;
};

/// Ranks with ties assigned their average rank (1-based).
std::vector<double> average_ranks(std::span<const double> values);
double pearson_correlation(std::span<const double> a, std::span<const double> b);
Correlation rank_correlation(std::span<const double> a, std::span<const double> b);

}  // namespace cood
