#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cood/numerics.hpp"

namespace cood {

/// Thrown when a scoring model cannot be fitted to the given features.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class MahalanobisAggregation {
  /// min_k (x−μ_k)ᵀ Σ_k⁻¹ (x−μ_k)
  min_distance,
  /// min_k [(x−μ_k)ᵀ Σ_k⁻¹ (x−μ_k) + ln det Σ_k], i.e. the negative of the
  /// best class log-likelihood up to constants.
  max_log_likelihood,
};

struct ClassGaussian {
  std::vector<double> mean;
  Matrix covariance;  // includes jitter
  Matrix precision;
  double jitter = 0.0;
  double log_det = 0.0;
  std::size_t count = 0;
};

struct MahalanobisModel {
  std::vector<ClassGaussian> classes;
  double jitter_scale = 1e-3;
  MahalanobisAggregation aggregation = MahalanobisAggregation::min_distance;

  std::size_t dim() const noexcept { return classes.empty() ? 0 : classes.front().mean.size(); }
};

/// Class-conditional Gaussians with class-dependent covariance. Each class
/// covariance uses denominator N_k − 1 plus jitter_scale·trace(Σ_k)/D on the
/// diagonal.
MahalanobisModel fit_mahalanobis(const Matrix& features, std::span<const int> labels,
                                 double jitter_scale = 1e-3,
                                 MahalanobisAggregation aggregation = MahalanobisAggregation::min_distance);

double squared_mahalanobis(const ClassGaussian& cls, std::span<const double> x);

/// Higher means more out-of-distribution.
double score_mahalanobis(const MahalanobisModel& model, std::span<const double> x);
std::vector<double> score_mahalanobis(const MahalanobisModel& model, const Matrix& xs);

/// Gaussian kernel density over stored L2-normalized training features.
class KdeModel {
 public:
  KdeModel(Matrix features, double bandwidth);

  const Matrix& features() const noexcept { return features_; }
  double bandwidth() const noexcept { return bandwidth_; }
  std::size_t dim() const noexcept { return features_.cols(); }
  std::size_t size() const noexcept { return features_.rows(); }

 private:
  Matrix features_;
  double bandwidth_;
};

/// Scott's rule: mean per-dimension standard deviation · N^(−1/(D+4)).
double scott_bandwidth(const Matrix& features);

KdeModel fit_kde(const Matrix& features, std::optional<double> bandwidth_override = std::nullopt);

/// −ln[(1/N)·Σⱼ (2πh²)^(−D/2)·exp(−‖x−zⱼ‖²/(2h²))], via log-sum-exp.
double score_kde(const KdeModel& model, std::span<const double> x);
std::vector<double> score_kde(const KdeModel& model, const Matrix& xs);

/// `split,index,score` rows for id_test then ood_test.
std::string format_score_csv(std::span<const double> id_scores, std::span<const double> ood_scores);
void write_score_csv(const std::filesystem::path& path, std::span<const double> id_scores,
                     std::span<const double> ood_scores);

}  // namespace cood
