#pragma once

#include <span>
#include <stdexcept>
#include <vector>

namespace cood {

/// OOD scores for ID and OOD test samples. Higher means more OOD; OOD is the
/// positive class throughout.
class ScoreSet {
 public:
  ScoreSet(std::vector<double> id_scores, std::vector<double> ood_scores);

  const std::vector<double>& id_scores() const noexcept { return id_; }
  const std::vector<double>& ood_scores() const noexcept { return ood_; }

 private:
  std::vector<double> id_;
  std::vector<double> ood_;
};

/// P(ood > id) + ½·P(ood == id), from exact integer pair counts.
double auroc(const ScoreSet& s);

/// Area under the precision-recall curve with step interpolation: sum over
/// distinct thresholds (ties grouped) of Δrecall · precision.
double aupr(const ScoreSet& s);

/// FPR at the largest threshold t for which TPR(score ≥ t) ≥ tpr_target.
double fpr_at_tpr(const ScoreSet& s, double tpr_target = 0.95);

struct DetectionMetrics {
  double auroc = 0.0;
  double aupr = 0.0;
  double fpr_at_95_tpr = 0.0;
};

DetectionMetrics detection_metrics(const ScoreSet& s);

}  // namespace cood
