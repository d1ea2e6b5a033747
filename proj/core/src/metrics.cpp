#include "cood/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace cood {

ScoreSet::ScoreSet(std::vector<double> id_scores, std::vector<double> ood_scores)
    : id_(std::move(id_scores)), ood_(std::move(ood_scores)) {
  if (id_.empty() || ood_.empty()) throw std::invalid_argument("ScoreSet: both sides must be non-empty");
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(id_.begin(), id_.end(), finite) || !std::all_of(ood_.begin(), ood_.end(), finite))
    throw std::invalid_argument("ScoreSet: scores must be finite");
}

namespace {

struct Scored {
  double score;
  bool positive;
};

// Descending by score.
std::vector<Scored> merged(const ScoreSet& s) {
  std::vector<Scored> all;
  all.reserve(s.id_scores().size() + s.ood_scores().size());
  for (double v : s.id_scores()) all.push_back({v, false});
  for (double v : s.ood_scores()) all.push_back({v, true});
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });
  return all;
}

// Cumulative (tp, fp) after each group of tied scores, descending.
struct Step {
  double threshold;
  std::uint64_t tp;
  std::uint64_t fp;
};

std::vector<Step> threshold_steps(const ScoreSet& s) {
  const auto all = merged(s);
  std::vector<Step> steps;
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  for (std::size_t i = 0; i < all.size();) {
    const double t = all[i].score;
    for (; i < all.size() && all[i].score == t; ++i) (all[i].positive ? tp : fp) += 1;
    steps.push_back({t, tp, fp});
  }
  return steps;
}

}  // namespace

double auroc(const ScoreSet& s) {
  // Count pairs via a sorted ID list: for each OOD score, # id below and # tied.
  std::vector<double> id = s.id_scores();
  std::sort(id.begin(), id.end());
  std::uint64_t twice = 0;  // 2·#(ood > id) + #(ties)
  for (double v : s.ood_scores()) {
    const auto lo = std::lower_bound(id.begin(), id.end(), v);
    const auto hi = std::upper_bound(lo, id.end(), v);
    twice += 2 * static_cast<std::uint64_t>(lo - id.begin()) + static_cast<std::uint64_t>(hi - lo);
  }
  const double pairs = static_cast<double>(id.size()) * static_cast<double>(s.ood_scores().size());
  return static_cast<double>(twice) / (2.0 * pairs);
}

double aupr(const ScoreSet& s) {
  const double positives = static_cast<double>(s.ood_scores().size());
  double area = 0.0;
  double prev_recall = 0.0;
  for (const auto& step : threshold_steps(s)) {
    const double recall = static_cast<double>(step.tp) / positives;
    const double precision = static_cast<double>(step.tp) / static_cast<double>(step.tp + step.fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return area;
}

double fpr_at_tpr(const ScoreSet& s, double tpr_target) {
  if (!(tpr_target > 0.0 && tpr_target <= 1.0)) throw std::invalid_argument("fpr_at_tpr: target must be in (0, 1]");
  const double positives = static_cast<double>(s.ood_scores().size());
  const double negatives = static_cast<double>(s.id_scores().size());
  // Steps run from the largest threshold down; the first that reaches the
  // target is the largest qualifying threshold.
  for (const auto& step : threshold_steps(s)) {
    if (static_cast<double>(step.tp) / positives >= tpr_target) return static_cast<double>(step.fp) / negatives;
  }
  return 1.0;
}

DetectionMetrics detection_metrics(const ScoreSet& s) { return {auroc(s), aupr(s), fpr_at_tpr(s, 0.95)}; }

}  // namespace cood
