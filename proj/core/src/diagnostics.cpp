#include "cood/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace cood {

ClassifierEnsemble::ClassifierEnsemble(std::vector<TrainedModel> members) : members_(std::move(members)) {
  if (members_.empty()) throw std::invalid_argument("ClassifierEnsemble: needs at least one member");
  num_classes_ = members_.front().num_classes;
  input_dim_ = members_.front().input_dim;
  for (const auto& m : members_) {
    if (!m.head) throw std::invalid_argument("ClassifierEnsemble: member without classifier head");
    if (m.num_classes != num_classes_ || m.head->out_dim() != num_classes_)
      throw std::invalid_argument("ClassifierEnsemble: members disagree on class count");
    if (m.input_dim != input_dim_) throw std::invalid_argument("ClassifierEnsemble: members disagree on input size");
  }
}

Matrix ClassifierEnsemble::confusion_probabilities(const Matrix& xs) const {
  if (xs.cols() != input_dim_) {
    throw ShapeError("confusion_probabilities: input has " + std::to_string(xs.cols()) +
                     " dims, ensemble expects " + std::to_string(input_dim_));
  }
  Matrix acc(xs.rows(), num_classes_);
  for (const auto& m : members_) acc = acc + m.class_probabilities(xs);
  return (1.0 / static_cast<double>(members_.size())) * acc;
}

std::vector<double> confusion_probability(const ClassifierEnsemble& ensemble, std::span<const double> x) {
  Matrix one(1, x.size(), std::vector<double>(x.begin(), x.end()));
  const Matrix p = ensemble.confusion_probabilities(one);
  return {p.row(0).begin(), p.row(0).end()};
}

std::string_view to_string(OodCategory category) {
  switch (category) {
    case OodCategory::near: return "near";
    case OodCategory::far: return "far";
    case OodCategory::near_and_far: return "near-and-far";
  }
  return "unknown";
}

OodCategory categorize_clp_bounds(double lower, double upper, double threshold) {
  const bool lower_far = std::abs(lower) > threshold;
  const bool upper_far = std::abs(upper) > threshold;
  if (lower_far && upper_far) return OodCategory::far;
  if (!lower_far && !upper_far) return OodCategory::near;
  return OodCategory::near_and_far;
}

bool ClpResult::any_clamped() const noexcept {
  return std::any_of(clamped.begin(), clamped.end(), [](bool b) { return b; });
}

ClpResult clp_from_probabilities(const Matrix& probabilities, double threshold) {
  if (probabilities.rows() == 0) throw std::invalid_argument("clp: OOD test set is empty");
  const std::size_t k = probabilities.cols();
  ClpResult out;
  out.per_class.resize(k);
  out.clamped.assign(k, false);
  for (std::size_t c = 0; c < k; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < probabilities.rows(); ++r) mean += probabilities(r, c);
    mean /= static_cast<double>(probabilities.rows());
    if (mean < kClpFloor) {
      mean = kClpFloor;
      out.clamped[c] = true;
    }
    out.per_class[c] = std::min(std::log(mean), 0.0);
  }
  const auto [lo, hi] = std::minmax_element(out.per_class.begin(), out.per_class.end());
  out.lower = *lo;
  out.upper = *hi;
  out.category = categorize_clp_bounds(out.lower, out.upper, threshold);
  return out;
}

ClpResult clp(const ClassifierEnsemble& ensemble, const Matrix& ood_inputs, double threshold) {
  return clp_from_probabilities(ensemble.confusion_probabilities(ood_inputs), threshold);
}

OverallClassKl overall_class_kl(const Matrix& features, std::span<const int> labels, double jitter_scale,
                                KlAggregate aggregate) {
  if (labels.size() != features.rows()) throw ShapeError("overall_class_kl: label count mismatch");
  int max_label = -1;
  for (int y : labels) {
    if (y < 0) throw std::invalid_argument("overall_class_kl: negative label");
    max_label = std::max(max_label, y);
  }
  const auto k = static_cast<std::size_t>(max_label + 1);
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < labels.size(); ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);
  for (std::size_t c = 0; c < k; ++c) {
    if (members[c].size() < 2)
      throw std::invalid_argument("overall_class_kl: degenerate class " + std::to_string(c) + " (fewer than 2 samples)");
  }

  const Gaussian overall = fit_gaussian(features, jitter_scale);
  const SpdFactor overall_factor = factor_spd(overall.covariance);
  OverallClassKl out;
  for (std::size_t c = 0; c < k; ++c) {
    const Gaussian cls = fit_gaussian(features.select_rows(members[c]), jitter_scale);
    const double kl = gaussian_kl(overall, overall_factor, cls, factor_spd(cls.covariance));
    out.per_class.push_back(std::max(kl, 0.0));
  }
  out.expected = std::accumulate(out.per_class.begin(), out.per_class.end(), 0.0);
  if (aggregate == KlAggregate::mean) out.expected /= static_cast<double>(k);
  return out;
}

std::vector<double> normalized_kl(std::span<const double> per_class) {
  if (per_class.empty()) throw std::invalid_argument("normalized_kl: empty input");
  const double top = *std::max_element(per_class.begin(), per_class.end());
  if (!(top > 0.0)) throw std::invalid_argument("normalized_kl: maximum entry must be > 0");
  std::vector<double> out(per_class.begin(), per_class.end());
  for (double& v : out) v /= top;
  return out;
}

double spectral_decay(const Matrix& features) {
  const auto sigma = singular_values(features);
  const double total = std::accumulate(sigma.begin(), sigma.end(), 0.0);
  if (!(total > 0.0)) throw std::invalid_argument("spectral_decay: feature matrix is all zero");
  const auto d = static_cast<double>(sigma.size());

  std::vector<double> p(sigma.size());
  double renorm = 0.0;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    p[i] = std::max(sigma[i] / total, 1e-12);
    renorm += p[i];
  }
  double rho = 0.0;
  for (double pi : p) rho += (1.0 / d) * std::log((1.0 / d) / (pi / renorm));
  return rho;
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

double pearson_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("correlation: length mismatch");
  const auto n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw std::invalid_argument("correlation: undefined for constant input");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

Correlation rank_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("rank_correlation: length mismatch");
  if (a.size() < 3) throw std::invalid_argument("rank_correlation: need at least 3 points");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return {pearson_correlation(ra, rb), pearson_correlation(a, b)};
}

}  // namespace cood
