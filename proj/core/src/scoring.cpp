#include "cood/scoring.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>

#include "cood/losses.hpp"

namespace cood {

MahalanobisModel fit_mahalanobis(const Matrix& features, std::span<const int> labels, double jitter_scale,
                                 MahalanobisAggregation aggregation) {
  if (labels.size() != features.rows()) throw ShapeError("fit_mahalanobis: label count mismatch");
  if (!(jitter_scale >= 0.0)) throw FitError("fit_mahalanobis: jitter scale must be >= 0");
  int max_label = -1;
  for (int y : labels) {
    if (y < 0) throw FitError("fit_mahalanobis: negative label");
    max_label = std::max(max_label, y);
  }
  const auto k = static_cast<std::size_t>(max_label + 1);
  if (k < 2) throw FitError("fit_mahalanobis: need at least 2 classes");

  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < labels.size(); ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);

  MahalanobisModel model;
  model.jitter_scale = jitter_scale;
  model.aggregation = aggregation;
  for (std::size_t c = 0; c < k; ++c) {
    if (members[c].size() <= 1) {
      throw FitError("fit_mahalanobis: class " + std::to_string(c) + " has " +
                     std::to_string(members[c].size()) + " samples; need at least 2");
    }
    const Matrix rows = features.select_rows(members[c]);
    Gaussian raw = fit_gaussian(rows, 0.0);
    ClassGaussian cls;
    cls.jitter = default_jitter(raw.covariance, jitter_scale);
    for (std::size_t i = 0; i < raw.dim(); ++i) raw.covariance(i, i) += cls.jitter;
    cls.mean = std::move(raw.mean);
    cls.covariance = std::move(raw.covariance);
    try {
      const SpdFactor f = factor_spd(cls.covariance);
      cls.precision = f.inverse();
      cls.log_det = f.log_det();
    } catch (const SingularityError& e) {
      throw FitError("fit_mahalanobis: class " + std::to_string(c) + ": " + e.what());
    }
    cls.count = members[c].size();
    model.classes.push_back(std::move(cls));
  }
  return model;
}

double squared_mahalanobis(const ClassGaussian& cls, std::span<const double> x) {
  const std::size_t d = cls.mean.size();
  if (x.size() != d) throw ShapeError("squared_mahalanobis: dimension mismatch");
  std::vector<double> delta(d);
  for (std::size_t i = 0; i < d; ++i) delta[i] = x[i] - cls.mean[i];
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) s += delta[i] * dot(cls.precision.row(i), delta);
  return std::max(s, 0.0);
}

double score_mahalanobis(const MahalanobisModel& model, std::span<const double> x) {
  if (x.size() != model.dim()) {
    throw ShapeError("score_mahalanobis: feature has " + std::to_string(x.size()) + " dims, model has " +
                     std::to_string(model.dim()));
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& cls : model.classes) {
    double d = squared_mahalanobis(cls, x);
    if (model.aggregation == MahalanobisAggregation::max_log_likelihood) d += cls.log_det;
    best = std::min(best, d);
  }
  return best;
}

std::vector<double> score_mahalanobis(const MahalanobisModel& model, const Matrix& xs) {
  std::vector<double> out(xs.rows());
  for (std::size_t r = 0; r < xs.rows(); ++r) out[r] = score_mahalanobis(model, xs.row(r));
  return out;
}

KdeModel::KdeModel(Matrix features, double bandwidth) : features_(std::move(features)), bandwidth_(bandwidth) {
  if (features_.rows() == 0) throw FitError("KdeModel: no stored features");
  if (!(bandwidth_ > 0.0 && std::isfinite(bandwidth_))) throw FitError("KdeModel: bandwidth must be finite and > 0");
  for (std::size_t r = 0; r < features_.rows(); ++r) {
    if (std::abs(l2_norm(features_.row(r)) - 1.0) > 1e-6)
      throw FitError("KdeModel: stored feature row " + std::to_string(r) + " is not L2-normalized");
  }
}

double scott_bandwidth(const Matrix& features) {
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  if (n < 2) throw FitError("scott_bandwidth: need at least 2 samples");
  double mean_std = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += features(r, j);
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t r = 0; r < n; ++r) ss += (features(r, j) - mean) * (features(r, j) - mean);
    mean_std += std::sqrt(ss / static_cast<double>(n - 1));
  }
  mean_std /= static_cast<double>(d);
  return mean_std * std::pow(static_cast<double>(n), -1.0 / (static_cast<double>(d) + 4.0));
}

KdeModel fit_kde(const Matrix& features, std::optional<double> bandwidth_override) {
  if (features.rows() < 2) throw FitError("fit_kde: need at least 2 samples");
  if (bandwidth_override) {
    if (!(*bandwidth_override > 0.0)) throw FitError("fit_kde: bandwidth override must be > 0");
    return KdeModel(features, *bandwidth_override);
  }
  const double h = scott_bandwidth(features);
  if (!(h > 0.0)) throw FitError("fit_kde: degenerate bandwidth (features have zero spread)");
  return KdeModel(features, h);
}

double score_kde(const KdeModel& model, std::span<const double> x) {
  const std::size_t d = model.dim();
  if (x.size() != d) {
    throw ShapeError("score_kde: feature has " + std::to_string(x.size()) + " dims, model has " +
                     std::to_string(d));
  }
  const double h2 = model.bandwidth() * model.bandwidth();
  const auto& z = model.features();
  std::vector<double> terms(z.rows());
  for (std::size_t j = 0; j < z.rows(); ++j) {
    auto zj = z.row(j);
    double dist2 = 0.0;
    for (std::size_t c = 0; c < d; ++c) dist2 += (x[c] - zj[c]) * (x[c] - zj[c]);
    terms[j] = -dist2 / (2.0 * h2);
  }
  const double log_norm = 0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi * h2);
  return -(log_sum_exp(terms) - std::log(static_cast<double>(z.rows())) - log_norm);
}

std::vector<double> score_kde(const KdeModel& model, const Matrix& xs) {
  std::vector<double> out(xs.rows());
  for (std::size_t r = 0; r < xs.rows(); ++r) out[r] = score_kde(model, xs.row(r));
  return out;
}

std::string format_score_csv(std::span<const double> id_scores, std::span<const double> ood_scores) {
  std::string out = "split,index,score\n";
  char buf[64];
  auto emit = [&](const char* split, std::span<const double> scores) {
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), scores[i], std::chars_format::general, 17);
      out += split;
      out += ',';
      out += std::to_string(i);
      out += ',';
      out.append(buf, res.ptr);
      out += '\n';
    }
  };
  emit("id_test", id_scores);
  emit("ood_test", ood_scores);
  return out;
}

void write_score_csv(const std::filesystem::path& path, std::span<const double> id_scores,
                     std::span<const double> ood_scores) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << format_score_csv(id_scores, ood_scores);
}

}  // namespace cood
