#include "cood/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cood {

LabeledDataset::LabeledDataset(Matrix inputs, std::vector<int> labels, std::size_t num_classes)
    : inputs_(std::move(inputs)), labels_(std::move(labels)) {
  if (inputs_.rows() != labels_.size()) {
    throw DataError("LabeledDataset: " + std::to_string(inputs_.rows()) + " rows but " +
                    std::to_string(labels_.size()) + " labels");
  }
  if (!inputs_.all_finite()) throw DataError("LabeledDataset: non-finite input value");
  int max_label = -1;
  for (int y : labels_) {
    if (y < 0) throw DataError("LabeledDataset: negative label " + std::to_string(y));
    max_label = std::max(max_label, y);
  }
  num_classes_ = num_classes == 0 ? static_cast<std::size_t>(max_label + 1) : num_classes;
  if (max_label >= 0 && static_cast<std::size_t>(max_label) >= num_classes_) {
    throw DataError("LabeledDataset: label " + std::to_string(max_label) + " outside [0, " +
                    std::to_string(num_classes_) + ")");
  }
  label_names_.resize(num_classes_);
  std::iota(label_names_.begin(), label_names_.end(), 0LL);
}

void LabeledDataset::set_label_names(std::vector<long long> names) {
  if (names.size() != num_classes_) throw DataError("set_label_names: wrong number of names");
  label_names_ = std::move(names);
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes_, 0);
  for (int y : labels_) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

std::vector<std::size_t> LabeledDataset::indices_of(int label) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == label) out.push_back(i);
  return out;
}

void LabeledDataset::require_min_per_class(std::size_t minimum) const {
  const auto counts = class_counts();
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] < minimum) {
      throw DataError("class " + std::to_string(k) + " has " + std::to_string(counts[k]) +
                      " samples; at least " + std::to_string(minimum) + " required");
    }
  }
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  std::vector<int> labels;
  labels.reserve(indices.size());
  for (auto i : indices) labels.push_back(labels_.at(i));
  LabeledDataset out(inputs_.select_rows(indices), std::move(labels), num_classes_);
  out.label_names_ = label_names_;
  return out;
}

std::string_view to_string(OodMode mode) {
  switch (mode) {
    case OodMode::near: return "near";
    case OodMode::far: return "far";
    case OodMode::shared_style: return "shared-style";
  }
  return "unknown";
}

OodMode parse_ood_mode(std::string_view text) {
  if (text == "near") return OodMode::near;
  if (text == "far") return OodMode::far;
  if (text == "shared-style" || text == "shared_style") return OodMode::shared_style;
  throw DataError("unknown OOD mode '" + std::string(text) + "'");
}

void PairConfig::validate() const {
  if (num_classes < 2) throw DataError("PairConfig: num_classes must be >= 2");
  if (input_dim < 2) throw DataError("PairConfig: input_dim must be >= 2");
  if (samples_per_class < 16) throw DataError("PairConfig: samples_per_class must be >= 16");
  if (!std::isfinite(id_class_separation) || id_class_separation < 0.0)
    throw DataError("PairConfig: id_class_separation must be finite and >= 0");
  if (!std::isfinite(ood_shift) || ood_shift < 0.0)
    throw DataError("PairConfig: ood_shift must be finite and >= 0");
  if (!std::isfinite(style_scale) || style_scale < 0.0)
    throw DataError("PairConfig: style_scale must be finite and >= 0");
  if (!std::isfinite(residual_noise) || residual_noise < 0.0)
    throw DataError("PairConfig: residual_noise must be finite and >= 0");
  if (!std::isfinite(class_spread) || class_spread < 0.0)
    throw DataError("PairConfig: class_spread must be finite and >= 0");
}

namespace {

// Unit vector orthogonal to `basis`; restricted to coordinates >= first_free
// when that subspace has room.
std::vector<double> random_direction(std::size_t dim, std::size_t first_free,
                                     const std::vector<std::vector<double>>& basis, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const bool restrict = dim > first_free && dim - first_free > basis.size();
  for (int attempt = 0; attempt < 64; ++attempt) {
    std::vector<double> v(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      const double draw = normal(rng);
      v[i] = (restrict && i < first_free) ? 0.0 : draw;
    }
    for (const auto& b : basis) {
      const double proj = dot(v, b);
      for (std::size_t i = 0; i < dim; ++i) v[i] -= proj * b[i];
    }
    const double n = l2_norm(v);
    if (n > 1e-6) {
      for (double& x : v) x /= n;
      return v;
    }
  }
  // Basis already spans the space; any random unit vector will do.
  std::vector<double> v(dim);
  for (double& x : v) x = normal(rng);
  const double n = l2_norm(v);
  for (double& x : v) x /= n;
  return v;
}

std::vector<std::vector<double>> simplex_means(const PairConfig& cfg, Rng& rng) {
  const std::size_t k = cfg.num_classes;
  const std::size_t d = cfg.input_dim;
  const double radius_scale = cfg.id_class_separation / std::sqrt(2.0);
  std::vector<std::vector<double>> means(k, std::vector<double>(d, 0.0));
  if (k <= d) {
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t j = 0; j < k; ++j)
        means[c][j] = radius_scale * ((c == j ? 1.0 : 0.0) - 1.0 / static_cast<double>(k));
    return means;
  }
  // More classes than dimensions: random directions at the simplex radius.
  std::normal_distribution<double> normal(0.0, 1.0);
  const double radius = radius_scale * std::sqrt(1.0 - 1.0 / static_cast<double>(k));
  for (auto& m : means) {
    for (double& x : m) x = normal(rng);
    const double n = l2_norm(m);
    for (double& x : m) x *= radius / n;
  }
  return means;
}

struct Component {
  std::vector<double> mean;
  double noise_std;
};

// Coordinates from `class_block` on carry noise scaled by `residual_noise`.
Matrix sample_components(const std::vector<Component>& comps, std::size_t per_component, std::size_t class_block,
                         double residual_noise, const std::vector<std::vector<double>>& style_axes,
                         double style_scale, std::vector<int>& labels, Rng& rng) {
  const std::size_t d = comps.front().mean.size();
  Matrix out(comps.size() * per_component, d);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::size_t r = 0;
  for (std::size_t c = 0; c < comps.size(); ++c) {
    for (std::size_t i = 0; i < per_component; ++i, ++r) {
      auto row = out.row(r);
      for (std::size_t j = 0; j < d; ++j) {
        const double std_j = comps[c].noise_std * (j < class_block ? 1.0 : residual_noise);
        row[j] = comps[c].mean[j] + std_j * normal(rng);
      }
      for (const auto& axis : style_axes) {
        const double s = style_scale * normal(rng);
        for (std::size_t j = 0; j < d; ++j) row[j] += s * axis[j];
      }
      labels.push_back(static_cast<int>(c));
    }
  }
  return out;
}

}  // namespace

DatasetPair generate_pair(const PairConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::size_t k = cfg.num_classes;
  const std::size_t d = cfg.input_dim;
  const std::size_t class_block = std::min(k, d);
  const std::size_t test_per_class =
      cfg.test_samples_per_class == 0 ? std::max<std::size_t>(cfg.samples_per_class / 2, 8)
                                      : cfg.test_samples_per_class;

  const auto means = simplex_means(cfg, rng);

  std::vector<std::vector<double>> used;
  auto take_direction = [&] {
    auto v = random_direction(d, class_block, used, rng);
    used.push_back(v);
    return v;
  };
  const auto shift_dir = take_direction();
  std::vector<std::vector<double>> id_style;
  std::vector<std::vector<double>> far_style;
  if (cfg.style_scale > 0.0) {
    for (std::size_t i = 0; i < cfg.style_rank; ++i) id_style.push_back(take_direction());
    for (std::size_t i = 0; i < cfg.style_rank; ++i) far_style.push_back(take_direction());
  }

  std::vector<Component> id_components;
  for (std::size_t c = 0; c < k; ++c) {
    const double spread = k > 1 ? cfg.class_spread * static_cast<double>(c) / static_cast<double>(k - 1) : 0.0;
    id_components.push_back({means[c], 1.0 + spread});
  }

  std::vector<Component> ood_components;
  for (std::size_t c = 0; c < k; ++c) {
    Component comp = id_components[c];
    switch (cfg.ood_mode) {
      case OodMode::near:
        break;
      case OodMode::far:
        // Antipodal simplex: novel class positions, unit noise.
        for (double& x : comp.mean) x = -x;
        comp.noise_std = 1.0;
        break;
      case OodMode::shared_style: {
        // Midpoints between neighbouring ID classes: same style, novel classes.
        const auto& next = means[(c + 1) % k];
        for (std::size_t j = 0; j < d; ++j) comp.mean[j] = 0.5 * (means[c][j] + next[j]);
        break;
      }
    }
    for (std::size_t j = 0; j < d; ++j) comp.mean[j] += cfg.ood_shift * shift_dir[j];
    ood_components.push_back(std::move(comp));
  }
  const auto& ood_style = cfg.ood_mode == OodMode::far ? far_style : id_style;

  DatasetPair pair;
  {
    std::vector<int> labels;
    auto x = sample_components(id_components, cfg.samples_per_class, class_block, cfg.residual_noise, id_style, cfg.style_scale, labels, rng);
    pair.id_train = LabeledDataset(std::move(x), std::move(labels), k);
  }
  {
    std::vector<int> labels;
    auto x = sample_components(id_components, test_per_class, class_block, cfg.residual_noise, id_style, cfg.style_scale, labels, rng);
    pair.id_test = LabeledDataset(std::move(x), std::move(labels), k);
  }
  {
    std::vector<int> labels;
    auto x = sample_components(ood_components, test_per_class, class_block, cfg.residual_noise, ood_style, cfg.style_scale, labels, rng);
    pair.ood_test = LabeledDataset(std::move(x), std::move(labels), k);
  }
  return pair;
}

PairConfig preset_pair(std::string_view name) {
  PairConfig cfg;
  cfg.num_classes = 8;
  cfg.input_dim = 32;
  cfg.id_class_separation = 6.0;
  cfg.samples_per_class = 150;
  cfg.test_samples_per_class = 75;
  cfg.style_rank = 4;
  cfg.class_spread = 1.0;
  cfg.residual_noise = 0.1;
  if (name == "far") {
    cfg.ood_mode = OodMode::far;
    cfg.style_scale = 1.0;
    cfg.ood_shift = 2.0;
  } else if (name == "near") {
    cfg.ood_mode = OodMode::near;
    cfg.style_scale = 1.0;
    cfg.ood_shift = 1.0;
  } else if (name == "shared-style" || name == "shared_style") {
    cfg.ood_mode = OodMode::shared_style;
    cfg.style_scale = 4.0;
    cfg.ood_shift = 0.0;
  } else {
    throw DataError("unknown synthetic pair preset '" + std::string(name) + "'");
  }
  return cfg;
}

void AugmentPolicy::validate() const {
  if (!std::isfinite(noise_sigma) || noise_sigma < 0.0)
    throw DataError("AugmentPolicy: noise_sigma must be finite and >= 0");
  if (!(mask_prob >= 0.0 && mask_prob < 1.0))
    throw DataError("AugmentPolicy: mask_prob must be in [0, 1)");
  if (!(scale_lo > 0.0 && scale_lo <= scale_hi && std::isfinite(scale_hi)))
    throw DataError("AugmentPolicy: scale range must satisfy 0 < lo <= hi");
}

std::vector<double> augment(std::span<const double> x, const AugmentPolicy& policy, Rng& rng) {
  double scale = policy.scale_lo;
  if (policy.scale_hi > policy.scale_lo) {
    scale = std::uniform_real_distribution<double>(policy.scale_lo, policy.scale_hi)(rng);
  }
  std::vector<double> out(x.size());
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double v = x[i] * scale;
    if (policy.noise_sigma > 0.0) v += policy.noise_sigma * noise(rng);
    if (policy.mask_prob > 0.0 && unit(rng) < policy.mask_prob) v = 0.0;
    out[i] = v;
  }
  return out;
}

Matrix augment_rows(const Matrix& x, const AugmentPolicy& policy, Rng& rng) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto v = augment(x.row(r), policy, rng);
    std::copy(v.begin(), v.end(), out.row(r).begin());
  }
  return out;
}

std::pair<LabeledDataset, LabeledDataset> stratified_split(const LabeledDataset& ds,
                                                           double test_fraction,
                                                           std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw DataError("stratified_split: test_fraction must be in (0, 1)");
  ds.require_min_per_class(2);
  Rng rng(seed);
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  for (std::size_t k = 0; k < ds.num_classes(); ++k) {
    auto idx = ds.indices_of(static_cast<int>(k));
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n = static_cast<long long>(idx.size());
    const long long n_test =
        std::clamp(std::llround(static_cast<double>(n) * test_fraction), 1LL, n - 1);
    test_idx.insert(test_idx.end(), idx.begin(), idx.begin() + n_test);
    train_idx.insert(train_idx.end(), idx.begin() + n_test, idx.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {ds.subset(train_idx), ds.subset(test_idx)};
}

}  // namespace cood
