#pragma once

// Independent reference implementations used as test oracles. They favour
// the most direct formula over speed or numerical care and share no code
// with the library beyond the Matrix container.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <vector>

#include "cood/encoder.hpp"
#include "cood/numerics.hpp"

namespace oracle {

using cood::Matrix;

// ---- metrics --------------------------------------------------------------

/// Pairwise count: P(ood > id) + ½·P(tie).
inline double auroc(const std::vector<double>& id, const std::vector<double>& ood) {
  double wins = 0.0;
  for (double o : ood)
    for (double i : id) wins += o > i ? 1.0 : (o == i ? 0.5 : 0.0);
  return wins / (static_cast<double>(id.size()) * static_cast<double>(ood.size()));
}

inline std::vector<double> thresholds_desc(const std::vector<double>& id, const std::vector<double>& ood) {
  std::set<double, std::greater<>> t(id.begin(), id.end());
  t.insert(ood.begin(), ood.end());
  return {t.begin(), t.end()};
}

inline double count_at_least(const std::vector<double>& v, double t) {
  return static_cast<double>(std::count_if(v.begin(), v.end(), [t](double x) { return x >= t; }));
}

/// Sweeps every distinct threshold, recounting from scratch each time.
inline double aupr(const std::vector<double>& id, const std::vector<double>& ood) {
  double area = 0.0;
  double prev_recall = 0.0;
  for (double t : thresholds_desc(id, ood)) {
    const double tp = count_at_least(ood, t);
    const double fp = count_at_least(id, t);
    const double recall = tp / static_cast<double>(ood.size());
    area += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
  }
  return area;
}

inline double fpr_at_tpr(const std::vector<double>& id, const std::vector<double>& ood, double target) {
  for (double t : thresholds_desc(id, ood)) {
    if (count_at_least(ood, t) / static_cast<double>(ood.size()) >= target)
      return count_at_least(id, t) / static_cast<double>(id.size());
  }
  return 1.0;
}

// ---- linear algebra ---------------------------------------------------------

/// Lower Cholesky factor of an SPD matrix.
inline Matrix cholesky(const Matrix& a) {
  const std::size_t n = a.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

inline double log_det_cholesky(const Matrix& a) {
  const Matrix l = cholesky(a);
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) s += 2.0 * std::log(l(i, i));
  return s;
}

/// Determinant by Gaussian elimination with partial pivoting.
inline double determinant(Matrix a) {
  const std::size_t n = a.rows();
  double det = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
    if (a(piv, c) == 0.0) return 0.0;
    if (piv != c) {
      for (std::size_t k = 0; k < n; ++k) std::swap(a(c, k), a(piv, k));
      det = -det;
    }
    det *= a(c, c);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a(r, c) / a(c, c);
      for (std::size_t k = c; k < n; ++k) a(r, k) -= f * a(c, k);
    }
  }
  return det;
}

/// Solves L·y = b for lower-triangular L.
inline std::vector<double> forward_solve(const Matrix& l, const std::vector<double>& b) {
  std::vector<double> y(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
    y[i] = s / l(i, i);
  }
  return y;
}

/// Two-pass sample covariance (denominator N-1).
inline Matrix covariance(const Matrix& x) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  std::vector<double> mean(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) mean[j] += x(r, j) / static_cast<double>(n);
  Matrix c(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < n; ++r) s += (x(r, i) - mean[i]) * (x(r, j) - mean[j]);
      c(i, j) = s / static_cast<double>(n - 1);
    }
  return c;
}

inline Matrix random_spd(std::size_t n, std::mt19937_64& rng, double ridge = 0.5) {
  std::normal_distribution<double> normal;
  Matrix a(n, n);
  for (double& v : a.values()) v = normal(rng);
  Matrix s = cood::matmul_nt(a, a);
  for (std::size_t i = 0; i < n; ++i) s(i, i) += ridge;
  return s;
}

inline Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(r, c);
  for (double& v : m.values()) v = normal(rng);
  return m;
}

/// Random orthogonal matrix from Gram-Schmidt on Gaussian columns.
inline Matrix random_orthogonal(std::size_t n, std::mt19937_64& rng) {
  Matrix q = random_matrix(n, n, rng);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t p = 0; p < c; ++p) {
      double d = 0.0;
      for (std::size_t r = 0; r < n; ++r) d += q(r, c) * q(r, p);
      for (std::size_t r = 0; r < n; ++r) q(r, c) -= d * q(r, p);
    }
    double norm = 0.0;
    for (std::size_t r = 0; r < n; ++r) norm += q(r, c) * q(r, c);
    norm = std::sqrt(norm);
    for (std::size_t r = 0; r < n; ++r) q(r, c) /= norm;
  }
  return q;
}

// ---- probability ------------------------------------------------------------

inline double gaussian_log_density(const std::vector<double>& x, const std::vector<double>& mean, const Matrix& chol) {
  const std::size_t d = x.size();
  std::vector<double> delta(d);
  for (std::size_t i = 0; i < d; ++i) delta[i] = x[i] - mean[i];
  const auto y = forward_solve(chol, delta);
  double quad = 0.0;
  double log_det = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    quad += y[i] * y[i];
    log_det += 2.0 * std::log(chol(i, i));
  }
  return -0.5 * (quad + log_det + static_cast<double>(d) * std::log(2.0 * std::numbers::pi));
}

/// Monte-Carlo estimate of KL(p‖q) = E_p[ln p − ln q].
inline double monte_carlo_kl(const cood::Gaussian& p, const cood::Gaussian& q, std::size_t samples,
                             std::mt19937_64& rng) {
  const Matrix lp = cholesky(p.covariance);
  const Matrix lq = cholesky(q.covariance);
  const std::size_t d = p.dim();
  std::normal_distribution<double> normal;
  double acc = 0.0;
  std::vector<double> e(d);
  std::vector<double> x(d);
  for (std::size_t s = 0; s < samples; ++s) {
    for (double& v : e) v = normal(rng);
    for (std::size_t i = 0; i < d; ++i) {
      x[i] = p.mean[i];
      for (std::size_t k = 0; k <= i; ++k) x[i] += lp(i, k) * e[k];
    }
    acc += gaussian_log_density(x, p.mean, lp) - gaussian_log_density(x, q.mean, lq);
  }
  return acc / static_cast<double>(samples);
}

// ---- losses -----------------------------------------------------------------

inline double dot(const Matrix& a, std::size_t i, const Matrix& b, std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) s += a(i, c) * b(j, c);
  return s;
}

/// Plain summation of exponentials; valid for moderate similarities/τ.
inline double moco_loss(const Matrix& q, const Matrix& k, const Matrix& negatives, double tau) {
  double total = 0.0;
  for (std::size_t i = 0; i < q.rows(); ++i) {
    const double pos = std::exp(dot(q, i, k, i) / tau);
    double denom = pos;
    for (std::size_t j = 0; j < negatives.rows(); ++j) denom += std::exp(dot(q, i, negatives, j) / tau);
    total += -std::log(pos / denom);
  }
  return total / static_cast<double>(q.rows());
}

inline double supclr_loss(const Matrix& f, const std::vector<int>& labels, double tau) {
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t q = 0; q < f.rows(); ++q) {
    double denom = 0.0;
    for (std::size_t a = 0; a < f.rows(); ++a)
      if (a != q) denom += std::exp(dot(f, q, f, a) / tau);
    double sum = 0.0;
    std::size_t positives = 0;
    for (std::size_t p = 0; p < f.rows(); ++p) {
      if (p == q || labels[p] != labels[q]) continue;
      sum += std::log(std::exp(dot(f, q, f, p) / tau) / denom);
      ++positives;
    }
    if (positives == 0) continue;
    total += -sum / static_cast<double>(positives);
    ++counted;
  }
  return total / static_cast<double>(counted);
}

inline double softmax_ce(const Matrix& logits, const std::vector<int>& labels) {
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    double z = 0.0;
    for (std::size_t c = 0; c < logits.cols(); ++c) z += std::exp(logits(r, c));
    total += -std::log(std::exp(logits(r, static_cast<std::size_t>(labels[r]))) / z);
  }
  return total / static_cast<double>(logits.rows());
}

// ---- network forward pass ---------------------------------------------------

/// Straightforward re-implementation of the encoder forward pass.
inline Matrix forward(const cood::EncoderParams& p, const Matrix& x) {
  Matrix h = x;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& layer = p.layers[l];
    Matrix next(h.rows(), layer.out_dim());
    for (std::size_t r = 0; r < h.rows(); ++r)
      for (std::size_t o = 0; o < layer.out_dim(); ++o) {
        double s = layer.bias[o];
        for (std::size_t i = 0; i < layer.in_dim(); ++i) s += h(r, i) * layer.weight(i, o);
        next(r, o) = (l + 1 < p.layers.size()) ? std::max(s, 0.0) : s;
      }
    h = std::move(next);
  }
  for (std::size_t r = 0; r < h.rows(); ++r) {
    double n = 0.0;
    for (std::size_t c = 0; c < h.cols(); ++c) n += h(r, c) * h(r, c);
    n = std::max(std::sqrt(n), 1e-12);
    for (std::size_t c = 0; c < h.cols(); ++c) h(r, c) /= n;
  }
  return h;
}

/// Smallest |pre-activation| over hidden layers; finite differences are only
/// meaningful away from ReLU kinks.
inline double min_hidden_preact(const cood::EncoderParams& p, const Matrix& x) {
  double smallest = INFINITY;
  Matrix h = x;
  for (std::size_t l = 0; l + 1 < p.layers.size(); ++l) {
    const auto& layer = p.layers[l];
    Matrix next(h.rows(), layer.out_dim());
    for (std::size_t r = 0; r < h.rows(); ++r)
      for (std::size_t o = 0; o < layer.out_dim(); ++o) {
        double s = layer.bias[o];
        for (std::size_t i = 0; i < layer.in_dim(); ++i) s += h(r, i) * layer.weight(i, o);
        smallest = std::min(smallest, std::abs(s));
        next(r, o) = std::max(s, 0.0);
      }
    h = std::move(next);
  }
  return smallest;
}

// ---- finite differences -----------------------------------------------------

inline std::vector<double*> parameter_refs(cood::EncoderParams& p) {
  std::vector<double*> refs;
  for (auto& l : p.layers) {
    for (double& v : l.weight.values()) refs.push_back(&v);
    for (double& v : l.bias) refs.push_back(&v);
  }
  return refs;
}

inline std::vector<double*> parameter_refs(cood::Layer& l) {
  std::vector<double*> refs;
  for (double& v : l.weight.values()) refs.push_back(&v);
  for (double& v : l.bias) refs.push_back(&v);
  return refs;
}

inline std::vector<double> flatten(const cood::EncoderParams& p) {
  std::vector<double> out;
  for (const auto& l : p.layers) {
    out.insert(out.end(), l.weight.values().begin(), l.weight.values().end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

inline std::vector<double> flatten(const cood::Layer& l) {
  std::vector<double> out(l.weight.values().begin(), l.weight.values().end());
  out.insert(out.end(), l.bias.begin(), l.bias.end());
  return out;
}

/// Central differences of `f` w.r.t. each referenced scalar.
inline std::vector<double> central_difference(const std::vector<double*>& refs, const std::function<double()>& f,
                                              double h = 1e-5) {
  std::vector<double> g(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const double saved = *refs[i];
    *refs[i] = saved + h;
    const double up = f();
    *refs[i] = saved - h;
    const double down = f();
    *refs[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// max_i |a_i − n_i| / max(|a_i|, |n_i|, floor).
inline double max_relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric,
                                 double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / scale);
  }
  return worst;
}

// ---- ranks ------------------------------------------------------------------

/// 1 + #smaller + (#equal − 1)/2, by exhaustive comparison.
inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0.0;
    double equal = 0.0;
    for (double w : v) {
      less += w < v[i] ? 1.0 : 0.0;
      equal += w == v[i] ? 1.0 : 0.0;
    }
    out[i] = 1.0 + less + (equal - 1.0) / 2.0;
  }
  return out;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
    saa += a[i] * a[i];
    sbb += b[i] * b[i];
    sab += a[i] * b[i];
  }
  return (n * sab - sa * sb) / std::sqrt((n * saa - sa * sa) * (n * sbb - sb * sb));
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  return pearson(ranks(a), ranks(b));
}

/// OOD score of the data generator's distance-to-mean oracle: Euclidean
/// distance to the nearest of the supplied class means.
inline double nearest_mean_distance(std::span<const double> x, const std::vector<std::vector<double>>& means) {
  double best = INFINITY;
  for (const auto& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - m[i]) * (x[i] - m[i]);
    best = std::min(best, std::sqrt(s));
  }
  return best;
}

}  // namespace oracle
