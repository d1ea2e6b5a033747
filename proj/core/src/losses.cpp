#include "cood/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cood {

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double top = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(top)) return top;
  double s = 0.0;
  for (double v : values) s += std::exp(v - top);
  return top + std::log(s);
}

FeatureLoss softmax_cross_entropy(const Matrix& logits, std::span<const int> labels) {
  const std::size_t n = logits.rows();
  const std::size_t k = logits.cols();
  if (labels.size() != n) throw LossError("softmax_cross_entropy: label count mismatch");
  if (n == 0) throw LossError("softmax_cross_entropy: empty batch");
  FeatureLoss out{0.0, Matrix(n, k)};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw LossError("softmax_cross_entropy: label " + std::to_string(y) + " outside [0, " +
                      std::to_string(k) + ")");
    }
    auto row = logits.row(r);
    const double lse = log_sum_exp(row);
    out.loss += lse - row[static_cast<std::size_t>(y)];
    auto g = out.grad.row(r);
    for (std::size_t j = 0; j < k; ++j) g[j] = std::exp(row[j] - lse) * inv_n;
    g[static_cast<std::size_t>(y)] -= inv_n;
  }
  out.loss *= inv_n;
  return out;
}

Matrix head_logits(const Layer& head, const Matrix& features) {
  Matrix logits = matmul(features, head.weight);
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += head.bias[j];
  }
  return logits;
}

CeLoss ce_loss_grad(const EncoderParams& encoder, const Layer& head, const Matrix& batch,
                    std::span<const int> labels) {
  if (head.in_dim() != encoder.output_dim()) throw ShapeError("ce_loss_grad: head does not match encoder");
  EncoderTape tape;
  const Matrix z = encoder_forward(encoder, batch, &tape);
  const auto ce = softmax_cross_entropy(head_logits(head, z), labels);

  CeLoss out;
  out.loss = ce.loss;
  out.head_grads.weight = matmul_tn(z, ce.grad);
  out.head_grads.bias.assign(head.out_dim(), 0.0);
  for (std::size_t r = 0; r < ce.grad.rows(); ++r) {
    auto row = ce.grad.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) out.head_grads.bias[j] += row[j];
  }
  out.encoder_grads = encoder_backward(encoder, tape, matmul_nt(ce.grad, head.weight));
  return out;
}

KeyQueue::KeyQueue(std::size_t capacity, std::size_t dim)
    : capacity_(capacity), dim_(dim), data_(capacity * dim, 0.0) {
  if (capacity == 0 || dim == 0) throw ShapeError("KeyQueue: capacity and dim must be positive");
}

void KeyQueue::push(const Matrix& keys) {
  if (keys.cols() != dim_) throw ShapeError("KeyQueue::push: key dimension mismatch");
  for (std::size_t r = 0; r < keys.rows(); ++r) {
    auto src = keys.row(r);
    std::copy(src.begin(), src.end(), data_.begin() + static_cast<std::ptrdiff_t>(next_ * dim_));
    next_ = (next_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
  }
}

Matrix KeyQueue::contents() const {
  Matrix out(size_, dim_);
  const std::size_t oldest = full() ? next_ : 0;
  for (std::size_t i = 0; i < size_; ++i) {
    const std::size_t slot = (oldest + i) % capacity_;
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(slot * dim_), dim_, out.row(i).begin());
  }
  return out;
}

FeatureLoss moco_feature_loss(const Matrix& queries, const Matrix& keys, const Matrix& negatives,
                              double temperature) {
  if (!(temperature > 0.0)) throw LossError("moco loss: temperature must be > 0");
  if (negatives.rows() == 0) throw LossError("moco loss: negative queue is empty");
  if (queries.rows() == 0) throw LossError("moco loss: empty batch");
  if (keys.rows() != queries.rows() || keys.cols() != queries.cols() || negatives.cols() != queries.cols())
    throw ShapeError("moco loss: query/key/queue shapes differ");

  const std::size_t n = queries.rows();
  const std::size_t m = negatives.rows();
  const double inv_t = 1.0 / temperature;
  const double inv_n = 1.0 / static_cast<double>(n);

  const Matrix neg_logits = matmul_nt(queries, negatives);
  FeatureLoss out{0.0, Matrix(n, queries.cols())};
  std::vector<double> logits(m + 1);
  for (std::size_t i = 0; i < n; ++i) {
    logits[0] = dot(queries.row(i), keys.row(i)) * inv_t;
    for (std::size_t j = 0; j < m; ++j) logits[j + 1] = neg_logits(i, j) * inv_t;
    const double lse = log_sum_exp(logits);
    out.loss += lse - logits[0];

    auto g = out.grad.row(i);
    const double w_pos = (std::exp(logits[0] - lse) - 1.0) * inv_t * inv_n;
    auto k = keys.row(i);
    for (std::size_t c = 0; c < g.size(); ++c) g[c] = w_pos * k[c];
    for (std::size_t j = 0; j < m; ++j) {
      const double w = std::exp(logits[j + 1] - lse) * inv_t * inv_n;
      auto nj = negatives.row(j);
      for (std::size_t c = 0; c < g.size(); ++c) g[c] += w * nj[c];
    }
  }
  out.loss *= inv_n;
  return out;
}

EncoderLoss moco_loss_grad(const MocoState& state, const Matrix& query_batch, const Matrix& key_batch) {
  if (!state.query.same_shape(state.key)) throw ShapeError("moco_loss_grad: encoders differ in shape");
  EncoderTape tape;
  const Matrix q = encoder_forward(state.query, query_batch, &tape);
  const Matrix k = encoder_forward(state.key, key_batch);
  const auto fl = moco_feature_loss(q, k, state.queue.contents(), state.temperature);
  return {fl.loss, encoder_backward(state.query, tape, fl.grad)};
}

FeatureLoss supclr_loss_grad(const Matrix& features, std::span<const int> labels, double temperature) {
  if (!(temperature > 0.0)) throw LossError("supclr loss: temperature must be > 0");
  const std::size_t n = features.rows();
  if (labels.size() != n) throw LossError("supclr loss: label count mismatch");
  if (n < 2) throw LossError("supclr loss: batch needs at least 2 samples");

  const double inv_t = 1.0 / temperature;
  const Matrix sim = matmul_nt(features, features);

  std::vector<std::size_t> positives(n, 0);
  std::size_t valid = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && labels[j] == labels[i]) ++positives[i];
    if (positives[i] > 0) ++valid;
  }
  if (valid == 0) throw LossError("supclr loss: degenerate batch, no sample has a positive");

  const double inv_valid = 1.0 / static_cast<double>(valid);
  Matrix coeff(n, n);  // dL/d(sim_ij)·τ
  std::vector<double> logits(n - 1);
  FeatureLoss out{0.0, Matrix(n, features.cols())};
  for (std::size_t i = 0; i < n; ++i) {
    if (positives[i] == 0) continue;
    std::size_t c = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) logits[c++] = sim(i, j) * inv_t;
    const double lse = log_sum_exp(logits);
    const double inv_p = 1.0 / static_cast<double>(positives[i]);
    double pos_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double logit = sim(i, j) * inv_t;
      double w = std::exp(logit - lse);
      if (labels[j] == labels[i]) {
        pos_sum += logit;
        w -= inv_p;
      }
      coeff(i, j) = w * inv_valid;
    }
    out.loss += lse - pos_sum * inv_p;
  }
  out.loss *= inv_valid;

  // sim_ij = f_i·f_j, so dL/df = (C + Cᵀ)·F / τ.
  Matrix sym(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) sym(i, j) = (coeff(i, j) + coeff(j, i)) * inv_t;
  out.grad = matmul(sym, features);
  return out;
}

EncoderLoss supclr_encoder_loss_grad(const EncoderParams& encoder, const Matrix& batch,
                                     std::span<const int> labels, double temperature) {
  EncoderTape tape;
  const Matrix z = encoder_forward(encoder, batch, &tape);
  const auto fl = supclr_loss_grad(z, labels, temperature);
  return {fl.loss, encoder_backward(encoder, tape, fl.grad)};
}

namespace {

template <typename Fn>
void for_each_pair(EncoderParams& a, const EncoderParams& b, Fn&& fn) {
  for (std::size_t li = 0; li < a.layers.size(); ++li) {
    auto wa = a.layers[li].weight.values();
    auto wb = b.layers[li].weight.values();
    for (std::size_t i = 0; i < wa.size(); ++i) fn(wa[i], wb[i]);
    auto& ba = a.layers[li].bias;
    const auto& bb = b.layers[li].bias;
    for (std::size_t i = 0; i < ba.size(); ++i) fn(ba[i], bb[i]);
  }
}

void sgd_update(std::span<double> p, std::span<double> v, std::span<const double> g, const SgdSettings& s) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    v[i] = s.momentum * v[i] + g[i] + s.weight_decay * p[i];
    p[i] -= s.learning_rate * v[i];
  }
}

}  // namespace

void ema_update_in_place(EncoderParams& key, const EncoderParams& query, double momentum) {
  if (!key.same_shape(query)) throw ShapeError("ema_update: parameter shapes differ");
  if (!(momentum >= 0.0 && momentum <= 1.0)) throw std::invalid_argument("ema_update: momentum outside [0, 1]");
  const double w = 1.0 - momentum;
  for_each_pair(key, query, [&](double& k, double q) { k = momentum * k + w * q; });
}

EncoderParams ema_update(const EncoderParams& key, const EncoderParams& query, double momentum) {
  EncoderParams out = key;
  ema_update_in_place(out, query, momentum);
  return out;
}

void sgd_step(Layer& params, Layer& velocity, const Layer& grads, const SgdSettings& settings) {
  if (params.weight.rows() != grads.weight.rows() || params.weight.cols() != grads.weight.cols() ||
      params.bias.size() != grads.bias.size() || velocity.weight.size() != params.weight.size() ||
      velocity.bias.size() != params.bias.size()) {
    throw ShapeError("sgd_step: parameter, gradient and velocity shapes differ");
  }
  sgd_update(params.weight.values(), velocity.weight.values(), grads.weight.values(), settings);
  sgd_update(params.bias, velocity.bias, grads.bias, settings);
}

void sgd_step(EncoderParams& params, EncoderParams& velocity, const EncoderParams& grads,
              const SgdSettings& settings) {
  if (!params.same_shape(grads) || !params.same_shape(velocity))
    throw ShapeError("sgd_step: parameter, gradient and velocity shapes differ");
  for (std::size_t li = 0; li < params.layers.size(); ++li)
    sgd_step(params.layers[li], velocity.layers[li], grads.layers[li], settings);
}

}  // namespace cood
