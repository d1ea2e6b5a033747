#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "cood/encoder.hpp"

namespace cood {

/// Raised when a loss is undefined for its inputs (empty queue, batch
/// without any positive pair, non-positive temperature, bad label).
class LossError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Loss value and its gradient w.r.t. a feature (or logit) matrix.
struct FeatureLoss {
  double loss = 0.0;
  Matrix grad;
};

/// Loss value and its gradient w.r.t. encoder parameters.
struct EncoderLoss {
  double loss = 0.0;
  EncoderParams grads;
};

double log_sum_exp(std::span<const double> values);

/// Mean softmax cross-entropy over rows of `logits`; gradient w.r.t. logits.
FeatureLoss softmax_cross_entropy(const Matrix& logits, std::span<const int> labels);

Matrix head_logits(const Layer& head, const Matrix& features);

struct CeLoss {
  double loss = 0.0;
  EncoderParams encoder_grads;
  Layer head_grads;
};

/// Cross-entropy of a linear classifier head on top of the normalized
/// encoder output.
CeLoss ce_loss_grad(const EncoderParams& encoder, const Layer& head, const Matrix& batch,
                    std::span<const int> labels);

/// Fixed-capacity FIFO of L2-normalized key features. Once full, each push
/// overwrites the oldest rows.
class KeyQueue {
 public:
  KeyQueue() = default;
  KeyQueue(std::size_t capacity, std::size_t dim);

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }
  bool full() const noexcept { return size_ == capacity_; }

  void push(const Matrix& keys);
  /// Stored keys, oldest first.
  Matrix contents() const;

 private:
  std::size_t capacity_ = 0;
  std::size_t dim_ = 0;
  std::size_t size_ = 0;
  std::size_t next_ = 0;
  std::vector<double> data_;
};

/// Query/key encoders and negative queue of momentum contrast.
struct MocoState {
  EncoderParams query;
  EncoderParams key;
  KeyQueue queue;
  double momentum = 0.999;
  double temperature = 0.07;
};

/// Instance-discrimination loss on precomputed features:
/// mean_i −ln[exp(qᵢ·kᵢ/τ) / (exp(qᵢ·kᵢ/τ) + Σⱼ exp(qᵢ·nⱼ/τ))].
/// Gradient is w.r.t. queries only; keys and negatives are constants.
FeatureLoss moco_feature_loss(const Matrix& queries, const Matrix& keys, const Matrix& negatives,
                              double temperature);

/// Encodes `query_batch` with the query encoder and `key_batch` with the key
/// encoder, then applies moco_feature_loss against the queue. Gradients flow
/// into the query encoder only.
EncoderLoss moco_loss_grad(const MocoState& state, const Matrix& query_batch, const Matrix& key_batch);

/// Supervised contrastive loss. For each row q with at least one same-label
/// row, −(1/|P|)·Σ_{p∈P} ln[exp(q·z_p/τ) / Σ_{a≠q} exp(q·z_a/τ)]; the batch
/// loss averages over those rows. Gradient is w.r.t. every feature row.
FeatureLoss supclr_loss_grad(const Matrix& features, std::span<const int> labels, double temperature);

/// supclr_loss_grad composed with the encoder.
EncoderLoss supclr_encoder_loss_grad(const EncoderParams& encoder, const Matrix& batch,
                                     std::span<const int> labels, double temperature);

/// θ_k′ = m·θ_k + (1−m)·θ_q, elementwise.
EncoderParams ema_update(const EncoderParams& key, const EncoderParams& query, double momentum);
void ema_update_in_place(EncoderParams& key, const EncoderParams& query, double momentum);

struct SgdSettings {
  double learning_rate = 0.03;
  double momentum = 0.9;
  double weight_decay = 1e-4;
};

/// v′ = μ·v + g + wd·p;  p′ = p − lr·v′  (coupled weight decay).
void sgd_step(EncoderParams& params, EncoderParams& velocity, const EncoderParams& grads,
              const SgdSettings& settings);
void sgd_step(Layer& params, Layer& velocity, const Layer& grads, const SgdSettings& settings);

}  // namespace cood
