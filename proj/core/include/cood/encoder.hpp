#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cood/datagen.hpp"
#include "cood/numerics.hpp"

namespace cood {

/// Affine layer y = x·W + b, with W stored in×out.
struct Layer {
  Matrix weight;
  std::vector<double> bias;

  std::size_t in_dim() const noexcept { return weight.rows(); }
  std::size_t out_dim() const noexcept { return weight.cols(); }
  bool operator==(const Layer&) const = default;
};

/// MLP encoder parameters: ReLU between layers, final layer linear followed
/// by L2 normalization. Also used as the container for gradients and SGD
/// velocity, which share the parameter shapes.
struct EncoderParams {
  std::vector<Layer> layers;

  std::size_t input_dim() const noexcept { return layers.empty() ? 0 : layers.front().in_dim(); }
  std::size_t output_dim() const noexcept { return layers.empty() ? 0 : layers.back().out_dim(); }
  std::size_t parameter_count() const noexcept;
  bool same_shape(const EncoderParams& other) const noexcept;
  bool all_finite() const noexcept;

  static EncoderParams zeros_like(const EncoderParams& like);

  bool operator==(const EncoderParams&) const = default;
};

/// He-normal weights, zero biases. `sizes` is {input, hidden..., output}.
EncoderParams init_encoder(std::span<const std::size_t> sizes, Rng& rng);
Layer init_layer(std::size_t in, std::size_t out, Rng& rng);

inline constexpr double kNormGuard = 1e-12;

/// Intermediate values of a forward pass, kept for backpropagation.
struct EncoderTape {
  std::vector<Matrix> inputs;     // input to each layer
  std::vector<Matrix> preacts;    // x·W + b of each layer
  Matrix features;                // normalized output
  std::vector<double> norms;      // ‖last preactivation‖ per row
};

/// Rows of the result have unit L2 norm (z / max(‖z‖, 1e-12)).
Matrix encoder_forward(const EncoderParams& params, const Matrix& batch, EncoderTape* tape = nullptr);

/// Gradient of a scalar loss w.r.t. the parameters, given dL/d(features).
EncoderParams encoder_backward(const EncoderParams& params, const EncoderTape& tape,
                               const Matrix& grad_features);

/// Row-wise z / max(‖z‖, 1e-12).
Matrix l2_normalize_rows(const Matrix& m);

/// z·z′ / (‖z‖‖z′‖). Throws std::invalid_argument on a zero-norm input.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace cood
