#include "cood/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cood {

std::size_t EncoderParams::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

bool EncoderParams::same_shape(const EncoderParams& other) const noexcept {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& a = layers[i];
    const auto& b = other.layers[i];
    if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() ||
        a.bias.size() != b.bias.size())
      return false;
  }
  return true;
}

bool EncoderParams::all_finite() const noexcept {
  for (const auto& l : layers) {
    if (!l.weight.all_finite()) return false;
    if (!std::all_of(l.bias.begin(), l.bias.end(), [](double v) { return std::isfinite(v); }))
      return false;
  }
  return true;
}

EncoderParams EncoderParams::zeros_like(const EncoderParams& like) {
  EncoderParams z;
  for (const auto& l : like.layers)
    z.layers.push_back({Matrix(l.weight.rows(), l.weight.cols()), std::vector<double>(l.bias.size(), 0.0)});
  return z;
}

Layer init_layer(std::size_t in, std::size_t out, Rng& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(in)));
  Layer l{Matrix(in, out), std::vector<double>(out, 0.0)};
  for (double& w : l.weight.values()) w = normal(rng);
  return l;
}

EncoderParams init_encoder(std::span<const std::size_t> sizes, Rng& rng) {
  if (sizes.size() < 2) throw ShapeError("init_encoder: need at least input and output sizes");
  EncoderParams p;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) p.layers.push_back(init_layer(sizes[i], sizes[i + 1], rng));
  return p;
}

namespace {

Matrix affine(const Layer& layer, const Matrix& x) {
  Matrix y = matmul(x, layer.weight);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += layer.bias[j];
  }
  return y;
}

}  // namespace

Matrix encoder_forward(const EncoderParams& params, const Matrix& batch, EncoderTape* tape) {
  if (params.layers.empty()) throw ShapeError("encoder_forward: encoder has no layers");
  if (batch.cols() != params.input_dim()) {
    throw ShapeError("encoder_forward: batch has " + std::to_string(batch.cols()) +
                     " columns, encoder expects " + std::to_string(params.input_dim()));
  }
  if (tape) {
    tape->inputs.clear();
    tape->preacts.clear();
  }
  Matrix h = batch;
  const std::size_t n_layers = params.layers.size();
  for (std::size_t li = 0; li < n_layers; ++li) {
    Matrix a = affine(params.layers[li], h);
    if (tape) {
      tape->inputs.push_back(std::move(h));
      tape->preacts.push_back(a);
    }
    if (li + 1 < n_layers) {
      for (double& v : a.values()) v = std::max(v, 0.0);
    }
    h = std::move(a);
  }
  std::vector<double> norms(h.rows());
  for (std::size_t r = 0; r < h.rows(); ++r) {
    auto row = h.row(r);
    norms[r] = l2_norm(row);
    const double denom = std::max(norms[r], kNormGuard);
    for (double& v : row) v /= denom;
  }
  if (tape) {
    tape->features = h;
    tape->norms = std::move(norms);
  }
  return h;
}

EncoderParams encoder_backward(const EncoderParams& params, const EncoderTape& tape,
                               const Matrix& grad_features) {
  const std::size_t n_layers = params.layers.size();
  if (tape.preacts.size() != n_layers || grad_features.rows() != tape.features.rows() ||
      grad_features.cols() != tape.features.cols()) {
    throw ShapeError("encoder_backward: tape does not match gradient");
  }
  // Through z = a / max(‖a‖, eps).
  Matrix g(grad_features.rows(), grad_features.cols());
  for (std::size_t r = 0; r < g.rows(); ++r) {
    auto z = tape.features.row(r);
    auto gz = grad_features.row(r);
    auto ga = g.row(r);
    if (tape.norms[r] > kNormGuard) {
      const double zg = dot(z, gz);
      for (std::size_t j = 0; j < ga.size(); ++j) ga[j] = (gz[j] - z[j] * zg) / tape.norms[r];
    } else {
      for (std::size_t j = 0; j < ga.size(); ++j) ga[j] = gz[j] / kNormGuard;
    }
  }

  EncoderParams grads;
  grads.layers.resize(n_layers);
  for (std::size_t li = n_layers; li-- > 0;) {
    const Layer& layer = params.layers[li];
    Layer& gl = grads.layers[li];
    gl.weight = matmul_tn(tape.inputs[li], g);
    gl.bias.assign(layer.out_dim(), 0.0);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      auto row = g.row(r);
      for (std::size_t j = 0; j < row.size(); ++j) gl.bias[j] += row[j];
    }
    if (li == 0) break;
    Matrix gh = matmul_nt(g, layer.weight);
    const Matrix& prev = tape.preacts[li - 1];
    auto ghv = gh.values();
    auto pv = prev.values();
    for (std::size_t i = 0; i < ghv.size(); ++i)
      if (pv[i] <= 0.0) ghv[i] = 0.0;
    g = std::move(gh);
  }
  return grads;
}

Matrix l2_normalize_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double denom = std::max(l2_norm(row), kNormGuard);
    for (double& v : row) v /= denom;
  }
  return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("cosine_similarity: zero-norm input");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

}  // namespace cood
