#include "cood/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cood {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::ce: return "ce";
    case ModelKind::moco: return "moco";
    case ModelKind::supclr: return "supclr";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "ce" || text == "CE") return ModelKind::ce;
  if (text == "moco" || text == "Moco") return ModelKind::moco;
  if (text == "supclr" || text == "SupCLR") return ModelKind::supclr;
  throw std::invalid_argument("unknown model kind '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("TrainConfig: " + what); };
  if (epochs == 0) fail("epochs must be positive");
  if (batch_size < 2) fail("batch_size must be >= 2");
  if (!(learning_rate > 0.0 && std::isfinite(learning_rate))) fail("learning_rate must be positive");
  if (!(sgd_momentum >= 0.0 && sgd_momentum < 1.0)) fail("sgd_momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0 && std::isfinite(weight_decay))) fail("weight_decay must be >= 0");
  if (!(temperature > 0.0 && std::isfinite(temperature))) fail("temperature must be > 0");
  if (queue_capacity == 0) fail("queue_capacity must be positive");
  if (!(encoder_momentum >= 0.0 && encoder_momentum <= 1.0)) fail("encoder_momentum must be in [0, 1]");
  if (output_dim == 0) fail("output_dim must be positive");
  for (auto h : hidden)
    if (h == 0) fail("hidden layer sizes must be positive");
  augment.validate();
}

namespace {

Rng stream(std::uint64_t seed, std::uint64_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id)};
  return Rng(seq);
}

std::vector<std::size_t> layer_sizes(const TrainConfig& cfg, std::size_t input_dim) {
  std::vector<std::size_t> sizes{input_dim};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(cfg.output_dim);
  return sizes;
}

void check_finite(double loss, std::string_view what) {
  if (!std::isfinite(loss)) throw NumericalError(std::string(what) + ": non-finite loss");
}

void add_scaled(EncoderParams& acc, const EncoderParams& g, double w) {
  for (std::size_t li = 0; li < acc.layers.size(); ++li) {
    auto a = acc.layers[li].weight.values();
    auto b = g.layers[li].weight.values();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += w * b[i];
    auto& ab = acc.layers[li].bias;
    for (std::size_t i = 0; i < ab.size(); ++i) ab[i] += w * g.layers[li].bias[i];
  }
}

// Batches of the current epoch; a trailing batch of one sample is dropped.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order, std::size_t batch) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < order.size(); start += batch) {
    const std::size_t end = std::min(order.size(), start + batch);
    if (end - start < 2) break;
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

Matrix stack_rows(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() + b.rows(), a.cols());
  std::copy(a.values().begin(), a.values().end(), out.values().begin());
  std::copy(b.values().begin(), b.values().end(), out.values().begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

}  // namespace

EncoderParams initial_encoder(const TrainConfig& cfg, std::size_t input_dim) {
  Rng rng = stream(cfg.seed, 1);
  const auto sizes = layer_sizes(cfg, input_dim);
  return init_encoder(sizes, rng);
}

Matrix TrainedModel::features(const Matrix& inputs) const { return encoder_forward(encoder, inputs); }

Matrix TrainedModel::class_probabilities(const Matrix& inputs) const {
  if (!head) throw std::logic_error("class_probabilities: model has no classifier head");
  Matrix logits = head_logits(*head, features(inputs));
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    const double lse = log_sum_exp(row);
    for (double& v : row) v = std::exp(v - lse);
  }
  return logits;
}

TrainedModel train_model(ModelKind kind, const LabeledDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.size() < 2) throw DataError("train_model: need at least 2 samples");
  if (kind != ModelKind::moco) data.require_min_per_class(2);

  TrainedModel model;
  model.kind = kind;
  model.config = cfg;
  model.input_dim = data.dim();
  model.num_classes = data.num_classes();

  {
    Rng init_rng = stream(cfg.seed, 1);
    model.encoder = init_encoder(layer_sizes(cfg, data.dim()), init_rng);
    if (kind == ModelKind::ce) model.head = init_layer(cfg.output_dim, data.num_classes(), init_rng);
  }
  Rng rng = stream(cfg.seed, 2);
  const SgdSettings sgd = cfg.sgd();
  EncoderParams velocity = EncoderParams::zeros_like(model.encoder);
  std::optional<Layer> head_velocity;
  if (model.head)
    head_velocity = Layer{Matrix(model.head->in_dim(), model.head->out_dim()),
                          std::vector<double>(model.head->out_dim(), 0.0)};

  const Matrix& x = data.inputs();
  const auto& y = data.labels();
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto next_batches = [&] {
    if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
    return make_batches(order, cfg.batch_size);
  };
  auto labels_of = [&](const std::vector<std::size_t>& idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(y[i]);
    return out;
  };

  std::optional<MocoState> moco;
  auto batches = next_batches();
  if (kind == ModelKind::moco) {
    moco.emplace();
    moco->query = model.encoder;
    moco->key = model.encoder;
    moco->queue = KeyQueue(cfg.queue_capacity, cfg.output_dim);
    moco->momentum = cfg.encoder_momentum;
    moco->temperature = cfg.temperature;
    for (const auto& idx : batches) {
      if (moco->queue.full()) break;
      moco->queue.push(encoder_forward(moco->key, augment_rows(x.select_rows(idx), cfg.augment, rng)));
    }
  }

  model.loss_trace.reserve(cfg.epochs);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (epoch > 0) batches = next_batches();
    double epoch_loss = 0.0;
    for (const auto& idx : batches) {
      const Matrix batch = x.select_rows(idx);
      double loss = 0.0;
      switch (kind) {
        case ModelKind::ce: {
          const auto labels = labels_of(idx);
          const auto r = ce_loss_grad(model.encoder, *model.head, augment_rows(batch, cfg.augment, rng), labels);
          loss = r.loss;
          check_finite(loss, "ce");
          sgd_step(model.encoder, velocity, r.encoder_grads, sgd);
          sgd_step(*model.head, *head_velocity, r.head_grads, sgd);
          break;
        }
        case ModelKind::supclr: {
          const auto labels = labels_of(idx);
          std::vector<int> both(labels);
          both.insert(both.end(), labels.begin(), labels.end());
          const Matrix v1 = augment_rows(batch, cfg.augment, rng);
          const Matrix v2 = augment_rows(batch, cfg.augment, rng);
          const auto r = supclr_encoder_loss_grad(model.encoder, stack_rows(v1, v2), both, cfg.temperature);
          loss = r.loss;
          check_finite(loss, "supclr");
          sgd_step(model.encoder, velocity, r.grads, sgd);
          break;
        }
        case ModelKind::moco: {
          const Matrix v1 = augment_rows(batch, cfg.augment, rng);
          const Matrix v2 = augment_rows(batch, cfg.augment, rng);
          const Matrix k1 = encoder_forward(moco->key, v1);
          const Matrix k2 = encoder_forward(moco->key, v2);
          const Matrix negatives = moco->queue.contents();

          // Both orderings of the view pair act as query/positive-key pairs.
          EncoderTape tape1;
          EncoderTape tape2;
          const Matrix q1 = encoder_forward(moco->query, v1, &tape1);
          const Matrix q2 = encoder_forward(moco->query, v2, &tape2);
          const auto l12 = moco_feature_loss(q1, k2, negatives, cfg.temperature);
          const auto l21 = moco_feature_loss(q2, k1, negatives, cfg.temperature);
          loss = 0.5 * (l12.loss + l21.loss);
          check_finite(loss, "moco");
          EncoderParams grads = encoder_backward(moco->query, tape1, l12.grad);
          add_scaled(grads, encoder_backward(moco->query, tape2, l21.grad), 1.0);
          for (auto& l : grads.layers) {
            for (double& v : l.weight.values()) v *= 0.5;
            for (double& v : l.bias) v *= 0.5;
          }
          sgd_step(moco->query, velocity, grads, sgd);
          ema_update_in_place(moco->key, moco->query, moco->momentum);
          moco->queue.push(k2);
          break;
        }
      }
      epoch_loss += loss;
    }
    model.loss_trace.push_back(batches.empty() ? 0.0 : epoch_loss / static_cast<double>(batches.size()));
  }

  if (moco) {
    model.encoder = std::move(moco->query);
    model.key_encoder = std::move(moco->key);
  }
  return model;
}

}  // namespace cood
