#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cood/datagen.hpp"
#include "cood/encoder.hpp"
#include "cood/losses.hpp"

namespace cood {

enum class ModelKind { ce, moco, supclr };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

/// Training hyperparameters. Optimizer, temperature and momentum defaults
/// follow the reference ResNet setup; epochs, batch size and queue length are
/// scaled down for small synthetic datasets.
struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 128;
  double learning_rate = 3e-2;
  double sgd_momentum = 0.9;
  double weight_decay = 1e-4;
  double temperature = 0.07;
  std::size_t queue_capacity = 512;
  double encoder_momentum = 0.999;
  std::vector<std::size_t> hidden = {256, 128};
  std::size_t output_dim = 128;
  bool shuffle = true;
  std::uint64_t seed = 0;
  AugmentPolicy augment;

  void validate() const;
  SgdSettings sgd() const { return {learning_rate, sgd_momentum, weight_decay}; }

  bool operator==(const TrainConfig&) const = default;
};

struct TrainedModel {
  ModelKind kind = ModelKind::ce;
  TrainConfig config;
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;
  EncoderParams encoder;
  /// Classifier head (CE only).
  std::optional<Layer> head;
  /// Momentum key encoder (Moco only).
  std::optional<EncoderParams> key_encoder;
  /// Mean batch loss per epoch.
  std::vector<double> loss_trace;

  Matrix features(const Matrix& inputs) const;
  /// Softmax class probabilities; requires a head.
  Matrix class_probabilities(const Matrix& inputs) const;

  bool operator==(const TrainedModel&) const = default;
};

/// The encoder a run with this config starts from.
EncoderParams initial_encoder(const TrainConfig& cfg, std::size_t input_dim);

/// Trains one model. Deterministic given cfg.seed. Moco ignores labels.
TrainedModel train_model(ModelKind kind, const LabeledDataset& data, const TrainConfig& cfg);

// ---- checkpoints ----------------------------------------------------------

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary container: magic, format version, JSON header (kind, config,
/// shapes), then raw little-endian float64 parameters.
void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_checkpoint(const std::filesystem::path& path);

std::string serialize_checkpoint(const TrainedModel& model);
TrainedModel deserialize_checkpoint(std::string_view bytes);

}  // namespace cood
