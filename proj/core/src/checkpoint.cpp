#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cood/training.hpp"
#include "json.hpp"

namespace cood {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes little-endian hosts");

constexpr char kMagic[8] = {'C', 'O', 'O', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

using nlohmann::json;

json config_to_json(const TrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"sgd_momentum", c.sgd_momentum},
              {"weight_decay", c.weight_decay},
              {"temperature", c.temperature},
              {"queue_capacity", c.queue_capacity},
              {"encoder_momentum", c.encoder_momentum},
              {"hidden", c.hidden},
              {"output_dim", c.output_dim},
              {"shuffle", c.shuffle},
              {"seed", c.seed},
              {"augment",
               {{"noise_sigma", c.augment.noise_sigma},
                {"mask_prob", c.augment.mask_prob},
                {"scale_lo", c.augment.scale_lo},
                {"scale_hi", c.augment.scale_hi}}}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.sgd_momentum = j.at("sgd_momentum").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.temperature = j.at("temperature").get<double>();
  c.queue_capacity = j.at("queue_capacity").get<std::size_t>();
  c.encoder_momentum = j.at("encoder_momentum").get<double>();
  c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  c.output_dim = j.at("output_dim").get<std::size_t>();
  c.shuffle = j.at("shuffle").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  const auto& a = j.at("augment");
  c.augment.noise_sigma = a.at("noise_sigma").get<double>();
  c.augment.mask_prob = a.at("mask_prob").get<double>();
  c.augment.scale_lo = a.at("scale_lo").get<double>();
  c.augment.scale_hi = a.at("scale_hi").get<double>();
  return c;
}

json shapes(const EncoderParams& p) {
  json out = json::array();
  for (const auto& l : p.layers) out.push_back({l.in_dim(), l.out_dim()});
  return out;
}

void put_doubles(std::string& out, std::span<const double> v) {
  const auto* bytes = reinterpret_cast<const char*>(v.data());
  out.append(bytes, v.size() * sizeof(double));
}

void put_layer(std::string& out, const Layer& l) {
  put_doubles(out, l.weight.values());
  put_doubles(out, l.bias);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  void read(void* dst, std::size_t n) {
    if (pos_ + n > bytes_.size()) throw CheckpointError("checkpoint: truncated file");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::string_view take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw CheckpointError("checkpoint: truncated file");
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void doubles(std::span<double> dst) { read(dst.data(), dst.size() * sizeof(double)); }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

Layer read_layer(Reader& r, const json& shape) {
  const auto in = shape.at(0).get<std::size_t>();
  const auto out = shape.at(1).get<std::size_t>();
  Layer l{Matrix(in, out), std::vector<double>(out)};
  r.doubles(l.weight.values());
  r.doubles(l.bias);
  return l;
}

EncoderParams read_encoder(Reader& r, const json& shape_list) {
  EncoderParams p;
  for (const auto& s : shape_list) p.layers.push_back(read_layer(r, s));
  return p;
}

}  // namespace

std::string serialize_checkpoint(const TrainedModel& model) {
  json header{{"kind", std::string(to_string(model.kind))},
              {"input_dim", model.input_dim},
              {"num_classes", model.num_classes},
              {"config", config_to_json(model.config)},
              {"encoder", shapes(model.encoder)},
              {"head", model.head ? json{model.head->in_dim(), model.head->out_dim()} : json(nullptr)},
              {"key_encoder", model.key_encoder ? shapes(*model.key_encoder) : json(nullptr)},
              {"loss_trace_len", model.loss_trace.size()}};
  const std::string text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  const std::uint32_t version = kVersion;
  const std::uint64_t len = text.size();
  out.append(reinterpret_cast<const char*>(&version), sizeof(version));
  out.append(reinterpret_cast<const char*>(&len), sizeof(len));
  out += text;
  for (const auto& l : model.encoder.layers) put_layer(out, l);
  if (model.head) put_layer(out, *model.head);
  if (model.key_encoder)
    for (const auto& l : model.key_encoder->layers) put_layer(out, l);
  put_doubles(out, model.loss_trace);
  return out;
}

TrainedModel deserialize_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  char magic[sizeof(kMagic)];
  r.read(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw CheckpointError("checkpoint: bad magic");
  std::uint32_t version = 0;
  r.read(&version, sizeof(version));
  if (version != kVersion) throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  std::uint64_t len = 0;
  r.read(&len, sizeof(len));

  TrainedModel m;
  try {
    const json header = json::parse(r.take(len));
    m.kind = parse_model_kind(header.at("kind").get<std::string>());
    m.input_dim = header.at("input_dim").get<std::size_t>();
    m.num_classes = header.at("num_classes").get<std::size_t>();
    m.config = config_from_json(header.at("config"));
    m.encoder = read_encoder(r, header.at("encoder"));
    if (!header.at("head").is_null()) m.head = read_layer(r, header.at("head"));
    if (!header.at("key_encoder").is_null()) m.key_encoder = read_encoder(r, header.at("key_encoder"));
    m.loss_trace.resize(header.at("loss_trace_len").get<std::size_t>());
    r.doubles(m.loss_trace);
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint: malformed header: ") + e.what());
  }
  if (!r.at_end()) throw CheckpointError("checkpoint: trailing bytes");
  if (m.encoder.input_dim() != m.input_dim) throw CheckpointError("checkpoint: encoder input size mismatch");
  return m;
}

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("checkpoint: cannot write " + path.string());
  const auto bytes = serialize_checkpoint(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("checkpoint: write failed for " + path.string());
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace cood
