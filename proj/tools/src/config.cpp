#include "cood_cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

namespace cood::cli {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("key '" + std::string(key) + "': expected " + std::string(expected) + ", got '" +
                    std::string(value) + "'");
}

std::uint64_t to_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size() || v.empty()) bad_value(key, v, "a non-negative integer");
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  if (!v.empty() && v.front() == '+') v.remove_prefix(1);
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size() || v.empty() || !std::isfinite(out))
    bad_value(key, v, "a finite number");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "a boolean (true/false)");
}

std::vector<std::string> to_list(std::string_view v) {
  std::vector<std::string> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    const auto item = trim(v.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

struct KeySpec {
  std::string name;
  std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
  std::function<json(const RunConfig&)> get;
};

template <class T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

std::string_view aggregation_name(MahalanobisAggregation a) {
  return a == MahalanobisAggregation::min_distance ? "min_distance" : "max_log_likelihood";
}

const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = [] {
    std::vector<KeySpec> t;
    auto uint_key = [&t](std::string name, auto field) {
      t.push_back({std::move(name),
                   [field](RunConfig& c, std::string_view k, std::string_view v) {
                     field(c) = static_cast<std::remove_cvref_t<decltype(field(c))>>(to_uint(k, v));
                   },
                   [field](const RunConfig& c) { return json(field(c)); }});
    };
    auto real_key = [&t](std::string name, auto field) {
      t.push_back({std::move(name), [field](RunConfig& c, std::string_view k, std::string_view v) { field(c) = to_double(k, v); },
                   [field](const RunConfig& c) { return json(field(c)); }});
    };
    auto opt_uint_key = [&t](std::string name, auto field) {
      t.push_back({std::move(name),
                   [field](RunConfig& c, std::string_view k, std::string_view v) {
                     field(c) = static_cast<std::size_t>(to_uint(k, v));
                   },
                   [field](const RunConfig& c) { return optional_json(field(c)); }});
    };
    auto opt_real_key = [&t](std::string name, auto field) {
      t.push_back({std::move(name), [field](RunConfig& c, std::string_view k, std::string_view v) { field(c) = to_double(k, v); },
                   [field](const RunConfig& c) { return optional_json(field(c)); }});
    };

    uint_key("train.epochs", [](auto& c) -> auto& { return c.train.epochs; });
    uint_key("train.batch_size", [](auto& c) -> auto& { return c.train.batch_size; });
    real_key("train.lr", [](auto& c) -> auto& { return c.train.learning_rate; });
    real_key("train.momentum", [](auto& c) -> auto& { return c.train.sgd_momentum; });
    real_key("train.weight_decay", [](auto& c) -> auto& { return c.train.weight_decay; });
    real_key("train.temperature", [](auto& c) -> auto& { return c.train.temperature; });
    uint_key("train.queue_size", [](auto& c) -> auto& { return c.train.queue_capacity; });
    real_key("train.encoder_momentum", [](auto& c) -> auto& { return c.train.encoder_momentum; });
    t.push_back({"train.hidden",
                 [](RunConfig& c, std::string_view k, std::string_view v) {
                   std::vector<std::size_t> sizes;
                   for (const auto& item : to_list(v)) sizes.push_back(static_cast<std::size_t>(to_uint(k, item)));
                   c.train.hidden = std::move(sizes);
                 },
                 [](const RunConfig& c) { return json(c.train.hidden); }});
    uint_key("train.output_dim", [](auto& c) -> auto& { return c.train.output_dim; });
    t.push_back({"train.shuffle", [](RunConfig& c, std::string_view k, std::string_view v) { c.train.shuffle = to_bool(k, v); },
                 [](const RunConfig& c) { return json(c.train.shuffle); }});
    uint_key("train.seed", [](auto& c) -> auto& { return c.train.seed; });

    real_key("augment.noise_sigma", [](auto& c) -> auto& { return c.train.augment.noise_sigma; });
    real_key("augment.mask_prob", [](auto& c) -> auto& { return c.train.augment.mask_prob; });
    real_key("augment.scale_lo", [](auto& c) -> auto& { return c.train.augment.scale_lo; });
    real_key("augment.scale_hi", [](auto& c) -> auto& { return c.train.augment.scale_hi; });

    opt_uint_key("data.num_classes", [](auto& c) -> auto& { return c.data.num_classes; });
    opt_uint_key("data.input_dim", [](auto& c) -> auto& { return c.data.input_dim; });
    opt_real_key("data.separation", [](auto& c) -> auto& { return c.data.id_class_separation; });
    opt_real_key("data.ood_shift", [](auto& c) -> auto& { return c.data.ood_shift; });
    opt_uint_key("data.samples_per_class", [](auto& c) -> auto& { return c.data.samples_per_class; });
    opt_uint_key("data.test_samples_per_class", [](auto& c) -> auto& { return c.data.test_samples_per_class; });
    opt_real_key("data.style_scale", [](auto& c) -> auto& { return c.data.style_scale; });
    opt_uint_key("data.style_rank", [](auto& c) -> auto& { return c.data.style_rank; });
    opt_real_key("data.class_spread", [](auto& c) -> auto& { return c.data.class_spread; });
    opt_real_key("data.residual_noise", [](auto& c) -> auto& { return c.data.residual_noise; });
    real_key("data.test_fraction", [](auto& c) -> auto& { return c.test_fraction; });

    real_key("scoring.jitter_scale", [](auto& c) -> auto& { return c.scoring.jitter_scale; });
    opt_real_key("scoring.kde_bandwidth", [](auto& c) -> auto& { return c.scoring.kde_bandwidth; });
    t.push_back({"scoring.mahalanobis",
                 [](RunConfig& c, std::string_view k, std::string_view v) {
                   if (v == "min_distance") c.scoring.aggregation = MahalanobisAggregation::min_distance;
                   else if (v == "max_log_likelihood") c.scoring.aggregation = MahalanobisAggregation::max_log_likelihood;
                   else bad_value(k, v, "min_distance or max_log_likelihood");
                 },
                 [](const RunConfig& c) { return json(aggregation_name(c.scoring.aggregation)); }});

    real_key("diagnostics.clp_threshold", [](auto& c) -> auto& { return c.diagnostics.clp_threshold; });
    uint_key("diagnostics.ensemble_size", [](auto& c) -> auto& { return c.diagnostics.ensemble_size; });
    t.push_back({"diagnostics.kl_aggregate",
                 [](RunConfig& c, std::string_view k, std::string_view v) {
                   if (v == "sum") c.diagnostics.kl_aggregate = KlAggregate::sum;
                   else if (v == "mean") c.diagnostics.kl_aggregate = KlAggregate::mean;
                   else bad_value(k, v, "sum or mean");
                 },
                 [](const RunConfig& c) { return json(c.diagnostics.kl_aggregate == KlAggregate::sum ? "sum" : "mean"); }});

    t.push_back({"benchmark.pairs",
                 [](RunConfig& c, std::string_view k, std::string_view v) {
                   auto items = to_list(v);
                   if (items.empty()) bad_value(k, v, "a comma-separated list of pair specs");
                   c.benchmark.pairs = std::move(items);
                 },
                 [](const RunConfig& c) { return json(c.benchmark.pairs); }});
    t.push_back({"benchmark.models",
                 [](RunConfig& c, std::string_view k, std::string_view v) {
                   std::vector<ModelKind> kinds;
                   for (const auto& item : to_list(v)) {
                     try {
                       kinds.push_back(parse_model_kind(item));
                     } catch (const std::invalid_argument&) {
                       bad_value(k, item, "one of ce, moco, supclr");
                     }
                   }
                   if (kinds.empty()) bad_value(k, v, "a comma-separated list of models");
                   c.benchmark.models = std::move(kinds);
                 },
                 [](const RunConfig& c) {
                   json out = json::array();
                   for (auto m : c.benchmark.models) out.push_back(std::string(to_string(m)));
                   return out;
                 }});
    uint_key("benchmark.seeds", [](auto& c) -> auto& { return c.benchmark.seeds; });
    uint_key("benchmark.seed_base", [](auto& c) -> auto& { return c.benchmark.seed_base; });
    return t;
  }();
  return table;
}

const KeySpec* find_key(std::string_view name) {
  for (const auto& k : key_table())
    if (k.name == name) return &k;
  return nullptr;
}

std::string render(const json& v) {
  if (v.is_null()) return "(preset)";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string out;
    for (const auto& item : v) {
      if (!out.empty()) out += ',';
      out += render(item);
    }
    return out;
  }
  return v.dump();
}

void validate(const RunConfig& cfg) {
  try {
    cfg.train.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0)) throw ConfigError("data.test_fraction must be in (0, 1)");
  if (!(cfg.scoring.jitter_scale >= 0.0)) throw ConfigError("scoring.jitter_scale must be >= 0");
  if (cfg.scoring.kde_bandwidth && !(*cfg.scoring.kde_bandwidth > 0.0))
    throw ConfigError("scoring.kde_bandwidth must be > 0");
  if (!(cfg.diagnostics.clp_threshold > 0.0)) throw ConfigError("diagnostics.clp_threshold must be > 0");
  if (cfg.diagnostics.ensemble_size == 0) throw ConfigError("diagnostics.ensemble_size must be >= 1");
  if (cfg.benchmark.seeds == 0) throw ConfigError("benchmark.seeds must be >= 1");
}

}  // namespace

void PairOverrides::apply(PairConfig& cfg) const {
  if (num_classes) cfg.num_classes = *num_classes;
  if (input_dim) cfg.input_dim = *input_dim;
  if (id_class_separation) cfg.id_class_separation = *id_class_separation;
  if (ood_shift) cfg.ood_shift = *ood_shift;
  if (samples_per_class) cfg.samples_per_class = *samples_per_class;
  if (test_samples_per_class) cfg.test_samples_per_class = *test_samples_per_class;
  if (style_scale) cfg.style_scale = *style_scale;
  if (style_rank) cfg.style_rank = *style_rank;
  if (class_spread) cfg.class_spread = *class_spread;
  if (residual_noise) cfg.residual_noise = *residual_noise;
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::vector<std::pair<std::string, std::string>> config_key_defaults() {
  const RunConfig defaults;
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : key_table()) out.emplace_back(k.name, render(k.get(defaults)));
  return out;
}

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  const KeySpec* spec = find_key(key);
  if (!spec) {
    const KeySpec* best = nullptr;
    std::size_t best_distance = std::numeric_limits<std::size_t>::max();
    for (const auto& k : key_table()) {
      const auto d = levenshtein(key, k.name);
      if (d < best_distance) {
        best_distance = d;
        best = &k;
      }
    }
    throw ConfigError("unknown key '" + std::string(key) + "' (did you mean '" + best->name + "'?)");
  }
  spec->set(cfg, key, trim(value));
}

RunConfig parse_config(std::string_view text, std::string_view source) {
  RunConfig cfg;
  std::map<std::string, std::size_t, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const std::string where = std::string(source) + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + "missing key before '='");
    if (auto it = seen.find(key); it != seen.end()) {
      throw ConfigError(where + "duplicate key '" + std::string(key) + "' (first set on line " +
                        std::to_string(it->second) + ")");
    }
    seen.emplace(std::string(key), line_no);
    try {
      set_config_value(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return cfg;
}

RunConfig load_config(const std::optional<std::filesystem::path>& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg;
  if (path) {
    std::ifstream in(*path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path->string());
    std::ostringstream buf;
    buf << in.rdbuf();
    cfg = parse_config(buf.str(), path->string());
  }
  for (const auto& [key, value] : overrides) set_config_value(cfg, key, value);
  validate(cfg);
  return cfg;
}

json config_to_json(const RunConfig& cfg) {
  json out = json::object();
  for (const auto& k : key_table()) {
    const auto dot = k.name.find('.');
    out[k.name.substr(0, dot)][k.name.substr(dot + 1)] = k.get(cfg);
  }
  return out;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_digest(const json& config) { return fnv1a_hex(config.dump()); }

}  // namespace cood::cli
