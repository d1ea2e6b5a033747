#include "cood_cli/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <tuple>

namespace cood::cli {

using nlohmann::json;

PairSpec parse_pair_spec(std::string_view text) {
  PairSpec spec;
  spec.text = std::string(text);
  if (text.starts_with("csv:")) {
    const auto dir = text.substr(4);
    if (dir.empty()) throw DataError("pair spec '" + spec.text + "': missing directory");
    spec.csv_dir = std::filesystem::path(dir);
    spec.name = spec.csv_dir->filename().string();
    if (spec.name.empty()) spec.name = spec.csv_dir->parent_path().filename().string();
    return spec;
  }
  if (text.starts_with("synthetic:")) text.remove_prefix(10);
  spec.name = std::string(text);
  preset_pair(spec.name);  // rejects unknown presets
  if (spec.name == "shared_style") spec.name = "shared-style";
  return spec;
}

std::vector<std::filesystem::path> pair_input_files(const PairSpec& spec) {
  if (spec.synthetic()) return {};
  std::vector<std::filesystem::path> files{*spec.csv_dir / "id_train.csv"};
  if (std::filesystem::exists(*spec.csv_dir / "id_test.csv")) files.push_back(*spec.csv_dir / "id_test.csv");
  files.push_back(*spec.csv_dir / "ood_test.csv");
  return files;
}

DatasetPair load_pair(const PairSpec& spec, const RunConfig& cfg, std::uint64_t seed) {
  if (spec.synthetic()) {
    PairConfig pc = preset_pair(spec.name);
    cfg.data.apply(pc);
    pc.seed = seed;
    return generate_pair(pc);
  }
  const auto& dir = *spec.csv_dir;
  for (const char* required : {"id_train.csv", "ood_test.csv"}) {
    if (!std::filesystem::exists(dir / required))
      throw DataError("pair directory " + dir.string() + " has no " + required);
  }
  DatasetPair pair;
  LabeledDataset train = load_features_csv(dir / "id_train.csv");
  if (std::filesystem::exists(dir / "id_test.csv")) {
    pair.id_train = std::move(train);
    pair.id_test = load_features_csv(dir / "id_test.csv");
  } else {
    auto [tr, te] = stratified_split(train, cfg.test_fraction, seed);
    pair.id_train = std::move(tr);
    pair.id_test = std::move(te);
  }
  pair.ood_test = load_features_csv(dir / "ood_test.csv");
  if (pair.id_test.dim() != pair.id_train.dim() || pair.ood_test.dim() != pair.id_train.dim())
    throw DataError("pair directory " + dir.string() + ": feature dimensions differ between files");
  return pair;
}

std::string_view to_string(Inference inference) {
  return inference == Inference::mahalanobis ? "mahalanobis" : "kde";
}

Inference parse_inference(std::string_view text) {
  if (text == "mahalanobis") return Inference::mahalanobis;
  if (text == "kde") return Inference::kde;
  throw std::invalid_argument("unknown inference '" + std::string(text) + "' (expected mahalanobis or kde)");
}

namespace {

InferenceScores finish(std::vector<double> id, std::vector<double> ood) {
  InferenceScores s;
  s.metrics = detection_metrics(ScoreSet(id, ood));
  s.id_scores = std::move(id);
  s.ood_scores = std::move(ood);
  return s;
}

void require_dim(const TrainedModel& model, const LabeledDataset& ds, const char* split) {
  if (ds.dim() != model.input_dim) {
    throw ShapeError(std::string("model expects ") + std::to_string(model.input_dim) + "-dimensional inputs but " +
                     split + " has " + std::to_string(ds.dim()));
  }
}

}  // namespace

ModelEvaluation evaluate_model(const TrainedModel& model, const DatasetPair& pair, const RunConfig& cfg) {
  require_dim(model, pair.id_train, "id_train");
  require_dim(model, pair.id_test, "id_test");
  require_dim(model, pair.ood_test, "ood_test");

  const Matrix train = model.features(pair.id_train.inputs());
  const Matrix id = model.features(pair.id_test.inputs());
  const Matrix ood = model.features(pair.ood_test.inputs());

  ModelEvaluation out;
  const auto maha = fit_mahalanobis(train, pair.id_train.labels(), cfg.scoring.jitter_scale, cfg.scoring.aggregation);
  out.mahalanobis = finish(score_mahalanobis(maha, id), score_mahalanobis(maha, ood));
  const auto kde = fit_kde(train, cfg.scoring.kde_bandwidth);
  out.kde = finish(score_kde(kde, id), score_kde(kde, ood));
  out.rho = spectral_decay(train);
  out.kl = overall_class_kl(train, pair.id_train.labels(), cfg.scoring.jitter_scale, cfg.diagnostics.kl_aggregate);
  return out;
}

std::vector<std::uint64_t> ensemble_seeds(std::uint64_t seed, std::size_t size) {
  std::vector<std::uint64_t> out;
  for (std::size_t j = 0; j < size; ++j) out.push_back(seed + 1'000'003ULL * j);
  return out;
}

ClassifierEnsemble train_ensemble(const DatasetPair& pair, const RunConfig& cfg, std::uint64_t seed,
                                  const TrainedModel* first_member) {
  std::vector<TrainedModel> members;
  const auto seeds = ensemble_seeds(seed, cfg.diagnostics.ensemble_size);
  for (std::size_t j = 0; j < seeds.size(); ++j) {
    TrainConfig tc = cfg.train;
    tc.seed = seeds[j];
    if (j == 0 && first_member && first_member->kind == ModelKind::ce && first_member->config == tc) {
      members.push_back(*first_member);
      continue;
    }
    members.push_back(train_model(ModelKind::ce, pair.id_train, tc));
  }
  return ClassifierEnsemble(std::move(members));
}

namespace {

std::optional<Correlation> try_correlation(const std::vector<double>& kl, const std::vector<double>& clp) {
  try {
    return rank_correlation(kl, clp);
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
}

std::vector<double> try_normalized(const std::vector<double>& kl) {
  try {
    return normalized_kl(kl);
  } catch (const std::invalid_argument&) {
    return std::vector<double>(kl.size(), 0.0);
  }
}

}  // namespace

DiagnosticsReport make_report(const TrainedModel& model, const ModelEvaluation& eval, const ClpResult& clp,
                              const PairSpec& pair, Inference inference, const RunConfig& cfg,
                              std::uint64_t data_seed) {
  DiagnosticsReport r;
  r.model = model.kind;
  r.pair = pair.text;
  r.inference = inference;
  r.metrics = eval.scores(inference).metrics;
  r.clp = clp;
  r.clp_threshold = cfg.diagnostics.clp_threshold;
  r.kl = eval.kl;
  r.normalized_kl = try_normalized(eval.kl.per_class);
  r.rho = eval.rho;
  r.correlation = try_correlation(r.normalized_kl, clp.per_class);
  r.train_seed = model.config.seed;
  r.data_seed = data_seed;
  r.ensemble_seeds = ensemble_seeds(model.config.seed, cfg.diagnostics.ensemble_size);
  r.config_digest = config_digest(config_to_json(cfg));
  return r;
}

json report_to_json(const DiagnosticsReport& r) {
  json out;
  out["metrics"] = {{"auroc", r.metrics.auroc}, {"aupr", r.metrics.aupr}, {"fpr_at_95_tpr", r.metrics.fpr_at_95_tpr}};
  out["inference"] = std::string(to_string(r.inference));
  out["clp"] = {{"per_class", r.clp.per_class},
                {"bounds", {r.clp.lower, r.clp.upper}},
                {"category", std::string(to_string(r.clp.category))},
                {"threshold", r.clp_threshold},
                {"clamped", r.clp.clamped}};
  out["overall_class_kl"] = {{"per_class", r.kl.per_class}, {"expected", r.kl.expected}, {"normalized", r.normalized_kl}};
  out["rho"] = r.rho;
  out["correlation"] = r.correlation ? json{{"spearman", r.correlation->spearman}, {"pearson", r.correlation->pearson}}
                                     : json(nullptr);
  out["run"] = {{"model", std::string(to_string(r.model))},
                {"pair", r.pair},
                {"seeds", {{"train", r.train_seed}, {"data", r.data_seed}, {"ensemble", r.ensemble_seeds}}},
                {"config_digest", r.config_digest}};
  return out;
}

BenchmarkResult run_benchmark(const RunConfig& cfg, const std::function<void(const std::string&)>& log) {
  BenchmarkResult result;
  const auto& bc = cfg.benchmark;
  std::vector<PairSpec> specs;
  for (const auto& p : bc.pairs) specs.push_back(parse_pair_spec(p));

  for (std::size_t pi = 0; pi < specs.size(); ++pi) {
    for (std::size_t si = 0; si < bc.seeds; ++si) {
      const std::uint64_t seed = bc.seed_base + si;
      const DatasetPair pair = load_pair(specs[pi], cfg, seed);
      TrainConfig tc = cfg.train;
      tc.seed = seed;

      std::map<ModelKind, TrainedModel> models;
      for (auto kind : bc.models) models.emplace(kind, train_model(kind, pair.id_train, tc));
      const auto ce = models.find(ModelKind::ce);
      const ClassifierEnsemble ensemble =
          train_ensemble(pair, cfg, seed, ce == models.end() ? nullptr : &ce->second);
      const ClpResult clp_result = clp(ensemble, pair.ood_test.inputs(), cfg.diagnostics.clp_threshold);

      for (auto kind : bc.models) {
        const auto eval = evaluate_model(models.at(kind), pair, cfg);
        for (auto inference : {Inference::mahalanobis, Inference::kde}) {
          result.rows.push_back({kind, specs[pi].name, inference, seed, eval.scores(inference).metrics, eval.rho,
                                 eval.kl.expected, clp_result});
        }
        const auto nkl = try_normalized(eval.kl.per_class);
        for (std::size_t c = 0; c < nkl.size(); ++c)
          result.kl_clp.push_back({kind, specs[pi].name, seed, c, eval.kl.per_class[c], nkl[c], clp_result.per_class[c]});
        result.correlations.push_back({kind, specs[pi].name, seed, try_correlation(nkl, clp_result.per_class)});
        if (log) {
          log(std::string(to_string(kind)) + " " + specs[pi].name + " seed " + std::to_string(seed) +
              ": mahalanobis auroc " + format_real(eval.mahalanobis.metrics.auroc) + ", kde auroc " +
              format_real(eval.kde.metrics.auroc));
        }
      }
    }
  }

  auto index_of = [](const auto& list, const auto& v) {
    return static_cast<std::size_t>(std::find(list.begin(), list.end(), v) - list.begin());
  };
  std::vector<std::string> pair_names;
  for (const auto& s : specs) pair_names.push_back(s.name);
  auto key = [&](ModelKind m, const std::string& p, std::uint64_t seed, std::size_t extra) {
    return std::make_tuple(index_of(bc.models, m), index_of(pair_names, p), extra, seed);
  };
  std::stable_sort(result.rows.begin(), result.rows.end(), [&](const BenchmarkRow& a, const BenchmarkRow& b) {
    return key(a.model, a.pair, a.seed, static_cast<std::size_t>(a.inference)) <
           key(b.model, b.pair, b.seed, static_cast<std::size_t>(b.inference));
  });
  std::stable_sort(result.kl_clp.begin(), result.kl_clp.end(), [&](const KlClpRow& a, const KlClpRow& b) {
    return std::make_tuple(index_of(bc.models, a.model), index_of(pair_names, a.pair), a.seed, a.cls) <
           std::make_tuple(index_of(bc.models, b.model), index_of(pair_names, b.pair), b.seed, b.cls);
  });
  std::stable_sort(result.correlations.begin(), result.correlations.end(),
                   [&](const CorrelationRow& a, const CorrelationRow& b) {
                     return key(a.model, a.pair, a.seed, 0) < key(b.model, b.pair, b.seed, 0);
                   });
  return result;
}

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string format_benchmark_csv(const BenchmarkResult& result) {
  std::string out = "model,pair,inference,seed,auroc,aupr,fpr95,rho,expected_kl,clp_min,clp_max,category\n";
  for (const auto& r : result.rows) {
    out += std::string(to_string(r.model)) + ',' + r.pair + ',' + std::string(to_string(r.inference)) + ',' +
           std::to_string(r.seed) + ',' + format_real(r.metrics.auroc) + ',' + format_real(r.metrics.aupr) + ',' +
           format_real(r.metrics.fpr_at_95_tpr) + ',' + format_real(r.rho) + ',' + format_real(r.expected_kl) + ',' +
           format_real(r.clp.lower) + ',' + format_real(r.clp.upper) + ',' + std::string(to_string(r.clp.category)) +
           '\n';
  }
  return out;
}

std::string format_kl_clp_csv(const BenchmarkResult& result) {
  std::string out = "model,pair,seed,class,kl,normalized_kl,clp\n";
  for (const auto& r : result.kl_clp) {
    out += std::string(to_string(r.model)) + ',' + r.pair + ',' + std::to_string(r.seed) + ',' +
           std::to_string(r.cls) + ',' + format_real(r.kl) + ',' + format_real(r.normalized_kl) + ',' +
           format_real(r.clp) + '\n';
  }
  return out;
}

std::string format_correlation_csv(const BenchmarkResult& result) {
  std::string out = "model,pair,seed,spearman,pearson\n";
  for (const auto& r : result.correlations) {
    out += std::string(to_string(r.model)) + ',' + r.pair + ',' + std::to_string(r.seed) + ',';
    out += r.correlation ? format_real(r.correlation->spearman) + ',' + format_real(r.correlation->pearson) : ",";
    out += '\n';
  }
  return out;
}

std::string format_rho_summary_csv(const BenchmarkResult& result, const RunConfig& cfg) {
  std::string out = "model,pair,seeds,rho_mean,rho_min,rho_max\n";
  for (auto model : cfg.benchmark.models) {
    for (const auto& p : cfg.benchmark.pairs) {
      const auto name = parse_pair_spec(p).name;
      std::vector<double> rhos;
      for (const auto& r : result.rows)
        if (r.model == model && r.pair == name && r.inference == Inference::mahalanobis) rhos.push_back(r.rho);
      if (rhos.empty()) continue;
      double mean = 0.0;
      for (double v : rhos) mean += v;
      mean /= static_cast<double>(rhos.size());
      const auto [lo, hi] = std::minmax_element(rhos.begin(), rhos.end());
      out += std::string(to_string(model)) + ',' + name + ',' + std::to_string(rhos.size()) + ',' + format_real(mean) +
             ',' + format_real(*lo) + ',' + format_real(*hi) + '\n';
    }
  }
  return out;
}

}  // namespace cood::cli
