#include "cood_cli/app.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "cood/scoring.hpp"
#include "cood/training.hpp"
#include "cood_cli/config.hpp"
#include "cood_cli/manifest.hpp"
#include "cood_cli/pipeline.hpp"

namespace cood::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Overrides = std::vector<std::pair<std::string, std::string>>;

struct CommonOptions {
  std::optional<std::string> config_path;
  std::vector<std::string> sets;
  Overrides flags;  // dedicated flags, applied after --set
  std::optional<std::string> out;
};

void add_common(CLI::App* sub, CommonOptions& o) {
  sub->add_option("--config", o.config_path, "Config file of `key = value` lines");
  sub->add_option("--set", o.sets, "Config override KEY=VALUE (repeatable)")->take_all();
  sub->add_option("--out", o.out, std::string("Output directory (default: $") + kOutputRootEnv + "/<run-id>)");
}

void add_flag_override(CLI::App* sub, CommonOptions& o, const std::string& flag, const std::string& key,
                       const std::string& help) {
  sub->add_option_function<std::string>(flag, [&o, key](const std::string& v) { o.flags.emplace_back(key, v); }, help);
}

void add_train_flags(CLI::App* sub, CommonOptions& o) {
  add_flag_override(sub, o, "--epochs", "train.epochs", "Training epochs");
  add_flag_override(sub, o, "--batch-size", "train.batch_size", "Minibatch size");
  add_flag_override(sub, o, "--lr", "train.lr", "SGD learning rate");
  add_flag_override(sub, o, "--momentum", "train.momentum", "SGD momentum");
  add_flag_override(sub, o, "--weight-decay", "train.weight_decay", "Coupled L2 weight decay");
  add_flag_override(sub, o, "--temperature", "train.temperature", "Contrastive softmax temperature");
  add_flag_override(sub, o, "--queue-size", "train.queue_size", "Moco negative queue capacity");
  add_flag_override(sub, o, "--encoder-momentum", "train.encoder_momentum", "Moco key-encoder EMA momentum");
}

void add_scoring_flags(CLI::App* sub, CommonOptions& o) {
  add_flag_override(sub, o, "--jitter-scale", "scoring.jitter_scale", "Covariance jitter as a fraction of trace/D");
  add_flag_override(sub, o, "--kde-bandwidth", "scoring.kde_bandwidth", "Fixed KDE bandwidth (default: Scott's rule)");
}

RunConfig resolve_config(const CommonOptions& o, const Overrides& extra = {}) {
  Overrides all;
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects KEY=VALUE, got '" + s + "'");
    all.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  all.insert(all.end(), o.flags.begin(), o.flags.end());
  all.insert(all.end(), extra.begin(), extra.end());
  std::optional<fs::path> path;
  if (o.config_path) path = *o.config_path;
  return load_config(path, all);
}

fs::path resolve_out(const CommonOptions& o, const std::string& run_id, const std::optional<fs::path>& fallback = {}) {
  if (o.out) return *o.out;
  if (fallback) return *fallback;
  const char* root = std::getenv(kOutputRootEnv);
  return fs::path(root && *root ? root : "runs") / run_id;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string format_loss_curve(const TrainedModel& model) {
  std::string out = "epoch,loss\n";
  for (std::size_t e = 0; e < model.loss_trace.size(); ++e)
    out += std::to_string(e + 1) + ',' + format_real(model.loss_trace[e]) + '\n';
  return out;
}

// Model plus whatever its run directory records about how it was trained.
struct LoadedRun {
  TrainedModel model;
  std::optional<fs::path> run_dir;
  fs::path checkpoint;
  std::optional<std::string> pair;
  std::optional<std::uint64_t> data_seed;
};

LoadedRun load_run(const std::optional<std::string>& run_dir, const std::optional<std::string>& checkpoint) {
  if (run_dir.has_value() == checkpoint.has_value()) throw UsageError("pass exactly one of --run or --checkpoint");
  LoadedRun r;
  if (run_dir) {
    r.run_dir = *run_dir;
    if (!fs::is_directory(*r.run_dir)) throw DataError("run directory not found: " + *run_dir);
    r.checkpoint = *r.run_dir / "model.ckpt";
    if (const auto manifest_path = *r.run_dir / "manifest.json"; fs::exists(manifest_path)) {
      json j;
      try {
        j = json::parse(read_text_file(manifest_path));
      } catch (const json::exception& e) {
        throw DataError("unreadable manifest " + manifest_path.string() + ": " + e.what());
      }
      if (j.contains("extra") && j["extra"].contains("pair")) r.pair = j["extra"]["pair"].get<std::string>();
      if (j.contains("seeds") && j["seeds"].contains("data")) r.data_seed = j["seeds"]["data"].get<std::uint64_t>();
    }
  } else {
    r.checkpoint = *checkpoint;
  }
  if (!fs::exists(r.checkpoint)) throw DataError("checkpoint not found: " + r.checkpoint.string());
  r.model = load_checkpoint(r.checkpoint);
  return r;
}

std::vector<InputDigest> digests(const std::vector<fs::path>& files) {
  std::vector<InputDigest> out;
  for (const auto& f : files) out.push_back(digest_file(f));
  return out;
}

// ---- subcommands ------------------------------------------------------------

struct TrainArgs {
  CommonOptions common;
  std::string model;
  std::string data;
  std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  Overrides extra;
  if (a.seed) extra.emplace_back("train.seed", std::to_string(*a.seed));
  const RunConfig cfg = resolve_config(a.common, extra);
  const ModelKind kind = parse_model_kind(a.model);
  const PairSpec spec = parse_pair_spec(a.data);
  const std::uint64_t seed = cfg.train.seed;

  const DatasetPair pair = load_pair(spec, cfg, seed);
  const TrainedModel model = train_model(kind, pair.id_train, cfg.train);

  const std::string run_id = "train-" + std::string(to_string(kind)) + "-" + spec.name + "-s" + std::to_string(seed);
  const fs::path dir = resolve_out(a.common, run_id);
  write_text_file(dir / "model.ckpt", serialize_checkpoint(model));
  write_text_file(dir / "loss_curve.csv", format_loss_curve(model));

  RunManifest m;
  m.run_id = run_id;
  m.command = "train";
  m.argv = argv;
  m.config = config_to_json(cfg);
  m.config_digest = config_digest(m.config);
  m.seeds = {{"train", seed}, {"data", seed}};
  m.extra = {{"model", std::string(to_string(kind))}, {"pair", spec.text}};
  m.inputs = digests(pair_input_files(spec));
  m.outputs = {"model.ckpt", "loss_curve.csv"};
  m.wall_clock_seconds = seconds_since(start);
  write_manifest(dir, m);
  out << "wrote " << (dir / "model.ckpt").string() << " (final loss " << format_real(model.loss_trace.back())
      << ")\n";
  return kExitOk;
}

struct EvalArgs {
  CommonOptions common;
  std::optional<std::string> run_dir;
  std::optional<std::string> checkpoint;
  std::optional<std::string> pair;
  std::optional<std::uint64_t> data_seed;
  std::string inference = "mahalanobis";
};

struct EvalContext {
  LoadedRun run;
  PairSpec spec;
  std::uint64_t data_seed = 0;
  DatasetPair pair;
};

EvalContext prepare_eval(const EvalArgs& a, const RunConfig& cfg) {
  EvalContext c;
  c.run = load_run(a.run_dir, a.checkpoint);
  const auto pair_text = a.pair ? a.pair : c.run.pair;
  if (!pair_text) throw UsageError("no --pair given and the run directory does not record one");
  c.spec = parse_pair_spec(*pair_text);
  c.data_seed = a.data_seed.value_or(c.run.data_seed.value_or(c.run.model.config.seed));
  c.pair = load_pair(c.spec, cfg, c.data_seed);
  return c;
}

RunManifest eval_manifest(const std::string& command, const EvalContext& c, const RunConfig& cfg,
                          const std::vector<std::string>& argv) {
  RunManifest m;
  m.run_id = command + "-" + std::string(to_string(c.run.model.kind)) + "-" + c.spec.name + "-s" +
             std::to_string(c.data_seed);
  m.command = command;
  m.argv = argv;
  m.config = config_to_json(cfg);
  m.config_digest = config_digest(m.config);
  m.seeds = {{"train", c.run.model.config.seed}, {"data", c.data_seed}};
  m.extra = {{"model", std::string(to_string(c.run.model.kind))}, {"pair", c.spec.text}};
  auto files = pair_input_files(c.spec);
  files.insert(files.begin(), c.run.checkpoint);
  m.inputs = digests(files);
  return m;
}

int cmd_score(const EvalArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const RunConfig cfg = resolve_config(a.common);
  const EvalContext c = prepare_eval(a, cfg);
  // Everything is computed before the first file is written, so a dimension
  // mismatch leaves no partial output behind.
  const ModelEvaluation eval = evaluate_model(c.run.model, c.pair, cfg);

  RunManifest m = eval_manifest("score", c, cfg, argv);
  const fs::path dir = resolve_out(a.common, m.run_id, c.run.run_dir);
  write_text_file(dir / "mahalanobis_scores.csv",
                  format_score_csv(eval.mahalanobis.id_scores, eval.mahalanobis.ood_scores));
  write_text_file(dir / "kde_scores.csv", format_score_csv(eval.kde.id_scores, eval.kde.ood_scores));
  m.outputs = {"mahalanobis_scores.csv", "kde_scores.csv"};
  m.extra["auroc"] = {{"mahalanobis", eval.mahalanobis.metrics.auroc}, {"kde", eval.kde.metrics.auroc}};
  m.wall_clock_seconds = seconds_since(start);
  write_manifest(dir, m, "score_manifest.json");
  out << "mahalanobis auroc " << format_real(eval.mahalanobis.metrics.auroc) << ", kde auroc "
      << format_real(eval.kde.metrics.auroc) << "\n";
  return kExitOk;
}

int cmd_diagnose(const EvalArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  RunConfig cfg = resolve_config(a.common);
  const Inference inference = parse_inference(a.inference);
  const EvalContext c = prepare_eval(a, cfg);
  // The CE ensemble is trained with the run's own training setup.
  cfg.train = c.run.model.config;

  const ModelEvaluation eval = evaluate_model(c.run.model, c.pair, cfg);
  const TrainedModel* reuse = c.run.model.kind == ModelKind::ce ? &c.run.model : nullptr;
  const ClassifierEnsemble ensemble = train_ensemble(c.pair, cfg, c.run.model.config.seed, reuse);
  const ClpResult clp_result = clp(ensemble, c.pair.ood_test.inputs(), cfg.diagnostics.clp_threshold);
  const DiagnosticsReport report = make_report(c.run.model, eval, clp_result, c.spec, inference, cfg, c.data_seed);

  RunManifest m = eval_manifest("diagnose", c, cfg, argv);
  const fs::path dir = resolve_out(a.common, m.run_id, c.run.run_dir);
  write_text_file(dir / "diagnostics.json", report_to_json(report).dump(2) + "\n");
  m.outputs = {"diagnostics.json"};
  m.wall_clock_seconds = seconds_since(start);
  write_manifest(dir, m, "diagnose_manifest.json");
  out << "wrote " << (dir / "diagnostics.json").string() << " (rho " << format_real(report.rho) << ", clp "
      << to_string(report.clp.category) << ")\n";
  return kExitOk;
}

struct BenchArgs {
  CommonOptions common;
  std::optional<std::string> pairs;
  std::optional<std::string> models;
  std::optional<std::string> seeds;
  std::optional<std::string> seed_base;
  bool quiet = false;
};

int cmd_benchmark(const BenchArgs& a, const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  Overrides extra;
  if (a.pairs) extra.emplace_back("benchmark.pairs", *a.pairs);
  if (a.models) extra.emplace_back("benchmark.models", *a.models);
  if (a.seeds) extra.emplace_back("benchmark.seeds", *a.seeds);
  if (a.seed_base) extra.emplace_back("benchmark.seed_base", *a.seed_base);
  const RunConfig cfg = resolve_config(a.common, extra);
  std::vector<fs::path> inputs;
  for (const auto& p : cfg.benchmark.pairs) {
    const auto files = pair_input_files(parse_pair_spec(p));
    inputs.insert(inputs.end(), files.begin(), files.end());
  }

  std::function<void(const std::string&)> log;
  if (!a.quiet) log = [&err](const std::string& line) { err << "cood: " << line << '\n'; };
  const BenchmarkResult result = run_benchmark(cfg, log);

  RunManifest m;
  m.config = config_to_json(cfg);
  m.config_digest = config_digest(m.config);
  m.run_id = "benchmark-" + m.config_digest.substr(0, 8);
  m.command = "benchmark";
  m.argv = argv;
  json seeds = json::array();
  for (std::size_t i = 0; i < cfg.benchmark.seeds; ++i) seeds.push_back(cfg.benchmark.seed_base + i);
  m.seeds = seeds;
  m.inputs = digests(inputs);

  const fs::path dir = resolve_out(a.common, m.run_id);
  write_text_file(dir / "benchmark.csv", format_benchmark_csv(result));
  write_text_file(dir / "kl_clp.csv", format_kl_clp_csv(result));
  write_text_file(dir / "kl_clp_correlation.csv", format_correlation_csv(result));
  write_text_file(dir / "rho_summary.csv", format_rho_summary_csv(result, cfg));
  m.outputs = {"benchmark.csv", "kl_clp.csv", "kl_clp_correlation.csv", "rho_summary.csv"};
  m.wall_clock_seconds = seconds_since(start);
  write_manifest(dir, m);
  out << "wrote " << (dir / "benchmark.csv").string() << " (" << result.rows.size() << " rows)\n";
  return kExitOk;
}

// ---- error reporting --------------------------------------------------------

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::string escaped;
  for (char ch : s) {
    if (ch == '"' || ch == '\\') escaped += '\\';
    escaped += ch;
  }
  return escaped;
}

int report(std::ostream& err, int code, std::string_view kind, const std::string& message) {
  err << "cood: error: code=" << code << " kind=" << kind << " message=\"" << one_line(message) << "\"\n";
  return code;
}

std::string key_help_footer() {
  std::ostringstream os;
  os << "Config keys (file `key = value`, or --set key=value):\n";
  for (const auto& [key, value] : config_key_defaults()) os << "  " << key << " = " << value << "\n";
  os << "Exit codes: 0 ok, 2 usage, 3 config, 4 data, 5 numerical.\n";
  return os.str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Contrastive-learning OOD detection toolkit", "cood"};
  app.require_subcommand(1);
  app.footer(key_help_footer());

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train one model and write a checkpoint");
  add_common(train_cmd, train.common);
  add_train_flags(train_cmd, train.common);
  train_cmd->add_option("--model", train.model, "Model kind")->required()->check(CLI::IsMember({"ce", "moco", "supclr"}));
  train_cmd->add_option("--data", train.data, "Pair: synthetic:<near|far|shared-style> or csv:<dir>")->required();
  train_cmd->add_option("--seed", train.seed, "Training and data seed (default 0)");

  EvalArgs score;
  auto* score_cmd = app.add_subcommand("score", "Write Mahalanobis and KDE score CSVs for a trained model");
  EvalArgs diagnose;
  auto* diagnose_cmd = app.add_subcommand("diagnose", "Write the diagnostics report JSON for a trained model");
  for (auto [cmd, args] : {std::pair{score_cmd, &score}, std::pair{diagnose_cmd, &diagnose}}) {
    add_common(cmd, args->common);
    add_scoring_flags(cmd, args->common);
    cmd->add_option("--run", args->run_dir, "Run directory written by `train`");
    cmd->add_option("--checkpoint", args->checkpoint, "Checkpoint file (instead of --run)");
    cmd->add_option("--pair", args->pair, "Pair spec (default: the run's training pair)");
    cmd->add_option("--data-seed", args->data_seed, "Synthetic pair seed (default: the run's)");
  }
  diagnose_cmd->add_option("--inference", diagnose.inference, "Inference reported under `metrics`")
      ->check(CLI::IsMember({"mahalanobis", "kde"}))
      ->capture_default_str();
  add_flag_override(diagnose_cmd, diagnose.common, "--clp-threshold", "diagnostics.clp_threshold",
                    "|CLP| threshold separating near from far");
  add_flag_override(diagnose_cmd, diagnose.common, "--ensemble-size", "diagnostics.ensemble_size",
                    "CE ensemble members for CLP");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("benchmark", "Run the model x pair x inference x seed grid");
  add_common(bench_cmd, bench.common);
  add_train_flags(bench_cmd, bench.common);
  add_scoring_flags(bench_cmd, bench.common);
  bench_cmd->add_option("--pairs", bench.pairs, "Comma-separated pair specs (default near,far,shared-style)");
  bench_cmd->add_option("--models", bench.models, "Comma-separated models (default ce,moco,supclr)");
  bench_cmd->add_option("--seeds", bench.seeds, "Number of seeds (default 5)");
  bench_cmd->add_option("--seed-base", bench.seed_base, "First seed (default 0)");
  bench_cmd->add_flag("--quiet", bench.quiet, "No per-cell progress lines");

  std::vector<std::string> argv{"cood"};
  argv.insert(argv.end(), args.begin(), args.end());
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return report(err, kExitUsage, "usage", e.what());
  }

  try {
    if (*train_cmd) return cmd_train(train, argv, out);
    if (*score_cmd) return cmd_score(score, argv, out);
    if (*diagnose_cmd) return cmd_diagnose(diagnose, argv, out);
    if (*bench_cmd) return cmd_benchmark(bench, argv, out, err);
    return report(err, kExitUsage, "usage", "no subcommand");
  } catch (const UsageError& e) {
    return report(err, kExitUsage, "usage", e.what());
  } catch (const ConfigError& e) {
    return report(err, kExitConfig, "config", e.what());
  } catch (const NumericalError& e) {
    return report(err, kExitNumerical, "numerical", e.what());
  } catch (const FitError& e) {
    return report(err, kExitNumerical, "numerical", e.what());
  } catch (const LossError& e) {
    return report(err, kExitNumerical, "numerical", e.what());
  } catch (const DataError& e) {
    return report(err, kExitData, "data", e.what());
  } catch (const CheckpointError& e) {
    return report(err, kExitData, "data", e.what());
  } catch (const ShapeError& e) {
    return report(err, kExitData, "data", e.what());
  } catch (const fs::filesystem_error& e) {
    return report(err, kExitData, "data", e.what());
  } catch (const std::exception& e) {
    return report(err, kExitInternal, "internal", e.what());
  }
}

}  // namespace cood::cli
