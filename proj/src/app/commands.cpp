#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "knitpat/app/cli.hpp"
#include "knitpat/dataset/class_weights.hpp"
#include "knitpat/dataset/split.hpp"
#include "knitpat/eval/artifacts.hpp"
#include "knitpat/eval/report.hpp"
#include "knitpat/image/batch_stream.hpp"
#include "knitpat/model/checkpoint.hpp"
#include "knitpat/model/weights_registry.hpp"
#include "knitpat/train/trainer.hpp"

namespace knitpat {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kStreamKey = 0x53545245414d;
constexpr const char* kModelFile = "model.kpck";
constexpr const char* kBestFile = "best.kpck";
constexpr const char* kConfigFile = "config.ini";

std::vector<std::string> class_names() {
  return {kClassNames.begin(), kClassNames.end()};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

void require_manifest(const RunConfig& cfg) {
  if (cfg.paths.manifest.empty()) {
    throw ConfigError("no manifest given (set [paths] manifest or pass --manifest)");
  }
  if (!fs::is_regular_file(cfg.paths.manifest)) {
    throw ConfigError("manifest not found: " + cfg.paths.manifest.string());
  }
}

/// Loads the registry and verifies checksums for non-stub backbones.
std::optional<WeightsRegistry> check_backbones(const RunConfig& cfg,
                                               const std::vector<BackboneSpec>& specs) {
  const bool needs_registry = std::any_of(specs.begin(), specs.end(), [](const BackboneSpec& s) {
    return s.name != BackboneName::kStub;
  });
  if (!needs_registry) return std::nullopt;
  auto registry = WeightsRegistry::load(cfg.paths.weights);
  for (const auto& s : specs) {
    if (s.name != BackboneName::kStub) registry.verify(s.name);
  }
  return registry;
}

void require_split(const DatasetManifest& m, Split split) {
  if (m.indices_in(split).empty()) {
    throw DatasetError(fmt::format("manifest has no {} samples; run `knitpat split` first",
                                   to_string(split)));
  }
}

std::string run_prefix(const BackboneSpec& spec, std::uint64_t seed) {
  std::string name = backbone_choice(spec);
  std::replace(name.begin(), name.end(), ':', '-');
  return fmt::format("{}-seed{}", name, seed);
}

HistoryCurves curves_of(const TrainingHistory& h) {
  HistoryCurves c;
  for (const auto& r : h.records) {
    c.train_loss.push_back(r.train_loss);
    c.val_loss.push_back(r.val_loss);
    c.train_accuracy.push_back(r.train_accuracy);
    c.val_accuracy.push_back(r.val_accuracy);
  }
  return c;
}

std::string class_weights_json(const ClassWeights& w) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < w.size(); ++c) j[std::string(kClassNames[c])] = w[c];
  return j.dump(2) + "\n";
}

struct TrainedRun {
  TrainResult result;
  fs::path dir;
};

// Trains one model into `dir`, which must already exist.
TrainedRun train_into(const RunConfig& cfg, const TrainConfig& train_cfg,
                      const ClassifierSpec& spec, const WeightsRegistry* registry,
                      const DatasetManifest& manifest, const fs::path& dir, std::ostream& out) {
  RunConfig snapshot = cfg;
  snapshot.model = spec;
  snapshot.train = train_cfg;
  write_text(dir / kConfigFile, run_config_ini(snapshot));

  const RandomStream stream_rng = RandomStream(train_cfg.seed).substream(kStreamKey);
  StreamOptions options;
  options.workers = cfg.workers;
  ManifestBatchStream train_stream(manifest, Split::kTrain, cfg.augmentation,
                                   train_cfg.batch_size, stream_rng, options);
  ManifestBatchStream val_stream(manifest, Split::kVal, cfg.augmentation, train_cfg.batch_size,
                                 stream_rng, options);

  if (!cfg.dump_augmented.empty()) {
    ManifestBatchStream preview(manifest, Split::kTrain, cfg.augmentation, train_cfg.batch_size,
                                stream_rng, options);
    preview.start_epoch();
    fs::create_directories(cfg.dump_augmented);
    std::size_t written = 0;
    while (written < cfg.dump_count) {
      auto batch = preview.next();
      if (!batch) break;
      const std::size_t keep = std::min(batch->size(), cfg.dump_count - written);
      batch->images.resize(keep);
      batch->labels.resize(keep);
      batch->sample_ids.resize(keep);
      dump_batch(*batch, cfg.dump_augmented, fmt::format("epoch1_{:03}", written));
      written += keep;
    }
    out << fmt::format("wrote {} augmented samples to {}\n", written,
                       cfg.dump_augmented.string());
  }

  const ClassWeights weights = train_cfg.use_class_weights
                                   ? compute_class_weights(manifest)
                                   : ClassWeights::uniform(kNumClasses);
  write_text(dir / "class_weights.json", class_weights_json(weights));

  auto model = build_classifier(spec, registry, train_cfg.seed);
  const auto counts = model.count_parameters();
  out << fmt::format("{}: {} trainable / {} frozen parameters\n", backbone_display_name(spec.backbone),
                     counts.trainable, counts.frozen);

  TrainOptions train_options;
  train_options.checkpoint_path = dir / kBestFile;
  train_options.on_epoch = [&](const EpochRecord& r) {
    out << fmt::format(
        "epoch {}/{}  train_loss {:.4f}  train_acc {:.4f}  val_loss {:.4f}  val_acc {:.4f}  "
        "({:.1f}s)\n",
        r.epoch, train_cfg.max_epochs, r.train_loss, r.train_accuracy, r.val_loss,
        r.val_accuracy, r.wall_time);
  };
  auto result = train(std::move(model), train_stream, val_stream, train_cfg, weights,
                      train_options);
  save_checkpoint(result.model, dir / kModelFile);
  write_history_csv(result.history, dir / "history.csv");
  write_history_json(result.history, dir / "history.json");
  plot_history(curves_of(result.history), dir / "history.png");
  if (result.history.stopped_early) {
    out << fmt::format("early stop after epoch {}; best epoch {}\n",
                       result.history.records.size(), result.history.best_epoch);
  }
  return {std::move(result), dir};
}

struct Predictions {
  std::vector<std::size_t> labels;
  Matrix probs;
};

Predictions predict_split(const ClassifierModel& model, const DatasetManifest& manifest,
                          Split split, const RunConfig& cfg) {
  StreamOptions options;
  options.augment = false;
  options.workers = cfg.workers;
  ManifestBatchStream stream(manifest, split, cfg.augmentation, cfg.train.batch_size,
                             RandomStream(cfg.train.seed), options);
  Predictions p;
  std::vector<Matrix> parts;
  stream.start_epoch();
  Eigen::Index rows = 0;
  while (auto batch = stream.next()) {
    parts.push_back(model.predict_proba(batch->images));
    rows += parts.back().rows();
    p.labels.insert(p.labels.end(), batch->labels.begin(), batch->labels.end());
  }
  p.probs.resize(rows, static_cast<Eigen::Index>(model.num_classes()));
  Eigen::Index at = 0;
  for (const auto& part : parts) {
    p.probs.middleRows(at, part.rows()) = part;
    at += part.rows();
  }
  return p;
}

fs::path locate_run(const RunConfig& cfg, const fs::path& run) {
  if (fs::is_directory(run)) return run;
  if (run.is_relative() && fs::is_directory(cfg.paths.runs / run)) return cfg.paths.runs / run;
  throw ConfigError("run directory not found: " + run.string());
}

std::string summary_lines(const EvaluationReport& r) {
  std::string s = fmt::format("samples {}\naccuracy {:.4f}\nlog_loss {:.4f}\n", r.num_samples,
                              r.accuracy, r.log_loss);
  s += std::isfinite(r.roc.macro_auc) ? fmt::format("macro_roc_auc {:.4f}\n", r.roc.macro_auc)
                                      : std::string("macro_roc_auc n/a\n");
  s += fmt::format("macro precision {:.4f} recall {:.4f} f1 {:.4f}\n", r.scores.macro.precision,
                   r.scores.macro.recall, r.scores.macro.f1);
  return s;
}

}  // namespace

namespace commands {

void ingest(const RunConfig& cfg, std::ostream& out) {
  if (cfg.paths.corpus.empty()) throw ConfigError("no corpus given (set [paths] corpus or pass --corpus)");
  if (!fs::is_directory(cfg.paths.corpus)) {
    throw ConfigError("corpus directory not found: " + cfg.paths.corpus.string());
  }
  if (cfg.paths.manifest.empty()) throw ConfigError("no output manifest given (pass --out)");

  const auto manifest = scan_corpus(cfg.paths.corpus);
  write_manifest(manifest, cfg.paths.manifest);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    out << fmt::format("{:<10} {}\n", kClassNames[c], manifest.class_counts()[c]);
  }
  out << fmt::format("{:<10} {}\nwrote {}\n", "total", manifest.size(),
                     cfg.paths.manifest.string());
}

void split(const RunConfig& cfg, const fs::path& out_manifest, std::ostream& out) {
  require_manifest(cfg);
  const auto manifest = load_manifest(cfg.paths.manifest);
  const auto assigned = stratified_split(manifest, cfg.split, cfg.train.seed);
  const fs::path target = out_manifest.empty() ? cfg.paths.manifest : out_manifest;
  write_manifest(assigned, target);
  out << fmt::format("{:<10} {:>6} {:>6} {:>6}\n", "class", "train", "val", "test");
  const auto tr = assigned.class_counts_in(Split::kTrain);
  const auto va = assigned.class_counts_in(Split::kVal);
  const auto te = assigned.class_counts_in(Split::kTest);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    out << fmt::format("{:<10} {:>6} {:>6} {:>6}\n", kClassNames[c], tr[c], va[c], te[c]);
  }
  out << fmt::format("{:<10} {:>6} {:>6} {:>6}\nwrote {}\n", "total",
                     assigned.indices_in(Split::kTrain).size(),
                     assigned.indices_in(Split::kVal).size(),
                     assigned.indices_in(Split::kTest).size(), target.string());
}

fs::path train(const RunConfig& cfg, std::ostream& out) {
  require_manifest(cfg);
  const auto registry = check_backbones(cfg, {cfg.model.backbone});
  const auto manifest = load_manifest(cfg.paths.manifest);
  require_split(manifest, Split::kTrain);
  require_split(manifest, Split::kVal);

  const fs::path dir = create_run_dir(cfg.paths.runs, run_prefix(cfg.model.backbone, cfg.train.seed));
  out << "run directory " << dir.string() << "\n";
  train_into(cfg, cfg.train, cfg.model, registry ? &*registry : nullptr, manifest, dir, out);
  return dir;
}

void evaluate(const RunConfig& cfg, const fs::path& run, Split split, std::ostream& out) {
  const fs::path dir = locate_run(cfg, run);
  if (!fs::is_regular_file(dir / kModelFile)) {
    throw std::runtime_error("no checkpoint in " + dir.string() + " (expected " + kModelFile + ")");
  }
  const RunConfig run_cfg = load_run_config(dir / kConfigFile);
  const auto model = load_checkpoint(dir / kModelFile);
  const auto manifest = load_manifest(run_cfg.paths.manifest);
  require_split(manifest, split);

  const auto p = predict_split(model, manifest, split, run_cfg);
  const auto report = evaluate_predictions(p.labels, p.probs, class_names());
  const fs::path eval_dir = dir / ("eval-" + std::string(to_string(split)));
  write_evaluation(report, eval_dir);
  out << summary_lines(report) << "\n" << classification_report(report.scores, report.class_names);
  out << "wrote " << eval_dir.string() << "\n";
}

fs::path compare(const RunConfig& cfg, const std::vector<std::string>& backbones, bool parallel,
                 std::ostream& out) {
  if (backbones.empty()) throw ConfigError("compare needs at least one backbone");
  std::vector<BackboneSpec> specs;
  for (const auto& b : backbones) specs.push_back(parse_backbone_choice(b));
  for (std::size_t i = 0; i < specs.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (specs[i] == specs[j]) throw ConfigError("backbone listed twice: " + backbones[i]);
    }
  }
  require_manifest(cfg);
  TrainConfig preset = cfg.train;
  const auto base = TrainConfig::comparison_preset();
  preset.learning_rate = cfg.compare.learning_rate.value_or(base.learning_rate);
  preset.max_epochs = cfg.compare.max_epochs.value_or(base.max_epochs);
  preset.use_class_weights = cfg.compare.use_class_weights.value_or(base.use_class_weights);
  try {
    preset.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  const auto registry = check_backbones(cfg, specs);
  const auto manifest = load_manifest(cfg.paths.manifest);
  for (auto s : {Split::kTrain, Split::kVal, Split::kTest}) require_split(manifest, s);

  const fs::path dir = create_run_dir(cfg.paths.runs, fmt::format("compare-seed{}", cfg.train.seed));
  out << "comparison directory " << dir.string() << "\n";

  auto job = [&](std::size_t i, std::ostream& log) {
    ClassifierSpec spec = cfg.model;
    spec.backbone = specs[i];
    std::string name = backbone_choice(specs[i]);
    std::replace(name.begin(), name.end(), ':', '-');
    const fs::path sub = dir / name;
    fs::create_directory(sub);
    RunConfig job_cfg = cfg;
    job_cfg.dump_augmented.clear();
    const auto run = train_into(job_cfg, preset, spec, registry ? &*registry : nullptr, manifest,
                                sub, log);
    const auto& h = run.result.history;
    const EpochRecord& rec =
        preset.early_stopping.restore_best ? h.best() : h.records.back();
    const auto p = predict_split(run.result.model, manifest, Split::kTest, job_cfg);
    const auto report = evaluate_predictions(p.labels, p.probs, class_names());
    write_evaluation(report, sub / "eval-test");
    return ResultRow{backbone_display_name(specs[i]), rec.train_loss, rec.train_accuracy,
                     report.log_loss, report.accuracy};
  };

  std::vector<ResultRow> rows(specs.size());
  std::vector<std::ostringstream> logs(specs.size());
  if (parallel) {
    std::vector<std::future<ResultRow>> futures;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      futures.push_back(std::async(std::launch::async, job, i, std::ref(logs[i])));
    }
    for (std::size_t i = 0; i < specs.size(); ++i) rows[i] = futures[i].get();
  } else {
    for (std::size_t i = 0; i < specs.size(); ++i) rows[i] = job(i, logs[i]);
  }
  for (const auto& log : logs) out << log.str();

  write_text(dir / "results.txt", results_table(rows));
  write_text(dir / "results.csv", results_table_csv(rows));
  out << "\n" << results_table(rows);
  return dir;
}

void report(const RunConfig& cfg, const fs::path& run, std::ostream& out) {
  const fs::path dir = locate_run(cfg, run);
  bool found = false;
  if (fs::is_regular_file(dir / "results.csv")) {
    const auto rows = read_results_csv(dir / "results.csv");
    write_text(dir / "results.txt", results_table(rows));
    out << results_table(rows);
    found = true;
  }
  std::vector<fs::path> runs = {dir};
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) runs.push_back(entry.path());
  }
  std::sort(runs.begin() + 1, runs.end());
  for (const auto& r : runs) {
    if (fs::is_regular_file(r / "history.json")) {
      const auto h = read_history_json(r / "history.json");
      plot_history(curves_of(h), r / "history.png");
      out << fmt::format("{}: {} epochs, best epoch {} (val_loss {:.4f}){}\n", r.filename().string(),
                         h.records.size(), h.best_epoch, h.best().val_loss,
                         h.stopped_early ? ", stopped early" : "");
      found = true;
    }
    for (const char* split : {"eval-train", "eval-val", "eval-test"}) {
      const fs::path metrics = r / split / "metrics.json";
      if (!fs::is_regular_file(metrics)) continue;
      std::ifstream in(metrics);
      const auto j = nlohmann::json::parse(in);
      out << fmt::format("{} {}: accuracy {:.4f}  log_loss {:.4f}  macro_roc_auc {}\n",
                         r.filename().string(), split, j.at("accuracy").get<double>(),
                         j.at("log_loss").get<double>(),
                         j.at("macro_auc").is_null()
                             ? std::string("n/a")
                             : fmt::format("{:.4f}", j.at("macro_auc").get<double>()));
      found = true;
    }
  }
  if (!found) throw std::runtime_error("nothing to report in " + dir.string());
}

}  // namespace commands
}  // namespace knitpat
