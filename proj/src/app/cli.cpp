#include "knitpat/app/cli.hpp"

#include <charconv>
#include <optional>
#include <regex>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "commands.hpp"
#include "knitpat/app/run_config.hpp"

namespace knitpat {

namespace fs = std::filesystem;

fs::path create_run_dir(const fs::path& root, std::string_view prefix) {
  fs::create_directories(root);
  const std::regex pattern(std::regex_replace(std::string(prefix),
                                              std::regex(R"([.^$|()\[\]{}*+?\\])"), R"(\$&)") +
                           R"(-(\d{3,}))");
  std::size_t next = 1;
  for (const auto& entry : fs::directory_iterator(root)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) {
      std::size_t index = 0;
      const std::string digits = m[1].str();
      std::from_chars(digits.data(), digits.data() + digits.size(), index);
      next = std::max(next, index + 1);
    }
  }
  for (;; ++next) {
    const fs::path dir = root / fmt::format("{}-{:03}", prefix, next);
    if (fs::create_directory(dir)) return dir;
  }
}

namespace {

fs::path absolute_or_empty(const std::string& p) {
  return p.empty() ? fs::path() : fs::absolute(p).lexically_normal();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knit-pattern recognition pipeline: ingest, split, train, evaluate, compare, report",
               "knitpat"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, run_dir, dump_dir;
  std::optional<std::uint64_t> seed;
  bool stub = false;
  app.add_option("--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Seed for splitting, initialization, shuffling and augmentation");
  app.add_option("--run-dir", run_dir, "Directory holding run directories (default runs/)");
  app.add_flag("--stub-backbone", stub, "Use the built-in stub backbone instead of pretrained weights");
  app.add_option("--dump-augmented", dump_dir, "Write the first augmented training samples as PNG here");

  std::string corpus, manifest_out, manifest, split_out, eval_split = "test", run;
  std::vector<std::string> backbones;
  bool parallel = false;

  auto* ingest = app.add_subcommand("ingest", "Scan a corpus directory into a manifest");
  ingest->add_option("--corpus", corpus, "Corpus root (class-name subdirectories)");
  ingest->add_option("--out", manifest_out, "Manifest CSV to write");

  auto* split = app.add_subcommand("split", "Assign a stratified train/val/test split");
  split->add_option("--manifest", manifest, "Manifest CSV to split");
  split->add_option("--out", split_out, "Write here instead of overwriting the manifest");

  auto* train = app.add_subcommand("train", "Train a classifier into a new run directory");
  train->add_option("--manifest", manifest, "Split manifest CSV");

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a run's checkpoint on a split");
  evaluate->add_option("run", run, "Run directory")->required();
  evaluate->add_option("--split", eval_split, "train, val or test")
      ->check(CLI::IsMember({"train", "val", "test"}));

  auto* compare = app.add_subcommand("compare", "Train and test several backbones");
  compare->add_option("--backbones", backbones, "Backbone ids, stub or stub:<dim>")
      ->delimiter(',')
      ->required();
  compare->add_option("--manifest", manifest, "Split manifest CSV");
  compare->add_flag("--parallel", parallel, "Train backbones concurrently");

  auto* report = app.add_subcommand("report", "Re-render tables and plots from a run's files");
  report->add_option("run", run, "Run or comparison directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  RunConfig cfg;
  try {
    cfg = config_path.empty() ? load_run_config_text("", fs::current_path())
                              : load_run_config(config_path);
    if (seed) cfg.train.seed = *seed;
    if (!run_dir.empty()) cfg.paths.runs = absolute_or_empty(run_dir);
    if (!dump_dir.empty()) cfg.dump_augmented = absolute_or_empty(dump_dir);
    if (stub && cfg.model.backbone.name != BackboneName::kStub) {
      cfg.model.backbone = stub_backbone_spec();
    }
    if (!corpus.empty()) cfg.paths.corpus = absolute_or_empty(corpus);
    if (!manifest_out.empty()) cfg.paths.manifest = absolute_or_empty(manifest_out);
    if (!manifest.empty()) cfg.paths.manifest = absolute_or_empty(manifest);
    cfg.validate();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }

  try {
    if (*ingest) {
      commands::ingest(cfg, out);
    } else if (*split) {
      commands::split(cfg, absolute_or_empty(split_out), out);
    } else if (*train) {
      commands::train(cfg, out);
    } else if (*evaluate) {
      commands::evaluate(cfg, run, *parse_split(eval_split), out);
    } else if (*compare) {
      commands::compare(cfg, backbones, parallel, out);
    } else if (*report) {
      commands::report(cfg, run, out);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace knitpat
