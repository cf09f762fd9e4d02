#include "knitpat/app/run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

namespace knitpat {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>> kSchema = {
    {"paths", {"corpus", "manifest", "runs", "weights"}},
    {"augmentation",
     {"horizontal_flip", "rotation_range", "zoom_min", "zoom_max", "shear_range", "fill_mode",
      "rescale"}},
    {"model", {"backbone", "head_widths", "dropout", "batch_norm", "freeze"}},
    {"train",
     {"batch_size", "max_epochs", "optimizer", "learning_rate", "class_weights", "monitor",
      "patience", "min_delta", "restore_best", "seed", "workers"}},
    {"split", {"train", "val", "test"}},
    {"compare", {"learning_rate", "max_epochs", "class_weights"}},
    {"debug", {"dump_augmented", "dump_count"}},
};

std::string where(const std::string& section, const std::string& key) {
  return "[" + section + "] " + key;
}

double to_double(const std::string& s, const std::string& ctx) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::logic_error&) {
  }
  throw ConfigError(ctx + ": expected a number, got '" + s + "'");
}

std::uint64_t to_unsigned(const std::string& s, const std::string& ctx) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError(ctx + ": expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

bool to_bool(const std::string& s, const std::string& ctx) {
  if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
  if (s == "false" || s == "no" || s == "off" || s == "0") return false;
  throw ConfigError(ctx + ": expected true or false, got '" + s + "'");
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

fs::path resolve(const fs::path& base, const std::string& value) {
  if (value.empty()) return {};
  const fs::path p(value);
  return p.is_absolute() || base.empty() ? p : (base / p).lexically_normal();
}

}  // namespace

BackboneSpec parse_backbone_choice(std::string_view text) {
  if (text == "stub") return stub_backbone_spec();
  if (text.starts_with("stub:")) {
    const auto dim = to_unsigned(std::string(text.substr(5)), "backbone '" + std::string(text) + "'");
    if (dim == 0) throw ConfigError("stub feature dimension must be positive");
    return stub_backbone_spec(dim);
  }
  const auto name = parse_backbone_name(text);
  if (!name || *name == BackboneName::kStub) {
    std::string known;
    for (const auto& info : backbone_registry()) {
      if (info.name != BackboneName::kStub) known += " " + std::string(info.id);
    }
    throw ConfigError("unknown backbone '" + std::string(text) + "'; expected one of" + known +
                      " stub stub:<dim>");
  }
  return backbone_spec(*name);
}

std::string backbone_choice(const BackboneSpec& spec) {
  if (spec.name == BackboneName::kStub) return fmt::format("stub:{}", spec.feature_dim);
  return std::string(backbone_info(spec.name).id);
}

std::string backbone_display_name(const BackboneSpec& spec) {
  if (spec.name == BackboneName::kStub) return fmt::format("Stub-{}", spec.feature_dim);
  return std::string(backbone_info(spec.name).display_name);
}

void RunConfig::validate() const {
  try {
    augmentation.validate();
    model.validate();
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (model.head.num_classes != kNumClasses) {
    throw ConfigError(fmt::format("model must have {} classes", kNumClasses));
  }
  for (double r : {split.train, split.val, split.test}) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("split ratios must be >= 0");
  }
  if (std::abs(split.train + split.val + split.test - 1.0) > 1e-9) {
    throw ConfigError(fmt::format("split ratios sum to {}, expected 1", split.train + split.val +
                                                                           split.test));
  }
  if (workers < 1) throw ConfigError("[train] workers must be >= 1");
  if (compare.learning_rate && !(*compare.learning_rate >= 0.0)) {
    throw ConfigError("[compare] learning_rate must be >= 0");
  }
  if (compare.max_epochs && *compare.max_epochs < 1) {
    throw ConfigError("[compare] max_epochs must be >= 1");
  }
}

RunConfig load_run_config_text(std::string_view text, const fs::path& base_dir) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
  }

  RunConfig cfg;
  cfg.paths.runs = resolve(base_dir, "runs");
  cfg.paths.weights = resolve(base_dir, "weights");
  for (const auto& [section, body] : tree) {
    const auto schema = kSchema.find(section);
    if (schema == kSchema.end()) {
      if (body.empty()) throw ConfigError("config key '" + section + "' outside any section");
      throw ConfigError("unknown config section [" + section + "]");
    }
    for (const auto& [key, node] : body) {
      if (!schema->second.contains(key)) {
        throw ConfigError("unknown config key " + where(section, key));
      }
      const std::string v = trim(node.get_value<std::string>());
      const std::string ctx = where(section, key);
      if (section == "paths") {
        const fs::path p = resolve(base_dir, v);
        if (key == "corpus") cfg.paths.corpus = p;
        else if (key == "manifest") cfg.paths.manifest = p;
        else if (key == "runs") cfg.paths.runs = p;
        else cfg.paths.weights = p;
      } else if (section == "augmentation") {
        auto& a = cfg.augmentation;
        if (key == "horizontal_flip") a.horizontal_flip = to_bool(v, ctx);
        else if (key == "rotation_range") a.rotation_degrees = to_double(v, ctx);
        else if (key == "zoom_min") a.zoom_low = to_double(v, ctx);
        else if (key == "zoom_max") a.zoom_high = to_double(v, ctx);
        else if (key == "shear_range") a.shear_range = to_double(v, ctx);
        else if (key == "rescale") a.rescale_factor = to_double(v, ctx);
        else if (v != "nearest") throw ConfigError(ctx + ": only 'nearest' is supported");
      } else if (section == "model") {
        auto& m = cfg.model;
        if (key == "backbone") {
          m.backbone = parse_backbone_choice(v);
        } else if (key == "head_widths") {
          m.head.widths.clear();
          std::stringstream ss(v);
          for (std::string item; std::getline(ss, item, ',');) {
            m.head.widths.push_back(to_unsigned(trim(item), ctx));
          }
        } else if (key == "dropout") {
          m.head.dropout_rate = to_double(v, ctx);
        } else if (key == "batch_norm") {
          m.head.use_batch_norm = to_bool(v, ctx);
        } else {
          const auto f = parse_freeze_policy(v);
          if (!f) throw ConfigError(ctx + ": unknown freeze policy '" + v + "'");
          m.freeze = *f;
        }
      } else if (section == "train") {
        auto& t = cfg.train;
        if (key == "batch_size") t.batch_size = to_unsigned(v, ctx);
        else if (key == "max_epochs") t.max_epochs = to_unsigned(v, ctx);
        else if (key == "learning_rate") t.learning_rate = to_double(v, ctx);
        else if (key == "class_weights") t.use_class_weights = to_bool(v, ctx);
        else if (key == "monitor") t.early_stopping.monitor = v;
        else if (key == "patience") t.early_stopping.patience = to_unsigned(v, ctx);
        else if (key == "min_delta") t.early_stopping.min_delta = to_double(v, ctx);
        else if (key == "restore_best") t.early_stopping.restore_best = to_bool(v, ctx);
        else if (key == "seed") t.seed = to_unsigned(v, ctx);
        else if (key == "workers") cfg.workers = to_unsigned(v, ctx);
        else {
          const auto o = parse_optimizer(v);
          if (!o) throw ConfigError(ctx + ": unknown optimizer '" + v + "'");
          t.optimizer = *o;
        }
      } else if (section == "split") {
        const double r = to_double(v, ctx);
        if (key == "train") cfg.split.train = r;
        else if (key == "val") cfg.split.val = r;
        else cfg.split.test = r;
      } else if (section == "compare") {
        if (key == "learning_rate") cfg.compare.learning_rate = to_double(v, ctx);
        else if (key == "max_epochs") cfg.compare.max_epochs = to_unsigned(v, ctx);
        else cfg.compare.use_class_weights = to_bool(v, ctx);
      } else {
        if (key == "dump_augmented") cfg.dump_augmented = v.empty() ? fs::path() : resolve(base_dir, v);
        else cfg.dump_count = to_unsigned(v, ctx);
      }
    }
  }
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return load_run_config_text(ss.str(), fs::absolute(path).parent_path());
}

std::string run_config_ini(const RunConfig& cfg) {
  std::string widths;
  for (std::size_t i = 0; i < cfg.model.head.widths.size(); ++i) {
    widths += (i ? "," : "") + std::to_string(cfg.model.head.widths[i]);
  }
  const auto& a = cfg.augmentation;
  const auto& t = cfg.train;
  std::string out;
  out += "[paths]\n";
  out += fmt::format("corpus = {}\n", cfg.paths.corpus.generic_string());
  out += fmt::format("manifest = {}\n", cfg.paths.manifest.generic_string());
  out += fmt::format("runs = {}\n", cfg.paths.runs.generic_string());
  out += fmt::format("weights = {}\n", cfg.paths.weights.generic_string());
  out += "\n[augmentation]\n";
  out += fmt::format("horizontal_flip = {}\n", a.horizontal_flip);
  out += fmt::format("rotation_range = {}\n", a.rotation_degrees);
  out += fmt::format("zoom_min = {}\n", a.zoom_low);
  out += fmt::format("zoom_max = {}\n", a.zoom_high);
  out += fmt::format("shear_range = {}\n", a.shear_range);
  out += "fill_mode = nearest\n";
  out += fmt::format("rescale = {}\n", a.rescale_factor);
  out += "\n[model]\n";
  out += fmt::format("backbone = {}\n", backbone_choice(cfg.model.backbone));
  out += fmt::format("head_widths = {}\n", widths);
  out += fmt::format("dropout = {}\n", cfg.model.head.dropout_rate);
  out += fmt::format("batch_norm = {}\n", cfg.model.head.use_batch_norm);
  out += fmt::format("freeze = {}\n", to_string(cfg.model.freeze));
  out += "\n[train]\n";
  out += fmt::format("batch_size = {}\n", t.batch_size);
  out += fmt::format("max_epochs = {}\n", t.max_epochs);
  out += fmt::format("optimizer = {}\n", to_string(t.optimizer));
  out += fmt::format("learning_rate = {}\n", t.learning_rate);
  out += fmt::format("class_weights = {}\n", t.use_class_weights);
  out += fmt::format("monitor = {}\n", t.early_stopping.monitor);
  out += fmt::format("patience = {}\n", t.early_stopping.patience);
  out += fmt::format("min_delta = {}\n", t.early_stopping.min_delta);
  out += fmt::format("restore_best = {}\n", t.early_stopping.restore_best);
  out += fmt::format("seed = {}\n", t.seed);
  out += fmt::format("workers = {}\n", cfg.workers);
  out += "\n[split]\n";
  out += fmt::format("train = {}\nval = {}\ntest = {}\n", cfg.split.train, cfg.split.val,
                     cfg.split.test);
  if (cfg.compare.learning_rate || cfg.compare.max_epochs || cfg.compare.use_class_weights) {
    out += "\n[compare]\n";
    if (cfg.compare.learning_rate) out += fmt::format("learning_rate = {}\n", *cfg.compare.learning_rate);
    if (cfg.compare.max_epochs) out += fmt::format("max_epochs = {}\n", *cfg.compare.max_epochs);
    if (cfg.compare.use_class_weights) {
      out += fmt::format("class_weights = {}\n", *cfg.compare.use_class_weights);
    }
  }
  return out;
}

}  // namespace knitpat
