#include "knitpat/train/history.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace knitpat {

namespace fs = std::filesystem;

const EpochRecord& TrainingHistory::best() const {
  if (best_epoch == 0 || best_epoch > records.size()) {
    throw std::logic_error("training history has no best epoch");
  }
  return records[best_epoch - 1];
}

bool same_trajectory(const TrainingHistory& a, const TrainingHistory& b) {
  if (a.stopped_early != b.stopped_early || a.best_epoch != b.best_epoch ||
      a.records.size() != b.records.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EpochRecord x = a.records[i];
    EpochRecord y = b.records[i];
    x.wall_time = y.wall_time = 0.0;
    if (!(x == y)) return false;
  }
  return true;
}

std::string history_csv(const TrainingHistory& history) {
  std::string out = "epoch,train_loss,train_accuracy,val_loss,val_accuracy,wall_time\n";
  for (const auto& r : history.records) {
    out += fmt::format("{},{},{},{},{},{:.3f}\n", r.epoch, r.train_loss, r.train_accuracy,
                       r.val_loss, r.val_accuracy, r.wall_time);
  }
  return out;
}

void write_history_csv(const TrainingHistory& history, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << history_csv(history);
}

void write_history_json(const TrainingHistory& history, const fs::path& path) {
  nlohmann::ordered_json j;
  j["best_epoch"] = history.best_epoch;
  j["stopped_early"] = history.stopped_early;
  auto records = nlohmann::ordered_json::array();
  for (const auto& r : history.records) {
    records.push_back({{"epoch", r.epoch},
                       {"train_loss", r.train_loss},
                       {"train_accuracy", r.train_accuracy},
                       {"val_loss", r.val_loss},
                       {"val_accuracy", r.val_accuracy},
                       {"wall_time", r.wall_time}});
  }
  j["records"] = std::move(records);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

TrainingHistory read_history_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read history " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    TrainingHistory h;
    h.best_epoch = j.at("best_epoch").get<std::size_t>();
    h.stopped_early = j.at("stopped_early").get<bool>();
    for (const auto& r : j.at("records")) {
      h.records.push_back({r.at("epoch").get<std::size_t>(), r.at("train_loss").get<double>(),
                           r.at("train_accuracy").get<double>(), r.at("val_loss").get<double>(),
                           r.at("val_accuracy").get<double>(), r.at("wall_time").get<double>()});
    }
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed history " + path.string() + ": " + e.what());
  }
}

}  // namespace knitpat
