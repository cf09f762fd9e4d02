#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace knitpat {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double wall_time = 0.0;  // seconds spent in this epoch

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainingHistory {
  std::vector<EpochRecord> records;
  bool stopped_early = false;
  std::size_t best_epoch = 0;

  const EpochRecord& best() const;
  friend bool operator==(const TrainingHistory&, const TrainingHistory&) = default;
};

/// Equality ignoring wall_time, the only field that is not seed-determined.
bool same_trajectory(const TrainingHistory& a, const TrainingHistory& b);

void write_history_csv(const TrainingHistory& history, const std::filesystem::path& path);
void write_history_json(const TrainingHistory& history, const std::filesystem::path& path);
TrainingHistory read_history_json(const std::filesystem::path& path);

std::string history_csv(const TrainingHistory& history);

}  // namespace knitpat
