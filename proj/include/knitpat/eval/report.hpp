#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "knitpat/eval/metrics.hpp"

namespace knitpat {

struct ResultRow {
  std::string model;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
};

inline constexpr const char* kResultsHeader =
    "Model | Train Loss | Train Accuracy | Test Loss | Test Accuracy";

/// Header plus one "name | x.xxxx | x.xxxx | x.xxxx | x.xxxx" line per row.
std::string results_table(const std::vector<ResultRow>& rows);

/// model,train_loss,train_accuracy,test_loss,test_accuracy with 4 decimals.
std::string results_table_csv(const std::vector<ResultRow>& rows);

/// Reads the CSV form back. Throws std::runtime_error on malformed input.
std::vector<ResultRow> read_results_csv(const std::filesystem::path& path);

/// Fixed-width text report: per-class P/R/F1/support, accuracy, macro and
/// weighted averages.
std::string classification_report(const ClassReport& report,
                                  const std::vector<std::string>& class_names);

}  // namespace knitpat
