#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "knitpat/eval/metrics.hpp"

namespace knitpat {

/// Everything computed from one set of predictions.
struct EvaluationReport {
  std::vector<std::string> class_names;
  std::size_t num_samples = 0;
  double accuracy = 0.0;
  double log_loss = 0.0;
  ConfusionMatrix confusion;
  ClassReport scores;
  OvrRoc roc;
};

EvaluationReport evaluate_predictions(std::span<const std::size_t> y_true,
                                      const Eigen::MatrixXd& probs,
                                      std::vector<std::string> class_names);

std::string metrics_json(const EvaluationReport& report);
std::string confusion_csv(const ConfusionMatrix& cm, const std::vector<std::string>& names);
std::string roc_csv(const RocCurve& curve);

/// Writes metrics.json, confusion_matrix.csv, roc_<class>.csv for every
/// evaluated class, classification_report.txt, confusion_matrix.png and roc.png.
void write_evaluation(const EvaluationReport& report, const std::filesystem::path& dir);

struct HistoryCurves {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> train_accuracy;
  std::vector<double> val_accuracy;
};

void plot_confusion_matrix(const ConfusionMatrix& cm, const std::vector<std::string>& names,
                           const std::filesystem::path& path);
void plot_roc(const OvrRoc& roc, const std::vector<std::string>& names,
              const std::filesystem::path& path);
/// Loss and accuracy panels side by side, one point per epoch.
void plot_history(const HistoryCurves& curves, const std::filesystem::path& path);

}  // namespace knitpat
