#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace knitpat {

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Fraction of exact matches. Throws MetricError on empty or unequal input.
double accuracy(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred);

/// K x K counts; rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes = 0);

  std::size_t num_classes() const { return k_; }
  std::size_t at(std::size_t true_class, std::size_t predicted) const {
    return counts_[true_class * k_ + predicted];
  }
  std::size_t& at(std::size_t true_class, std::size_t predicted) {
    return counts_[true_class * k_ + predicted];
  }
  std::size_t total() const;
  std::size_t row_sum(std::size_t true_class) const;
  std::size_t col_sum(std::size_t predicted) const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t k_;
  std::vector<std::size_t> counts_;
};

/// Throws MetricError for unequal lengths or a label outside 0..K-1.
ConfusionMatrix confusion(std::span<const std::size_t> y_true,
                          std::span<const std::size_t> y_pred, std::size_t num_classes);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct AveragedScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Per-class scores with the zero-division convention score = 0.
struct ClassReport {
  std::vector<ClassScores> classes;
  AveragedScores macro;
  AveragedScores weighted;
  double accuracy = 0.0;
};

ClassReport precision_recall_f1(const ConfusionMatrix& cm);

/// Mean of -ln(clip(p_true, 1e-15, 1 - 1e-15)).
double log_loss(const Eigen::MatrixXd& y_true_onehot, const Eigen::MatrixXd& probs);
double log_loss(std::span<const std::size_t> y_true, const Eigen::MatrixXd& probs);

/// Row argmax, ties to the lower class index.
std::vector<std::size_t> predicted_labels(const Eigen::MatrixXd& probs);

/// One-vs-rest curve. Point 0 is (0, 0) at threshold +inf; point j > 0 is
/// the operating point of "score >= thresholds[j]" over descending distinct
/// scores, so the last point is (1, 1).
struct RocCurve {
  std::size_t class_index = 0;
  bool evaluated = false;  // false when the class lacks positives or negatives
  std::vector<double> thresholds;
  std::vector<double> fpr;
  std::vector<double> tpr;
  double auc = 0.0;
};

/// Exact step ROC of binary `positive` flags against `scores`, trapezoidal AUC.
/// Returns evaluated = false when either class is absent.
RocCurve roc_curve(std::span<const bool> positive, std::span<const double> scores);

struct OvrRoc {
  std::vector<RocCurve> curves;
  std::vector<std::size_t> skipped;  // classes with no positives or no negatives
  double macro_auc = 0.0;            // NaN when every class is skipped
};

OvrRoc roc_auc_ovr(std::span<const std::size_t> y_true, const Eigen::MatrixXd& probs,
                   std::size_t num_classes);

}  // namespace knitpat
