#include "knitpat/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <string>

namespace knitpat {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    throw MetricError("label vectors differ in length: " + std::to_string(a) + " vs " +
                      std::to_string(b));
  }
  if (a == 0) throw MetricError("metrics need at least one sample");
}

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

double accuracy(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred) {
  check_lengths(y_true.size(), y_pred.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) hits += y_true[i] == y_pred[i];
  return static_cast<double>(hits) / static_cast<double>(y_true.size());
}

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : k_(num_classes), counts_(num_classes * num_classes, 0) {}

std::size_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0});
}

std::size_t ConfusionMatrix::row_sum(std::size_t t) const {
  std::size_t s = 0;
  for (std::size_t p = 0; p < k_; ++p) s += at(t, p);
  return s;
}

std::size_t ConfusionMatrix::col_sum(std::size_t p) const {
  std::size_t s = 0;
  for (std::size_t t = 0; t < k_; ++t) s += at(t, p);
  return s;
}

ConfusionMatrix confusion(std::span<const std::size_t> y_true,
                          std::span<const std::size_t> y_pred, std::size_t num_classes) {
  check_lengths(y_true.size(), y_pred.size());
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] >= num_classes || y_pred[i] >= num_classes) {
      throw MetricError("label at position " + std::to_string(i) + " outside 0.." +
                        std::to_string(num_classes - 1));
    }
    ++cm.at(y_true[i], y_pred[i]);
  }
  return cm;
}

ClassReport precision_recall_f1(const ConfusionMatrix& cm) {
  const std::size_t k = cm.num_classes();
  ClassReport report;
  report.classes.resize(k);
  const double total = static_cast<double>(cm.total());
  std::size_t diagonal = 0;
  for (std::size_t c = 0; c < k; ++c) {
    auto& s = report.classes[c];
    const double tp = static_cast<double>(cm.at(c, c));
    diagonal += cm.at(c, c);
    s.support = cm.row_sum(c);
    s.precision = ratio(tp, static_cast<double>(cm.col_sum(c)));
    s.recall = ratio(tp, static_cast<double>(s.support));
    s.f1 = ratio(2.0 * s.precision * s.recall, s.precision + s.recall);
    report.macro.precision += s.precision;
    report.macro.recall += s.recall;
    report.macro.f1 += s.f1;
    const double w = static_cast<double>(s.support);
    report.weighted.precision += w * s.precision;
    report.weighted.recall += w * s.recall;
    report.weighted.f1 += w * s.f1;
  }
  if (k > 0) {
    const double kk = static_cast<double>(k);
    report.macro = {report.macro.precision / kk, report.macro.recall / kk, report.macro.f1 / kk};
  }
  report.weighted = {ratio(report.weighted.precision, total), ratio(report.weighted.recall, total),
                     ratio(report.weighted.f1, total)};
  report.accuracy = ratio(static_cast<double>(diagonal), total);
  return report;
}

double log_loss(std::span<const std::size_t> y_true, const Eigen::MatrixXd& probs) {
  check_lengths(y_true.size(), static_cast<std::size_t>(probs.rows()));
  constexpr double eps = 1e-15;
  double total = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] >= static_cast<std::size_t>(probs.cols())) {
      throw MetricError("label at position " + std::to_string(i) + " has no probability column");
    }
    const double p = probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(y_true[i]));
    total -= std::log(std::clamp(p, eps, 1.0 - eps));
  }
  return total / static_cast<double>(y_true.size());
}

double log_loss(const Eigen::MatrixXd& y_true_onehot, const Eigen::MatrixXd& probs) {
  if (y_true_onehot.rows() != probs.rows() || y_true_onehot.cols() != probs.cols()) {
    throw MetricError("one-hot labels and probabilities differ in shape");
  }
  std::vector<std::size_t> labels(static_cast<std::size_t>(y_true_onehot.rows()));
  for (Eigen::Index i = 0; i < y_true_onehot.rows(); ++i) {
    Eigen::Index c = 0;
    if (y_true_onehot.row(i).maxCoeff(&c) != 1.0 || y_true_onehot.row(i).sum() != 1.0) {
      throw MetricError("row " + std::to_string(i) + " of the labels is not one-hot");
    }
    labels[static_cast<std::size_t>(i)] = static_cast<std::size_t>(c);
  }
  return log_loss(labels, probs);
}

std::vector<std::size_t> predicted_labels(const Eigen::MatrixXd& probs) {
  std::vector<std::size_t> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < probs.cols(); ++c) {
      if (probs(i, c) > probs(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
  }
  return out;
}

RocCurve roc_curve(std::span<const bool> positive, std::span<const double> scores) {
  check_lengths(positive.size(), scores.size());
  RocCurve curve;
  const std::size_t n = scores.size();
  const auto pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) {
    curve.auc = std::numeric_limits<double>::quiet_NaN();
    return curve;
  }
  curve.evaluated = true;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  curve.thresholds.push_back(std::numeric_limits<double>::infinity());
  curve.fpr.push_back(0.0);
  curve.tpr.push_back(0.0);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < n;) {
    const double s = scores[order[i]];
    while (i < n && scores[order[i]] == s) {
      (positive[order[i]] ? tp : fp) += 1;
      ++i;
    }
    curve.thresholds.push_back(s);
    curve.fpr.push_back(static_cast<double>(fp) / static_cast<double>(neg));
    curve.tpr.push_back(static_cast<double>(tp) / static_cast<double>(pos));
  }
  double area = 0.0;
  for (std::size_t j = 1; j < curve.fpr.size(); ++j) {
    area += (curve.fpr[j] - curve.fpr[j - 1]) * (curve.tpr[j] + curve.tpr[j - 1]) / 2.0;
  }
  curve.auc = area;
  return curve;
}

OvrRoc roc_auc_ovr(std::span<const std::size_t> y_true, const Eigen::MatrixXd& probs,
                   std::size_t num_classes) {
  check_lengths(y_true.size(), static_cast<std::size_t>(probs.rows()));
  if (static_cast<std::size_t>(probs.cols()) != num_classes) {
    throw MetricError("probability matrix has " + std::to_string(probs.cols()) +
                      " columns for " + std::to_string(num_classes) + " classes");
  }
  OvrRoc out;
  std::vector<double> scores(y_true.size());
  std::unique_ptr<bool[]> positive(new bool[y_true.size()]);
  double sum = 0.0;
  std::size_t evaluated = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t i = 0; i < y_true.size(); ++i) {
      if (y_true[i] >= num_classes) throw MetricError("label outside the class range");
      positive[i] = y_true[i] == c;
      scores[i] = probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
    }
    RocCurve curve = roc_curve(std::span<const bool>(positive.get(), y_true.size()), scores);
    curve.class_index = c;
    if (curve.evaluated) {
      sum += curve.auc;
      ++evaluated;
    } else {
      out.skipped.push_back(c);
    }
    out.curves.push_back(std::move(curve));
  }
  out.macro_auc = evaluated ? sum / static_cast<double>(evaluated)
                            : std::numeric_limits<double>::quiet_NaN();
  return out;
}

}  // namespace knitpat
