#include "knitpat/eval/artifacts.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "knitpat/eval/report.hpp"

namespace knitpat {

namespace fs = std::filesystem;

namespace {

const cv::Scalar kBlack(0, 0, 0);
const cv::Scalar kGrey(200, 200, 200);
const cv::Scalar kWhite(255, 255, 255);
constexpr int kFont = cv::FONT_HERSHEY_SIMPLEX;

// BGR, tab10-like.
const std::vector<cv::Scalar> kPalette = {
    {180, 119, 31}, {14, 127, 255}, {44, 160, 44}, {40, 39, 214},
    {189, 103, 148}, {75, 86, 140}, {194, 119, 227}, {127, 127, 127},
};

nlohmann::ordered_json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void save_png(const fs::path& path, const cv::Mat& img) {
  if (!cv::imwrite(path.string(), img)) throw std::runtime_error("cannot write " + path.string());
}

void put_text(cv::Mat& img, const std::string& text, cv::Point at, double scale = 0.45,
              const cv::Scalar& color = kBlack, bool centred = false) {
  if (centred) {
    int baseline = 0;
    const cv::Size size = cv::getTextSize(text, kFont, scale, 1, &baseline);
    at.x -= size.width / 2;
    at.y += size.height / 2;
  }
  cv::putText(img, text, at, kFont, scale, color, 1, cv::LINE_AA);
}

// Maps data coordinates into a pixel rectangle and draws a framed grid.
struct Axes {
  cv::Rect area;
  double x0, x1, y0, y1;

  cv::Point map(double x, double y) const {
    const double fx = x1 == x0 ? 0.5 : (x - x0) / (x1 - x0);
    const double fy = y1 == y0 ? 0.5 : (y - y0) / (y1 - y0);
    return {area.x + static_cast<int>(std::lround(fx * area.width)),
            area.y + area.height - static_cast<int>(std::lround(fy * area.height))};
  }

  void draw(cv::Mat& img, const std::string& title, const std::string& xlabel,
            const std::string& ylabel, int xticks = 5, int yticks = 5) const {
    for (int i = 0; i <= xticks; ++i) {
      const double fx = x0 + (x1 - x0) * i / xticks;
      cv::line(img, map(fx, y0), map(fx, y1), kGrey, 1);
      put_text(img, fmt::format("{:.3g}", fx), map(fx, y0) + cv::Point(-10, 18), 0.4);
    }
    for (int i = 0; i <= yticks; ++i) {
      const double fy = y0 + (y1 - y0) * i / yticks;
      cv::line(img, map(x0, fy), map(x1, fy), kGrey, 1);
      put_text(img, fmt::format("{:.3g}", fy), map(x0, fy) + cv::Point(-45, 5), 0.4);
    }
    cv::rectangle(img, area, kBlack, 1);
    put_text(img, title, {area.x + area.width / 2, area.y - 30}, 0.55, kBlack, true);
    put_text(img, xlabel, {area.x + area.width / 2, area.y + area.height + 38}, 0.45, kBlack,
             true);
    put_text(img, ylabel, {area.x - 55, area.y - 8}, 0.45);
  }

  void polyline(cv::Mat& img, const std::vector<double>& xs, const std::vector<double>& ys,
                const cv::Scalar& color, bool markers = false) const {
    std::vector<cv::Point> pts;
    for (std::size_t i = 0; i < xs.size() && i < ys.size(); ++i) pts.push_back(map(xs[i], ys[i]));
    if (pts.size() > 1) cv::polylines(img, pts, false, color, 2, cv::LINE_AA);
    if (markers || pts.size() == 1) {
      for (const auto& p : pts) cv::circle(img, p, 3, color, cv::FILLED, cv::LINE_AA);
    }
  }
};

void legend(cv::Mat& img, cv::Point at, const std::vector<std::pair<std::string, cv::Scalar>>& items) {
  for (std::size_t i = 0; i < items.size(); ++i) {
    const cv::Point row = at + cv::Point(0, static_cast<int>(i) * 18);
    cv::line(img, row, row + cv::Point(20, 0), items[i].second, 2, cv::LINE_AA);
    put_text(img, items[i].first, row + cv::Point(26, 5), 0.4);
  }
}

}  // namespace

EvaluationReport evaluate_predictions(std::span<const std::size_t> y_true,
                                      const Eigen::MatrixXd& probs,
                                      std::vector<std::string> class_names) {
  const std::size_t k = class_names.size();
  if (static_cast<std::size_t>(probs.cols()) != k) {
    throw MetricError(fmt::format("{} probability columns for {} class names", probs.cols(), k));
  }
  const auto y_pred = predicted_labels(probs);
  EvaluationReport r;
  r.class_names = std::move(class_names);
  r.num_samples = y_true.size();
  r.accuracy = accuracy(y_true, y_pred);
  r.log_loss = log_loss(y_true, probs);
  r.confusion = confusion(y_true, y_pred, k);
  r.scores = precision_recall_f1(r.confusion);
  r.roc = roc_auc_ovr(y_true, probs, k);
  return r;
}

std::string metrics_json(const EvaluationReport& r) {
  nlohmann::ordered_json j;
  j["num_samples"] = r.num_samples;
  j["accuracy"] = r.accuracy;
  j["log_loss"] = r.log_loss;
  j["macro_auc"] = number_or_null(r.roc.macro_auc);
  j["macro"] = {{"precision", r.scores.macro.precision},
                {"recall", r.scores.macro.recall},
                {"f1", r.scores.macro.f1}};
  j["weighted"] = {{"precision", r.scores.weighted.precision},
                   {"recall", r.scores.weighted.recall},
                   {"f1", r.scores.weighted.f1}};
  j["classes"] = r.class_names;
  auto per_class = nlohmann::ordered_json::object();
  auto column = [&](auto get) {
    auto a = nlohmann::ordered_json::array();
    for (const auto& s : r.scores.classes) a.push_back(get(s));
    return a;
  };
  per_class["precision"] = column([](const ClassScores& s) { return s.precision; });
  per_class["recall"] = column([](const ClassScores& s) { return s.recall; });
  per_class["f1"] = column([](const ClassScores& s) { return s.f1; });
  per_class["support"] = column([](const ClassScores& s) { return s.support; });
  auto auc = nlohmann::ordered_json::array();
  for (const auto& c : r.roc.curves) auc.push_back(number_or_null(c.auc));
  per_class["auc"] = std::move(auc);
  j["per_class"] = std::move(per_class);
  auto skipped = nlohmann::ordered_json::array();
  for (auto c : r.roc.skipped) skipped.push_back(r.class_names[c]);
  j["auc_skipped_classes"] = std::move(skipped);
  auto matrix = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < r.confusion.num_classes(); ++t) {
    auto row = nlohmann::ordered_json::array();
    for (std::size_t p = 0; p < r.confusion.num_classes(); ++p) row.push_back(r.confusion.at(t, p));
    matrix.push_back(std::move(row));
  }
  j["confusion_matrix"] = std::move(matrix);
  return j.dump(2) + "\n";
}

std::string confusion_csv(const ConfusionMatrix& cm, const std::vector<std::string>& names) {
  std::string out = "true\\predicted";
  for (const auto& n : names) out += "," + n;
  out += "\n";
  for (std::size_t t = 0; t < cm.num_classes(); ++t) {
    out += names.at(t);
    for (std::size_t p = 0; p < cm.num_classes(); ++p) out += fmt::format(",{}", cm.at(t, p));
    out += "\n";
  }
  return out;
}

std::string roc_csv(const RocCurve& curve) {
  std::string out = "fpr,tpr,threshold\n";
  for (std::size_t i = 0; i < curve.fpr.size(); ++i) {
    out += fmt::format("{},{},{}\n", curve.fpr[i], curve.tpr[i], curve.thresholds[i]);
  }
  return out;
}

void write_evaluation(const EvaluationReport& r, const fs::path& dir) {
  fs::create_directories(dir);
  write_text(dir / "metrics.json", metrics_json(r));
  write_text(dir / "confusion_matrix.csv", confusion_csv(r.confusion, r.class_names));
  write_text(dir / "classification_report.txt", classification_report(r.scores, r.class_names));
  for (const auto& curve : r.roc.curves) {
    if (curve.evaluated) {
      write_text(dir / ("roc_" + r.class_names[curve.class_index] + ".csv"), roc_csv(curve));
    }
  }
  plot_confusion_matrix(r.confusion, r.class_names, dir / "confusion_matrix.png");
  plot_roc(r.roc, r.class_names, dir / "roc.png");
}

void plot_confusion_matrix(const ConfusionMatrix& cm, const std::vector<std::string>& names,
                           const fs::path& path) {
  const int k = static_cast<int>(cm.num_classes());
  constexpr int cell = 80, left = 110, top = 50, bottom = 70;
  cv::Mat img(top + k * cell + bottom, left + k * cell + 20, CV_8UC3, kWhite);
  for (int t = 0; t < k; ++t) {
    const auto support = static_cast<double>(cm.row_sum(static_cast<std::size_t>(t)));
    for (int p = 0; p < k; ++p) {
      const auto count = cm.at(static_cast<std::size_t>(t), static_cast<std::size_t>(p));
      const double frac = support > 0 ? static_cast<double>(count) / support : 0.0;
      const cv::Scalar fill(255 - 120 * frac, 255 - 200 * frac, 255 - 230 * frac);
      const cv::Rect r(left + p * cell, top + t * cell, cell, cell);
      cv::rectangle(img, r, fill, cv::FILLED);
      cv::rectangle(img, r, kGrey, 1);
      put_text(img, std::to_string(count), {r.x + cell / 2, r.y + cell / 2}, 0.5,
               frac > 0.5 ? kWhite : kBlack, true);
    }
    put_text(img, names.at(static_cast<std::size_t>(t)), {8, top + t * cell + cell / 2 + 5}, 0.42);
    put_text(img, names.at(static_cast<std::size_t>(t)),
             {left + t * cell + cell / 2, top + k * cell + 15}, 0.38, kBlack, true);
  }
  put_text(img, "Confusion matrix (rows: true, columns: predicted)",
           {img.cols / 2, 22}, 0.5, kBlack, true);
  put_text(img, "predicted", {left + k * cell / 2, top + k * cell + 45}, 0.45, kBlack, true);
  save_png(path, img);
}

void plot_roc(const OvrRoc& roc, const std::vector<std::string>& names, const fs::path& path) {
  cv::Mat img(580, 760, CV_8UC3, kWhite);
  const Axes ax{{80, 70, 440, 440}, 0.0, 1.0, 0.0, 1.0};
  ax.draw(img, fmt::format("One-vs-rest ROC (macro AUC {:.4f})", roc.macro_auc),
          "false positive rate", "true positive rate");
  cv::line(img, ax.map(0, 0), ax.map(1, 1), kGrey, 1, cv::LINE_AA);
  std::vector<std::pair<std::string, cv::Scalar>> items;
  for (const auto& c : roc.curves) {
    const auto& color = kPalette[c.class_index % kPalette.size()];
    const std::string name = names.at(c.class_index);
    if (!c.evaluated) {
      items.emplace_back(name + " (skipped)", kGrey);
      continue;
    }
    ax.polyline(img, c.fpr, c.tpr, color);
    items.emplace_back(fmt::format("{} {:.3f}", name, c.auc), color);
  }
  legend(img, {540, 70}, items);
  save_png(path, img);
}

void plot_history(const HistoryCurves& h, const fs::path& path) {
  const std::size_t n = std::max({h.train_loss.size(), h.val_loss.size()});
  if (n == 0) throw std::invalid_argument("history has no epochs");
  std::vector<double> epochs(n);
  for (std::size_t i = 0; i < n; ++i) epochs[i] = static_cast<double>(i + 1);
  double max_loss = 0.0;
  for (double v : h.train_loss) max_loss = std::max(max_loss, v);
  for (double v : h.val_loss) max_loss = std::max(max_loss, v);
  if (!(max_loss > 0.0) || !std::isfinite(max_loss)) max_loss = 1.0;

  cv::Mat img(480, 1000, CV_8UC3, kWhite);
  // Integer epoch ticks: at most 10 intervals over an epoch range padded to a multiple.
  const int span = std::max(1, static_cast<int>(n) - 1);
  const int step = (span + 9) / 10;
  const int xticks = (span + step - 1) / step;
  const double x1 = 1.0 + xticks * step;
  const Axes loss_ax{{80, 70, 360, 320}, 1.0, x1, 0.0, max_loss * 1.05};
  const Axes acc_ax{{580, 70, 360, 320}, 1.0, x1, 0.0, 1.0};
  loss_ax.draw(img, "Loss", "epoch", "loss", xticks);
  acc_ax.draw(img, "Accuracy", "epoch", "accuracy", xticks);
  loss_ax.polyline(img, epochs, h.train_loss, kPalette[0], true);
  loss_ax.polyline(img, epochs, h.val_loss, kPalette[1], true);
  acc_ax.polyline(img, epochs, h.train_accuracy, kPalette[0], true);
  acc_ax.polyline(img, epochs, h.val_accuracy, kPalette[1], true);
  legend(img, {100, 445}, {{"train", kPalette[0]}, {"validation", kPalette[1]}});
  save_png(path, img);
}

}  // namespace knitpat
