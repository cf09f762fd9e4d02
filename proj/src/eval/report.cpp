#include "knitpat/eval/report.hpp"

#include <fstream>
#include <stdexcept>

#include <fmt/format.h>

#include "knitpat/core/csv.hpp"

namespace knitpat {

std::string results_table(const std::vector<ResultRow>& rows) {
  std::string out = std::string(kResultsHeader) + "\n";
  for (const auto& r : rows) {
    out += fmt::format("{} | {:.4f} | {:.4f} | {:.4f} | {:.4f}\n", r.model, r.train_loss,
                       r.train_accuracy, r.test_loss, r.test_accuracy);
  }
  return out;
}

std::string results_table_csv(const std::vector<ResultRow>& rows) {
  std::string out = "model,train_loss,train_accuracy,test_loss,test_accuracy\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{:.4f},{:.4f},{:.4f},{:.4f}\n", csv::escape(r.model), r.train_loss,
                       r.train_accuracy, r.test_loss, r.test_accuracy);
  }
  return out;
}

std::vector<ResultRow> read_results_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<ResultRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 5) {
      throw std::runtime_error(fmt::format("{}:{}: expected 5 fields", path.string(), line_no));
    }
    try {
      rows.push_back({f[0], std::stod(f[1]), std::stod(f[2]), std::stod(f[3]), std::stod(f[4])});
    } catch (const std::logic_error&) {
      throw std::runtime_error(fmt::format("{}:{}: bad number", path.string(), line_no));
    }
  }
  return rows;
}

std::string classification_report(const ClassReport& report,
                                  const std::vector<std::string>& class_names) {
  std::size_t width = 12;
  for (const auto& n : class_names) width = std::max(width, n.size());
  std::size_t support = 0;
  for (const auto& c : report.classes) support += c.support;

  std::string out = fmt::format("{:>{}} {:>9} {:>9} {:>9} {:>9}\n\n", "", width, "precision",
                                "recall", "f1-score", "support");
  for (std::size_t c = 0; c < report.classes.size(); ++c) {
    const auto& s = report.classes[c];
    const std::string name = c < class_names.size() ? class_names[c] : std::to_string(c);
    out += fmt::format("{:>{}} {:>9.4f} {:>9.4f} {:>9.4f} {:>9}\n", name, width, s.precision,
                       s.recall, s.f1, s.support);
  }
  out += fmt::format("\n{:>{}} {:>9} {:>9} {:>9.4f} {:>9}\n", "accuracy", width, "", "",
                     report.accuracy, support);
  out += fmt::format("{:>{}} {:>9.4f} {:>9.4f} {:>9.4f} {:>9}\n", "macro avg", width,
                     report.macro.precision, report.macro.recall, report.macro.f1, support);
  out += fmt::format("{:>{}} {:>9.4f} {:>9.4f} {:>9.4f} {:>9}\n", "weighted avg", width,
                     report.weighted.precision, report.weighted.recall, report.weighted.f1,
                     support);
  return out;
}

}  // namespace knitpat
