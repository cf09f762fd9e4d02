#pragma once

// Brute-force reference implementations used only by tests. They compute
// every quantity straight from the definitions, sharing no code with the
// library.

#include <cmath>
#include <cstddef>
#include <limits>
#include <algorithm>
#include <vector>

#include <Eigen/Core>

#include "knitpat/core/random_stream.hpp"

namespace knitpat::oracle {

struct Instance {
  std::size_t k = 7;
  std::vector<std::size_t> y_true;
  std::vector<std::size_t> y_pred;
  Eigen::MatrixXd probs;
};

/// Random labelled instance; scores are quantized half the time so ties occur.
inline Instance random_instance(RandomStream& rng, std::size_t max_n = 200, std::size_t k = 7) {
  Instance inst;
  inst.k = k;
  const std::size_t n = 1 + rng.below(max_n);
  const bool coarse = rng.bernoulli(0.5);
  inst.probs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < n; ++i) {
    inst.y_true.push_back(rng.below(k));
    inst.y_pred.push_back(rng.bernoulli(0.4) ? inst.y_true.back() : rng.below(k));
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      double v = rng.next_unit() + 1e-3;
      if (coarse) v = std::round(v * 4.0) / 4.0 + 0.25;
      inst.probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = v;
      sum += v;
    }
    inst.probs.row(static_cast<Eigen::Index>(i)) /= sum;
  }
  return inst;
}

inline double accuracy(const std::vector<std::size_t>& t, const std::vector<std::size_t>& p) {
  double hits = 0;
  for (std::size_t i = 0; i < t.size(); ++i) hits += t[i] == p[i] ? 1 : 0;
  return hits / static_cast<double>(t.size());
}

inline std::size_t confusion_cell(const std::vector<std::size_t>& t,
                                  const std::vector<std::size_t>& p, std::size_t row,
                                  std::size_t col) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < t.size(); ++i) n += (t[i] == row && p[i] == col) ? 1 : 0;
  return n;
}

struct Prf {
  double precision, recall, f1;
  std::size_t support;
};

inline Prf class_prf(const std::vector<std::size_t>& t, const std::vector<std::size_t>& p,
                     std::size_t c) {
  double tp = 0, fp = 0, fn = 0;
  std::size_t support = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] == c) ++support;
    if (t[i] == c && p[i] == c) ++tp;
    if (t[i] != c && p[i] == c) ++fp;
    if (t[i] == c && p[i] != c) ++fn;
  }
  const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
  return {precision, recall, f1, support};
}

inline double log_loss(const std::vector<std::size_t>& t, const Eigen::MatrixXd& probs) {
  double total = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
      const double y = static_cast<std::size_t>(c) == t[i] ? 1.0 : 0.0;
      double p = probs(static_cast<Eigen::Index>(i), c);
      p = p < 1e-15 ? 1e-15 : (p > 1 - 1e-15 ? 1 - 1e-15 : p);
      total += -y * std::log(p);
    }
  }
  return total / static_cast<double>(t.size());
}

/// Mann-Whitney: fraction of (positive, negative) pairs ranked correctly,
/// ties counting one half. NaN when either side is empty.
inline double pairwise_auc(const std::vector<bool>& positive, const std::vector<double>& scores) {
  double concordant = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!positive[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (positive[j]) continue;
      pairs += 1;
      if (scores[i] > scores[j]) concordant += 1;
      else if (scores[i] == scores[j]) concordant += 0.5;
    }
  }
  return pairs > 0 ? concordant / pairs : std::numeric_limits<double>::quiet_NaN();
}

inline double class_auc(const std::vector<std::size_t>& t, const Eigen::MatrixXd& probs,
                        std::size_t c) {
  std::vector<bool> pos(t.size());
  std::vector<double> s(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    pos[i] = t[i] == c;
    s[i] = probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
  }
  return pairwise_auc(pos, s);
}

struct EarlyStoppingScan {
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

// Brute force: epoch t improves iff v_t is below the smallest earlier
// improving value by more than min_delta; stop at the first non-improving t
// whose distance to the last improving epoch reaches patience.
inline EarlyStoppingScan early_stopping_scan(const std::vector<double>& v, std::size_t patience,
                                             double md, std::size_t max_epochs) {
  const std::size_t n = std::min(v.size(), max_epochs);
  std::vector<bool> improves(n, false);
  EarlyStoppingScan out;
  for (std::size_t t = 0; t < n; ++t) {
    double ref = std::numeric_limits<double>::infinity();
    std::size_t last = 0;  // 1-based epoch of the last improvement, 0 = none
    for (std::size_t s = 0; s < t; ++s) {
      if (improves[s]) {
        ref = std::min(ref, v[s]);
        last = s + 1;
      }
    }
    improves[t] = v[t] < ref - md;
    out.epochs_run = t + 1;
    if (!improves[t] && (t + 1) - last >= patience) {
      out.stopped_early = t + 1 < max_epochs;
      break;
    }
  }
  std::size_t best = 0;
  for (std::size_t s = 1; s < out.epochs_run; ++s) {
    if (v[s] < v[best]) best = s;
  }
  out.best_epoch = best + 1;
  return out;
}

}  // namespace knitpat::oracle
