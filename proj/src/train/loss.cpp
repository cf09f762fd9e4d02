#include "knitpat/train/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace knitpat {

namespace {

void check_shapes(const Matrix& probs, std::size_t rows, const ClassWeights& weights) {
  if (static_cast<std::size_t>(probs.rows()) != rows) {
    throw std::invalid_argument("loss: " + std::to_string(probs.rows()) +
                                " probability rows but " + std::to_string(rows) + " labels");
  }
  if (weights.size() != static_cast<std::size_t>(probs.cols())) {
    throw std::invalid_argument("loss: " + std::to_string(weights.size()) +
                                " class weights for " + std::to_string(probs.cols()) +
                                " classes");
  }
  if (rows == 0) throw std::invalid_argument("loss: empty batch");
}

double clipped_nll(double p) {
  return -std::log(std::clamp(p, kProbabilityClip, 1.0 - kProbabilityClip));
}

}  // namespace

double weighted_categorical_cross_entropy(const Matrix& probs, const Matrix& labels,
                                          const ClassWeights& weights) {
  if (labels.rows() != probs.rows() || labels.cols() != probs.cols()) {
    throw std::invalid_argument("loss: labels are " + std::to_string(labels.rows()) + "x" +
                                std::to_string(labels.cols()) + " but probabilities are " +
                                std::to_string(probs.rows()) + "x" +
                                std::to_string(probs.cols()));
  }
  check_shapes(probs, static_cast<std::size_t>(labels.rows()), weights);
  double total = 0.0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
      const double y = labels(i, c);
      if (y != 0.0) total += y * weights[static_cast<std::size_t>(c)] * clipped_nll(probs(i, c));
    }
  }
  return total / static_cast<double>(probs.rows());
}

double weighted_categorical_cross_entropy(const Matrix& probs,
                                          std::span<const std::size_t> labels,
                                          const ClassWeights& weights) {
  check_shapes(probs, labels.size(), weights);
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= weights.size()) throw std::invalid_argument("loss: label out of range");
    total += weights[labels[i]] *
             clipped_nll(probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(labels[i])));
  }
  return total / static_cast<double>(labels.size());
}

Matrix weighted_cross_entropy_logit_grad(const Matrix& probs,
                                         std::span<const std::size_t> labels,
                                         const ClassWeights& weights) {
  check_shapes(probs, labels.size(), weights);
  Matrix d = probs;
  const double inv_b = 1.0 / static_cast<double>(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    d(r, static_cast<Eigen::Index>(labels[i])) -= 1.0;
    d.row(r) *= weights[labels[i]] * inv_b;
  }
  return d;
}

Matrix one_hot(std::span<const std::size_t> labels, std::size_t num_classes) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(labels.size()),
                          static_cast<Eigen::Index>(num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) throw std::invalid_argument("one_hot: label out of range");
    m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(labels[i])) = 1.0;
  }
  return m;
}

std::vector<std::size_t> argmax_rows(const Matrix& probs) {
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

}  // namespace knitpat
