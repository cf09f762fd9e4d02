#pragma once

#include <span>

#include "knitpat/dataset/class_weights.hpp"
#include "knitpat/model/backbone.hpp"

namespace knitpat {

inline constexpr double kProbabilityClip = 1e-15;

/// (1/B) * sum_i w_{c(i)} * -ln(clip(p_{i,c(i)})). `labels` is one-hot and the
/// same shape as `probs`; `weights` has one entry per column.
/// Throws std::invalid_argument on any shape mismatch.
double weighted_categorical_cross_entropy(const Matrix& probs, const Matrix& labels,
                                          const ClassWeights& weights);

/// Same loss with class-index labels.
double weighted_categorical_cross_entropy(const Matrix& probs,
                                          std::span<const std::size_t> labels,
                                          const ClassWeights& weights);

/// Gradient of the loss above with respect to the softmax logits,
/// (1/B) * w_{c(i)} * (p_i - y_i), taken through the unclipped softmax.
Matrix weighted_cross_entropy_logit_grad(const Matrix& probs,
                                         std::span<const std::size_t> labels,
                                         const ClassWeights& weights);

Matrix one_hot(std::span<const std::size_t> labels, std::size_t num_classes);

/// Row argmax; ties resolve to the lower class index.
std::vector<std::size_t> argmax_rows(const Matrix& probs);

}  // namespace knitpat
