#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "knitpat/core/random_stream.hpp"
#include "knitpat/model/backbone.hpp"

namespace knitpat {

struct HeadSpec {
  std::vector<std::size_t> widths = {512, 256, 128};
  double dropout_rate = 0.5;
  bool use_batch_norm = true;
  std::size_t num_classes = 7;

  void validate() const;
  friend bool operator==(const HeadSpec&, const HeadSpec&) = default;
};

struct DenseLayer {
  Matrix weight;  // in x out
  RowVector bias;
};

/// Keras-style batch normalization. Moving statistics are buffers, not
/// parameters: the optimizer never touches them and they are excluded from
/// parameter counts.
struct BatchNormLayer {
  RowVector gamma;
  RowVector beta;
  RowVector moving_mean;
  RowVector moving_variance;
  double momentum = 0.99;
  double epsilon = 1e-3;
};

struct HeadBlock {
  DenseLayer dense;
  std::optional<BatchNormLayer> norm;
};

enum class Mode { kTraining, kInference };

struct HeadCache {
  struct BlockCache {
    Matrix input;
    Matrix pre_activation;
    Matrix normalized;  // xhat
    RowVector inv_std;
    RowVector batch_mean;
    RowVector batch_variance;
    Matrix dropout_mask;  // empty when dropout inactive
  };
  std::vector<BlockCache> blocks;
  Matrix last_hidden;
  Mode mode = Mode::kInference;
};

/// Gradients for one head, laid out like the head's parameters.
struct HeadGradients {
  struct Block {
    Matrix weight;
    RowVector bias;
    RowVector gamma;
    RowVector beta;
  };
  std::vector<Block> blocks;
  Matrix out_weight;
  RowVector out_bias;
  Matrix d_input;
};

/// Blocks of dense -> ReLU -> batch norm -> dropout followed by a dense
/// projection to num_classes logits.
class Head {
 public:
  Head() = default;
  /// Glorot-uniform dense weights, zero biases, unit gamma, zero beta.
  Head(const HeadSpec& spec, std::size_t input_dim, RandomStream& rng);

  const HeadSpec& spec() const { return spec_; }
  std::size_t input_dim() const { return input_dim_; }

  std::vector<HeadBlock>& blocks() { return blocks_; }
  const std::vector<HeadBlock>& blocks() const { return blocks_; }
  DenseLayer& output() { return output_; }
  const DenseLayer& output() const { return output_; }

  /// Returns logits. Training mode normalizes with batch statistics and
  /// applies inverted dropout drawn from `rng`; the batch statistics land in
  /// `cache` for update_moving_statistics().
  Matrix forward(const Matrix& features, Mode mode, RandomStream* rng, HeadCache* cache) const;

  /// Folds a training-mode pass's batch statistics into the moving averages.
  void update_moving_statistics(const HeadCache& cache);

  HeadGradients backward(const HeadCache& cache, const Matrix& d_logits) const;

  std::size_t parameter_count() const;

 private:
  HeadSpec spec_;
  std::size_t input_dim_ = 0;
  std::vector<HeadBlock> blocks_;
  DenseLayer output_;
};

/// Row-wise numerically stable softmax.
Matrix softmax(const Matrix& logits);

}  // namespace knitpat
