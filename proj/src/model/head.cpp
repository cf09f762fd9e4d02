#include "knitpat/model/head.hpp"

#include <cmath>
#include <string>

namespace knitpat {

namespace {

DenseLayer glorot_dense(std::size_t in, std::size_t out, RandomStream& rng) {
  DenseLayer layer;
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  layer.weight.resize(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out));
  for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
    layer.weight.data()[i] = rng.uniform(-limit, limit);
  }
  layer.bias = RowVector::Zero(static_cast<Eigen::Index>(out));
  return layer;
}

}  // namespace

void HeadSpec::validate() const {
  if (widths.empty()) throw std::invalid_argument("head widths must be nonempty");
  for (auto w : widths) {
    if (w == 0) throw std::invalid_argument("head widths must be positive");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("head dropout_rate must be in [0, 1)");
  }
  if (num_classes < 2) throw std::invalid_argument("head num_classes must be >= 2");
}

Head::Head(const HeadSpec& spec, std::size_t input_dim, RandomStream& rng)
    : spec_(spec), input_dim_(input_dim) {
  spec_.validate();
  if (input_dim == 0) throw ModelError("head input dimension must be positive");
  std::size_t in = input_dim;
  for (std::size_t width : spec_.widths) {
    HeadBlock block;
    block.dense = glorot_dense(in, width, rng);
    if (spec_.use_batch_norm) {
      const auto n = static_cast<Eigen::Index>(width);
      block.norm = BatchNormLayer{RowVector::Ones(n), RowVector::Zero(n), RowVector::Zero(n),
                                  RowVector::Ones(n)};
    }
    blocks_.push_back(std::move(block));
    in = width;
  }
  output_ = glorot_dense(in, spec_.num_classes, rng);
}

Matrix Head::forward(const Matrix& features, Mode mode, RandomStream* rng,
                     HeadCache* cache) const {
  if (features.cols() != static_cast<Eigen::Index>(input_dim_)) {
    throw ModelError("head expects " + std::to_string(input_dim_) + " features, received " +
                     std::to_string(features.cols()));
  }
  if (cache) {
    cache->blocks.clear();
    cache->mode = mode;
  }
  const bool dropout = mode == Mode::kTraining && spec_.dropout_rate > 0.0;
  if (dropout && rng == nullptr) throw ModelError("training-mode dropout needs a random stream");
  const auto batch = static_cast<double>(features.rows());

  Matrix x = features;
  for (const auto& block : blocks_) {
    HeadCache::BlockCache bc;
    if (cache) bc.input = x;
    Matrix z = x * block.dense.weight;
    z.rowwise() += block.dense.bias;
    Matrix a = z.cwiseMax(0.0);
    if (cache) bc.pre_activation = z;

    if (block.norm) {
      const auto& bn = *block.norm;
      RowVector mean, var;
      if (mode == Mode::kTraining) {
        mean = a.colwise().mean();
        var = (a.rowwise() - mean).array().square().colwise().sum() / batch;
      } else {
        mean = bn.moving_mean;
        var = bn.moving_variance;
      }
      const RowVector inv_std = (var.array() + bn.epsilon).rsqrt().matrix();
      Matrix xhat = (a.rowwise() - mean).array().rowwise() * inv_std.array();
      a = (xhat.array().rowwise() * bn.gamma.array()).rowwise() + bn.beta.array();
      if (cache) {
        bc.normalized = std::move(xhat);
        bc.inv_std = inv_std;
        bc.batch_mean = std::move(mean);
        bc.batch_variance = std::move(var);
      }
    }

    if (dropout) {
      const double keep = 1.0 - spec_.dropout_rate;
      Matrix mask(a.rows(), a.cols());
      for (Eigen::Index i = 0; i < mask.size(); ++i) {
        mask.data()[i] = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
      }
      a = a.cwiseProduct(mask);
      if (cache) bc.dropout_mask = std::move(mask);
    }
    if (cache) cache->blocks.push_back(std::move(bc));
    x = std::move(a);
  }
  if (cache) cache->last_hidden = x;
  Matrix logits = x * output_.weight;
  logits.rowwise() += output_.bias;
  return logits;
}

void Head::update_moving_statistics(const HeadCache& cache) {
  if (cache.mode != Mode::kTraining) return;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (!blocks_[i].norm) continue;
    auto& bn = *blocks_[i].norm;
    const auto& bc = cache.blocks[i];
    bn.moving_mean = bn.momentum * bn.moving_mean + (1.0 - bn.momentum) * bc.batch_mean;
    bn.moving_variance =
        bn.momentum * bn.moving_variance + (1.0 - bn.momentum) * bc.batch_variance;
  }
}

HeadGradients Head::backward(const HeadCache& cache, const Matrix& d_logits) const {
  HeadGradients g;
  g.out_weight = cache.last_hidden.transpose() * d_logits;
  g.out_bias = d_logits.colwise().sum();
  Matrix d = d_logits * output_.weight.transpose();
  const auto batch = static_cast<double>(d_logits.rows());

  g.blocks.resize(blocks_.size());
  for (std::size_t i = blocks_.size(); i-- > 0;) {
    const auto& block = blocks_[i];
    const auto& bc = cache.blocks[i];
    auto& gb = g.blocks[i];
    if (bc.dropout_mask.size() > 0) d = d.cwiseProduct(bc.dropout_mask);

    if (block.norm) {
      const auto& bn = *block.norm;
      gb.gamma = d.cwiseProduct(bc.normalized).colwise().sum();
      gb.beta = d.colwise().sum();
      const Matrix d_xhat = d.array().rowwise() * bn.gamma.array();
      if (cache.mode == Mode::kTraining) {
        const RowVector sum_d = d_xhat.colwise().sum();
        const RowVector sum_dx = d_xhat.cwiseProduct(bc.normalized).colwise().sum();
        Matrix centered = (batch * d_xhat).rowwise() - sum_d;
        centered -= (bc.normalized.array().rowwise() * sum_dx.array()).matrix();
        d = (centered.array().rowwise() * (bc.inv_std.array() / batch)).matrix();
      } else {
        d = d_xhat.array().rowwise() * bc.inv_std.array();
      }
    }
    d = (bc.pre_activation.array() > 0.0).select(d, 0.0);
    gb.weight = bc.input.transpose() * d;
    gb.bias = d.colwise().sum();
    d = d * block.dense.weight.transpose();
  }
  g.d_input = std::move(d);
  return g;
}

std::size_t Head::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) {
    n += static_cast<std::size_t>(b.dense.weight.size() + b.dense.bias.size());
    if (b.norm) n += static_cast<std::size_t>(b.norm->gamma.size() + b.norm->beta.size());
  }
  return n + static_cast<std::size_t>(output_.weight.size() + output_.bias.size());
}

Matrix softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double peak = logits.row(r).maxCoeff();
    const RowVector e = (logits.row(r).array() - peak).exp().matrix();
    out.row(r) = e / e.sum();
  }
  return out;
}

}  // namespace knitpat
