#include "knitpat/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <optional>

#include <fmt/format.h>

#include "knitpat/model/checkpoint.hpp"
#include "knitpat/train/early_stopping.hpp"
#include "knitpat/train/loss.hpp"

namespace knitpat {

namespace {

constexpr std::uint64_t kDropoutKey = 0x44524f50;

double steady_seconds() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

std::size_t count_correct(const Matrix& probs, std::span<const std::size_t> labels) {
  const auto predicted = argmax_rows(probs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predicted[i] == labels[i];
  return correct;
}

}  // namespace

Evaluation evaluate_model(const ClassifierModel& model, BatchSource& source) {
  const ClassWeights unit = ClassWeights::uniform(model.num_classes());
  Evaluation ev;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  source.start_epoch();
  while (auto batch = source.next()) {
    const Matrix probs = model.predict_proba(batch->images);
    loss_sum += weighted_categorical_cross_entropy(probs, batch->labels, unit) *
                static_cast<double>(batch->size());
    correct += count_correct(probs, batch->labels);
    ev.samples += batch->size();
  }
  if (ev.samples == 0) throw std::invalid_argument("evaluation source is empty");
  ev.loss = loss_sum / static_cast<double>(ev.samples);
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(ev.samples);
  return ev;
}

TrainResult train(ClassifierModel model, BatchSource& train_source, BatchSource& val_source,
                  const TrainConfig& cfg, const ClassWeights& weights,
                  const TrainOptions& options) {
  cfg.validate();
  if (train_source.batch_size() != cfg.batch_size) {
    throw std::invalid_argument(fmt::format("training stream batch size {} differs from config {}",
                                            train_source.batch_size(), cfg.batch_size));
  }
  if (train_source.num_classes() != model.num_classes() ||
      val_source.num_classes() != model.num_classes()) {
    throw std::invalid_argument("stream class count differs from the model's");
  }
  const ClassWeights loss_weights =
      cfg.use_class_weights ? weights : ClassWeights::uniform(model.num_classes());
  if (loss_weights.size() != model.num_classes()) {
    throw std::invalid_argument("class weight count differs from the model's class count");
  }
  const auto now = options.clock ? options.clock : std::function<double()>(steady_seconds);

  Optimizer optimizer(cfg.optimizer, cfg.learning_rate);
  EarlyStopping stopper(cfg.early_stopping.patience, cfg.early_stopping.min_delta);
  const RandomStream dropout_root = RandomStream(cfg.seed).substream(kDropoutKey);
  std::optional<ClassifierModel> best_model;
  TrainingHistory history;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double started = now();
    const RandomStream epoch_rng = dropout_root.substream(epoch);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t seen = 0;
    std::size_t batch_index = 0;
    train_source.start_epoch();
    while (auto batch = train_source.next()) {
      ++batch_index;
      RandomStream rng = epoch_rng.substream(batch_index);
      ForwardPass pass;
      const Matrix probs = model.forward(batch->images, Mode::kTraining, &rng, &pass);
      const double loss = weighted_categorical_cross_entropy(probs, batch->labels, loss_weights);
      if (!std::isfinite(loss) || !probs.allFinite()) {
        throw TrainingError(fmt::format("non-finite training loss at epoch {} batch {}", epoch,
                                        batch_index));
      }
      const Gradients grads = model.backward(
          pass, weighted_cross_entropy_logit_grad(probs, batch->labels, loss_weights));
      optimizer.step(model.parameters(), grads);
      model.commit_statistics(pass);
      loss_sum += loss * static_cast<double>(batch->size());
      correct += count_correct(probs, batch->labels);
      seen += batch->size();
    }
    if (seen == 0) throw std::invalid_argument("training stream is empty");

    const Evaluation val = evaluate_model(model, val_source);
    if (!std::isfinite(val.loss)) {
      throw TrainingError(fmt::format("non-finite validation loss at epoch {}", epoch));
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(seen);
    record.train_accuracy = static_cast<double>(correct) / static_cast<double>(seen);
    record.val_loss = val.loss;
    record.val_accuracy = val.accuracy;

    const auto step = stopper.observe(val.loss);
    if (step.new_best) {
      if (cfg.early_stopping.restore_best) best_model = model;
      if (!options.checkpoint_path.empty()) save_checkpoint(model, options.checkpoint_path);
    }
    record.wall_time = now() - started;
    history.records.push_back(record);
    if (options.on_epoch) options.on_epoch(record);
    if (step.stop) {
      history.stopped_early = epoch < cfg.max_epochs;
      break;
    }
  }

  history.best_epoch = stopper.best_epoch();
  if (best_model) model = std::move(*best_model);
  return {std::move(model), std::move(history)};
}

TinyCorpus make_separable_corpus(std::size_t per_class, std::uint64_t seed) {
  TinyCorpus corpus;
  RandomStream rng(seed);
  constexpr std::size_t size = kModelInputSize;
  for (std::size_t label = 0; label < 2; ++label) {
    for (std::size_t n = 0; n < per_class; ++n) {
      const double base = label == 0 ? rng.uniform(0.15, 0.35) : rng.uniform(0.65, 0.85);
      const double fx = rng.uniform(2.0, 12.0);
      const double fy = rng.uniform(2.0, 12.0);
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      ImageTensor img(size, size, 3);
      for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
          const double t = 2.0 * std::numbers::pi *
                               (fx * static_cast<double>(x) + fy * static_cast<double>(y)) /
                               static_cast<double>(size) +
                           phase;
          const auto v =
              static_cast<float>(base + 0.1 * std::sin(t) + rng.uniform(-0.05, 0.05));
          for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = v;
        }
      }
      corpus.images.push_back(std::move(img));
      corpus.labels.push_back(label);
    }
  }
  return corpus;
}

TrainConfig overfit_config(std::size_t corpus_size, double learning_rate) {
  TrainConfig cfg;
  cfg.batch_size = corpus_size;
  cfg.max_epochs = 50;
  cfg.learning_rate = learning_rate;
  cfg.use_class_weights = false;
  cfg.early_stopping.patience = cfg.max_epochs;
  cfg.early_stopping.restore_best = false;
  return cfg;
}

ClassifierSpec overfit_spec() {
  ClassifierSpec spec;
  spec.backbone = stub_backbone_spec();
  spec.head.num_classes = 2;
  spec.head.dropout_rate = 0.0;
  return spec;
}

TrainingHistory overfit_sanity(ClassifierModel model, const TinyCorpus& corpus,
                               const TrainConfig& cfg) {
  TensorBatchSource train_source(corpus.images, corpus.labels, 2, cfg.batch_size, true,
                                 RandomStream(cfg.seed));
  TensorBatchSource val_source(corpus.images, corpus.labels, 2, cfg.batch_size, false,
                               RandomStream(cfg.seed));
  return train(std::move(model), train_source, val_source, cfg, ClassWeights::uniform(2))
      .history;
}

}  // namespace knitpat
