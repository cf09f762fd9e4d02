#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <vector>

#include "knitpat/dataset/class_weights.hpp"
#include "knitpat/image/batch_stream.hpp"
#include "knitpat/model/classifier.hpp"
#include "knitpat/train/config.hpp"
#include "knitpat/train/history.hpp"

namespace knitpat {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainOptions {
  /// When set, the model is saved here every time a new best epoch appears.
  std::filesystem::path checkpoint_path;
  std::function<void(const EpochRecord&)> on_epoch;
  /// Seconds since an arbitrary origin; defaults to a steady clock.
  std::function<double()> clock;
};

struct TrainResult {
  ClassifierModel model;
  TrainingHistory history;
};

/// Evaluates `source` in inference mode: unweighted loss and accuracy.
struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t samples = 0;
};
Evaluation evaluate_model(const ClassifierModel& model, BatchSource& source);

/// Runs cfg.max_epochs epochs (or fewer under early stopping) of
/// class-weighted cross-entropy minimization. `weights` is used only when
/// cfg.use_class_weights is set; the validation loss is always unweighted.
///
/// Throws TrainingError for a non-finite loss, naming epoch and batch, and
/// std::invalid_argument for an invalid config or mismatched sources.
TrainResult train(ClassifierModel model, BatchSource& train_source, BatchSource& val_source,
                  const TrainConfig& cfg, const ClassWeights& weights,
                  const TrainOptions& options = {});

/// Two-class bright-versus-dark texture corpus of 224x224x3 tensors in [0,1].
struct TinyCorpus {
  std::vector<ImageTensor> images;
  std::vector<std::size_t> labels;
};
TinyCorpus make_separable_corpus(std::size_t per_class, std::uint64_t seed);

/// Full-batch config used by overfit_sanity: 50 epochs, Adam, no class
/// weights, and a patience that cannot trigger.
TrainConfig overfit_config(std::size_t corpus_size, double learning_rate = 0.01);

/// Stub classifier spec for the overfit probe: two classes, dropout off.
ClassifierSpec overfit_spec();

/// Trains `model` on the corpus without augmentation and reports on the
/// same corpus. A correct loop drives training accuracy to >= 0.95.
TrainingHistory overfit_sanity(ClassifierModel model, const TinyCorpus& corpus,
                               const TrainConfig& cfg);

}  // namespace knitpat
