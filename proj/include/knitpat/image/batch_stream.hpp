#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "knitpat/core/random_stream.hpp"
#include "knitpat/dataset/manifest.hpp"
#include "knitpat/image/image_tensor.hpp"
#include "knitpat/image/transforms.hpp"

namespace knitpat {

struct Batch {
  std::vector<ImageTensor> images;
  std::vector<std::size_t> labels;      // class indices
  std::vector<std::size_t> sample_ids;  // positions in the source
  std::size_t num_classes = kNumClasses;

  std::size_t size() const { return images.size(); }
  /// Row-major size() x num_classes one-hot matrix.
  std::vector<double> one_hot() const;
};

/// Epoch-structured producer of labelled batches.
class BatchSource {
 public:
  virtual ~BatchSource() = default;

  virtual std::size_t size() const = 0;
  virtual std::size_t batch_size() const = 0;
  virtual std::size_t num_classes() const = 0;
  /// Begins the next epoch; the first call starts epoch 0.
  virtual void start_epoch() = 0;
  /// Next batch of the current epoch, or nullopt once the epoch is exhausted.
  virtual std::optional<Batch> next() = 0;

  std::size_t batches_per_epoch() const {
    return (size() + batch_size() - 1) / batch_size();
  }
};

using ImageLoader =
    std::function<ImageTensor(const DatasetManifest&, const ImageSample&)>;

/// Decodes manifest.resolve(sample) from disk.
ImageTensor load_from_disk(const DatasetManifest& manifest, const ImageSample& sample);

struct StreamOptions {
  /// Defaults to augmenting the training split only.
  std::optional<bool> augment;
  /// Threads used to prepare one batch; output does not depend on it.
  std::size_t workers = 1;
  std::size_t image_size = kModelInputSize;
  ImageLoader loader = load_from_disk;
};

/// Streams one split of a manifest. Training streams reshuffle every epoch;
/// val/test streams keep manifest order. Every sample is preprocessed
/// (rescale, grayscale, resize) and, when augmenting, passed through
/// random_affine with a stream derived from (seed, epoch, sample id).
class ManifestBatchStream final : public BatchSource {
 public:
  /// Throws DatasetError if the split is empty.
  ManifestBatchStream(DatasetManifest manifest, Split split, AugmentationConfig cfg,
                      std::size_t batch_size, RandomStream rng, StreamOptions options = {});

  std::size_t size() const override { return members_.size(); }
  std::size_t batch_size() const override { return batch_size_; }
  std::size_t num_classes() const override { return kNumClasses; }
  void start_epoch() override;
  std::optional<Batch> next() override;

  bool augmenting() const { return augment_; }
  std::size_t epoch() const { return epoch_; }

 private:
  ImageTensor prepare(std::size_t sample_id) const;

  DatasetManifest manifest_;
  Split split_;
  AugmentationConfig cfg_;
  std::size_t batch_size_;
  RandomStream rng_;
  StreamOptions options_;
  bool augment_;
  std::vector<std::size_t> members_;
  std::vector<std::size_t> order_;
  std::size_t epoch_ = 0;
  bool started_ = false;
  std::size_t cursor_ = 0;
};

/// In-memory, already-preprocessed tensors. Shuffles per epoch when asked.
class TensorBatchSource final : public BatchSource {
 public:
  TensorBatchSource(std::vector<ImageTensor> images, std::vector<std::size_t> labels,
                    std::size_t num_classes, std::size_t batch_size, bool shuffle,
                    RandomStream rng);

  std::size_t size() const override { return images_.size(); }
  std::size_t batch_size() const override { return batch_size_; }
  std::size_t num_classes() const override { return num_classes_; }
  void start_epoch() override;
  std::optional<Batch> next() override;

 private:
  std::vector<ImageTensor> images_;
  std::vector<std::size_t> labels_;
  std::size_t num_classes_;
  std::size_t batch_size_;
  bool shuffle_;
  RandomStream rng_;
  std::vector<std::size_t> order_;
  std::size_t epoch_ = 0;
  bool started_ = false;
  std::size_t cursor_ = 0;
};

/// Writes each image of `batch` as `<dir>/<prefix>_<i>_<class>.png`.
void dump_batch(const Batch& batch, const std::filesystem::path& dir,
                const std::string& prefix);

}  // namespace knitpat
