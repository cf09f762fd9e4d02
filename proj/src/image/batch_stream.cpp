#include "knitpat/image/batch_stream.hpp"

#include <algorithm>
#include <numeric>
#include <thread>

#include "knitpat/image/image_io.hpp"

namespace knitpat {

namespace {

// Substream keys: shuffles and per-sample augmentation never share a stream.
constexpr std::uint64_t kShuffleKey = 0x5348554646ULL;
constexpr std::uint64_t kAugmentKey = 0x4155474dULL;

}  // namespace

std::vector<double> Batch::one_hot() const {
  std::vector<double> out(size() * num_classes, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) out[i * num_classes + labels[i]] = 1.0;
  return out;
}

ImageTensor load_from_disk(const DatasetManifest& manifest, const ImageSample& sample) {
  return decode_image(manifest.resolve(sample));
}

ManifestBatchStream::ManifestBatchStream(DatasetManifest manifest, Split split,
                                         AugmentationConfig cfg, std::size_t batch_size,
                                         RandomStream rng, StreamOptions options)
    : manifest_(std::move(manifest)),
      split_(split),
      cfg_(cfg),
      batch_size_(batch_size),
      rng_(rng),
      options_(std::move(options)),
      augment_(options_.augment.value_or(split == Split::kTrain)) {
  cfg_.validate();
  if (batch_size_ == 0) throw std::invalid_argument("batch size must be >= 1");
  members_ = manifest_.indices_in(split_);
  if (members_.empty()) {
    throw DatasetError("split '" + std::string(to_string(split_)) + "' has no samples");
  }
  order_ = members_;
}

void ManifestBatchStream::start_epoch() {
  if (started_) ++epoch_;
  started_ = true;
  cursor_ = 0;
  order_ = members_;
  if (split_ == Split::kTrain) {
    RandomStream shuffler = rng_.substream(kShuffleKey).substream(epoch_);
    shuffler.shuffle(std::span<std::size_t>(order_));
  }
}

ImageTensor ManifestBatchStream::prepare(std::size_t sample_id) const {
  const ImageSample& sample = manifest_.samples()[sample_id];
  ImageTensor img = preprocess(options_.loader(manifest_, sample), cfg_, options_.image_size);
  if (augment_) {
    RandomStream local = rng_.substream(kAugmentKey).substream(epoch_).substream(sample_id);
    img = random_affine(img, cfg_, local);
  }
  return img;
}

std::optional<Batch> ManifestBatchStream::next() {
  if (!started_) start_epoch();
  if (cursor_ >= order_.size()) return std::nullopt;
  const std::size_t end = std::min(cursor_ + batch_size_, order_.size());

  Batch batch;
  batch.num_classes = kNumClasses;
  batch.sample_ids.assign(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                          order_.begin() + static_cast<std::ptrdiff_t>(end));
  batch.images.resize(batch.sample_ids.size());
  for (std::size_t id : batch.sample_ids) {
    batch.labels.push_back(class_index(manifest_.samples()[id].label));
  }

  const std::size_t n = batch.sample_ids.size();
  const std::size_t workers = std::clamp<std::size_t>(options_.workers, 1, n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) batch.images[i] = prepare(batch.sample_ids[i]);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers) {
            batch.images[i] = prepare(batch.sample_ids[i]);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  cursor_ = end;
  return batch;
}

TensorBatchSource::TensorBatchSource(std::vector<ImageTensor> images,
                                     std::vector<std::size_t> labels,
                                     std::size_t num_classes, std::size_t batch_size,
                                     bool shuffle, RandomStream rng)
    : images_(std::move(images)),
      labels_(std::move(labels)),
      num_classes_(num_classes),
      batch_size_(batch_size),
      shuffle_(shuffle),
      rng_(rng) {
  if (images_.empty()) throw DatasetError("tensor source has no samples");
  if (images_.size() != labels_.size()) {
    throw std::invalid_argument("tensor source needs one label per image");
  }
  if (batch_size_ == 0) throw std::invalid_argument("batch size must be >= 1");
  for (std::size_t l : labels_) {
    if (l >= num_classes_) throw std::invalid_argument("label outside 0..num_classes-1");
  }
  order_.resize(images_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
}

void TensorBatchSource::start_epoch() {
  if (started_) ++epoch_;
  started_ = true;
  cursor_ = 0;
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (shuffle_) {
    RandomStream shuffler = rng_.substream(kShuffleKey).substream(epoch_);
    shuffler.shuffle(std::span<std::size_t>(order_));
  }
}

std::optional<Batch> TensorBatchSource::next() {
  if (!started_) start_epoch();
  if (cursor_ >= order_.size()) return std::nullopt;
  const std::size_t end = std::min(cursor_ + batch_size_, order_.size());
  Batch batch;
  batch.num_classes = num_classes_;
  for (std::size_t k = cursor_; k < end; ++k) {
    batch.sample_ids.push_back(order_[k]);
    batch.images.push_back(images_[order_[k]]);
    batch.labels.push_back(labels_[order_[k]]);
  }
  cursor_ = end;
  return batch;
}

void dump_batch(const Batch& batch, const std::filesystem::path& dir,
                const std::string& prefix) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::string label = std::to_string(batch.labels[i]);
    if (batch.num_classes == kNumClasses) label = std::string(kClassNames[batch.labels[i]]);
    write_png(batch.images[i],
              dir / (prefix + "_" + std::to_string(i) + "_" + label + ".png"));
  }
}

}  // namespace knitpat
