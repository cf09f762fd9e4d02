#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "knitpat/model/checkpoint.hpp"
#include "knitpat/train/early_stopping.hpp"
#include "knitpat/train/loss.hpp"
#include "knitpat/train/trainer.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace knitpat {
namespace {

Matrix random_probs(RandomStream& rng, std::size_t rows, std::size_t cols) {
  Matrix logits(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = rng.uniform(-4, 4);
  return softmax(logits);
}

std::vector<std::size_t> random_labels(RandomStream& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> y(n);
  for (auto& v : y) v = rng.below(k);
  return y;
}

TEST(LossTest, AnalyticExamples) {
  const auto unit7 = ClassWeights::uniform(7);
  const std::vector<std::size_t> labels = {0, 3, 6};
  EXPECT_NEAR(weighted_categorical_cross_entropy(one_hot(labels, 7), labels, unit7), 0.0, 1e-12);
  const Matrix uniform = Matrix::Constant(3, 7, 1.0 / 7.0);
  EXPECT_NEAR(weighted_categorical_cross_entropy(uniform, labels, unit7), 1.945910149055313, 1e-12);

  Matrix single(1, 2);
  single << 0.7, 0.3;
  const std::vector<std::size_t> first = {0};
  EXPECT_NEAR(weighted_categorical_cross_entropy(single, first, ClassWeights({2.0, 1.0})),
              0.713349887877465, 1e-12);
}

TEST(LossTest, ShapeMismatchThrows) {
  const auto unit = ClassWeights::uniform(3);
  const Matrix probs = Matrix::Constant(2, 3, 1.0 / 3.0);
  EXPECT_THROW(weighted_categorical_cross_entropy(probs, Matrix::Zero(2, 4), unit),
               std::invalid_argument);
  const std::vector<std::size_t> three = {0, 1, 2};
  EXPECT_THROW(weighted_categorical_cross_entropy(probs, three, unit), std::invalid_argument);
  const std::vector<std::size_t> two = {0, 1};
  EXPECT_THROW(weighted_categorical_cross_entropy(probs, two, ClassWeights::uniform(4)),
               std::invalid_argument);
}

TEST(LossTest, FiniteForExactZeros) {
  const Matrix zeros = Matrix::Zero(2, 3);
  const std::vector<std::size_t> labels = {0, 2};
  const double loss = weighted_categorical_cross_entropy(zeros, labels, ClassWeights::uniform(3));
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_NEAR(loss, -std::log(1e-15), 1e-9);
}

TEST(LossTest, UnitWeightsMatchPlainCrossEntropy) {
  RandomStream rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(50), k = 2 + rng.below(6);
    const Matrix p = random_probs(rng, n, k);
    const auto y = random_labels(rng, n, k);
    double oracle = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      oracle -= std::log(p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(y[i])));
    }
    oracle /= static_cast<double>(n);
    const auto unit = ClassWeights::uniform(k);
    EXPECT_NEAR(weighted_categorical_cross_entropy(p, y, unit), oracle, 1e-12);
    EXPECT_NEAR(weighted_categorical_cross_entropy(p, one_hot(y, k), unit), oracle, 1e-12);
  }
}

TEST(LossTest, LogitGradientMatchesFiniteDifferences) {
  RandomStream rng(2);
  const std::size_t n = 5, k = 4;
  Matrix logits(5, 4);
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = rng.uniform(-2, 2);
  const auto y = random_labels(rng, n, k);
  const ClassWeights w({0.5, 1.5, 2.0, 0.8});
  const Matrix analytic = weighted_cross_entropy_logit_grad(softmax(logits), y, w);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    Matrix up = logits, down = logits;
    up.data()[i] += h;
    down.data()[i] -= h;
    const double numeric = (weighted_categorical_cross_entropy(softmax(up), y, w) -
                            weighted_categorical_cross_entropy(softmax(down), y, w)) /
                           (2 * h);
    EXPECT_NEAR(analytic.data()[i], numeric, 1e-7);
  }
}

TEST(EarlyStoppingTest, DocumentedExamples) {
  const std::vector<double> plateau = {1.0, 0.9, 0.9, 0.9, 0.9};
  const auto a = simulate_early_stopping(plateau, 2, 0.001, 25);
  EXPECT_EQ(a.epochs_run, 4u);
  EXPECT_EQ(a.best_epoch, 2u);
  EXPECT_TRUE(a.stopped_early);

  const std::vector<double> bump = {1.0, 0.8, 0.85, 0.7};
  const auto b = simulate_early_stopping(bump, 0, 0.0, 25);
  EXPECT_EQ(b.epochs_run, 3u);
  EXPECT_TRUE(b.stopped_early);

  const std::vector<double> falling = {5, 4, 3, 2, 1};
  const auto c = simulate_early_stopping(falling, 0, 0.001, 5);
  EXPECT_EQ(c.epochs_run, 5u);
  EXPECT_EQ(c.best_epoch, 5u);
  EXPECT_FALSE(c.stopped_early);
}

TEST(EarlyStoppingTest, BestEpochTracksMinimumBelowMinDelta) {
  const std::vector<double> v = {1.0, 0.9995, 0.9993};
  const auto r = simulate_early_stopping(v, 5, 0.001, 25);
  EXPECT_EQ(r.epochs_run, 3u);
  EXPECT_EQ(r.best_epoch, 3u);
}

TEST(EarlyStoppingTest, MatchesScanOracle) {
  RandomStream rng(3);
  const double deltas[] = {0.0, 0.001, 0.01};
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t len = 1 + rng.below(40);
    std::vector<double> v(len);
    double level = rng.uniform(0.5, 2.0);
    for (auto& x : v) {
      level += rng.uniform(-0.02, 0.015);
      x = rng.bernoulli(0.2) ? level + 0.005 : level;
    }
    const std::size_t patience = rng.below(11);
    const double md = deltas[rng.below(3)];
    const std::size_t max_epochs = 1 + rng.below(45);
    const auto got = simulate_early_stopping(v, patience, md, max_epochs);
    const auto want = oracle::early_stopping_scan(v, patience, md, max_epochs);
    ASSERT_EQ(got.epochs_run, want.epochs_run) << trial;
    ASSERT_EQ(got.best_epoch, want.best_epoch) << trial;
    ASSERT_EQ(got.stopped_early, want.stopped_early) << trial;
  }
}

TEST(TrainConfigTest, DefaultsPresetAndValidation) {
  TrainConfig cfg;
  EXPECT_EQ(cfg.batch_size, 64u);
  EXPECT_EQ(cfg.max_epochs, 25u);
  EXPECT_EQ(cfg.optimizer, OptimizerKind::kAdam);
  EXPECT_DOUBLE_EQ(cfg.learning_rate, 0.001);
  EXPECT_TRUE(cfg.use_class_weights);
  EXPECT_EQ(cfg.early_stopping.patience, 10u);
  EXPECT_DOUBLE_EQ(cfg.early_stopping.min_delta, 0.001);
  EXPECT_TRUE(cfg.early_stopping.restore_best);
  const auto preset = TrainConfig::comparison_preset();
  EXPECT_DOUBLE_EQ(preset.learning_rate, 1e-5);
  EXPECT_EQ(preset.max_epochs, 2u);
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.early_stopping.min_delta = -1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.early_stopping.monitor = "val_accuracy";
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

struct SmallRun {
  TinyCorpus corpus = make_separable_corpus(4, 5);
  ClassifierSpec spec = [] {
    ClassifierSpec s = overfit_spec();
    s.head.widths = {16, 8};
    s.head.dropout_rate = 0.3;
    return s;
  }();

  TrainResult run(TrainConfig cfg, const TrainOptions& options = {}) {
    TensorBatchSource tr(corpus.images, corpus.labels, 2, cfg.batch_size, true, RandomStream(1));
    TensorBatchSource va(corpus.images, corpus.labels, 2, 8, false, RandomStream(1));
    return train(build_classifier(spec, nullptr, 4), tr, va, cfg, ClassWeights({1.0, 3.0}),
                 options);
  }
};

TEST(TrainerTest, ZeroLearningRateStopsAfterPatience) {
  SmallRun run;
  run.spec.head.use_batch_norm = false;  // moving averages would still drift
  TrainConfig cfg;
  cfg.batch_size = 3;
  cfg.learning_rate = 0.0;
  cfg.early_stopping.patience = 2;
  const auto r = run.run(cfg);
  // The validation loss never moves, so epoch 1 is best and 1 + patience epochs run.
  ASSERT_EQ(r.history.records.size(), 3u);
  EXPECT_TRUE(r.history.stopped_early);
  EXPECT_EQ(r.history.best_epoch, 1u);
  for (const auto& rec : r.history.records) {
    EXPECT_EQ(rec.val_loss, r.history.records[0].val_loss);
    EXPECT_GE(rec.train_accuracy, 0.0);
    EXPECT_LE(rec.train_accuracy, 1.0);
    EXPECT_GE(rec.train_loss, 0.0);
  }
}

TEST(TrainerTest, RestoreBestAndCheckpoint) {
  SmallRun run;
  testing::TempDir dir;
  TrainConfig cfg;
  cfg.batch_size = 3;
  cfg.learning_rate = 0.05;
  cfg.max_epochs = 6;
  cfg.early_stopping.patience = 6;
  std::size_t callbacks = 0;
  TrainOptions options;
  options.checkpoint_path = dir / "best.kpck";
  options.on_epoch = [&](const EpochRecord&) { ++callbacks; };
  const auto r = run.run(cfg, options);
  EXPECT_EQ(callbacks, r.history.records.size());
  double minimum = std::numeric_limits<double>::infinity();
  for (const auto& rec : r.history.records) minimum = std::min(minimum, rec.val_loss);
  EXPECT_EQ(r.history.best().val_loss, minimum);

  TensorBatchSource va(run.corpus.images, run.corpus.labels, 2, 8, false, RandomStream(1));
  EXPECT_NEAR(evaluate_model(r.model, va).loss, minimum, 1e-6);
  const auto restored = load_checkpoint(dir / "best.kpck");
  EXPECT_NEAR(evaluate_model(restored, va).loss, minimum, 1e-6);
}

TEST(TrainerTest, SameSeedSameHistory) {
  SmallRun run;
  TrainConfig cfg;
  cfg.batch_size = 3;
  cfg.max_epochs = 3;
  cfg.seed = 7;
  const auto a = run.run(cfg);
  const auto b = run.run(cfg);
  EXPECT_TRUE(same_trajectory(a.history, b.history));
  EXPECT_EQ(a.model.predict_proba(run.corpus.images), b.model.predict_proba(run.corpus.images));
  cfg.seed = 8;
  EXPECT_FALSE(same_trajectory(a.history, run.run(cfg).history));
}

TEST(TrainerTest, NonFiniteLossNamesEpochAndBatch) {
  SmallRun run;
  auto model = build_classifier(run.spec, nullptr, 4);
  model.head().output().bias[1] = std::numeric_limits<double>::quiet_NaN();
  TensorBatchSource tr(run.corpus.images, run.corpus.labels, 2, 3, true, RandomStream(1));
  TensorBatchSource va(run.corpus.images, run.corpus.labels, 2, 8, false, RandomStream(1));
  TrainConfig cfg;
  cfg.batch_size = 3;
  try {
    train(model, tr, va, cfg, ClassWeights::uniform(2));
    FAIL();
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1 batch 1"), std::string::npos) << e.what();
  }
  cfg.batch_size = 4;
  EXPECT_THROW(train(model, tr, va, cfg, ClassWeights::uniform(2)), std::invalid_argument);
}

TEST(TrainerTest, HistoryFilesRoundTrip) {
  testing::TempDir dir;
  TrainingHistory h;
  h.records = {{1, 0.9, 0.5, 0.8, 0.55, 1.25}, {2, 0.7, 0.625, 0.75, 0.6, 1.5}};
  h.best_epoch = 2;
  write_history_csv(h, dir / "history.csv");
  write_history_json(h, dir / "history.json");
  EXPECT_EQ(read_history_json(dir / "history.json"), h);
  EXPECT_EQ(testing::slurp(dir / "history.csv"),
            "epoch,train_loss,train_accuracy,val_loss,val_accuracy,wall_time\n"
            "1,0.9,0.5,0.8,0.55,1.250\n"
            "2,0.7,0.625,0.75,0.6,1.500\n");
}

TEST(OverfitTest, SeparableCorpusIsLearned) {
  const auto corpus = make_separable_corpus(40, 1);
  const auto cfg = overfit_config(corpus.images.size());
  const auto h = overfit_sanity(build_classifier(overfit_spec(), nullptr, 0), corpus, cfg);
  ASSERT_FALSE(h.records.empty());
  EXPECT_LE(h.records.size(), 50u);
  EXPECT_GE(h.records.back().train_accuracy, 0.95);
}

TEST(OverfitTest, ZeroLearningRateKeepsLossConstant) {
  const auto corpus = make_separable_corpus(40, 1);
  auto cfg = overfit_config(corpus.images.size(), 0.0);
  cfg.max_epochs = 10;
  cfg.early_stopping.patience = 10;
  const auto h = overfit_sanity(build_classifier(overfit_spec(), nullptr, 0), corpus, cfg);
  ASSERT_EQ(h.records.size(), 10u);
  for (const auto& r : h.records) EXPECT_NEAR(r.train_loss, h.records[0].train_loss, 1e-9);
}

}  // namespace
}  // namespace knitpat
