#include <gtest/gtest.h>

#include <cmath>

#include "knitpat/model/checkpoint.hpp"
#include "knitpat/model/classifier.hpp"
#include "knitpat/model/optimizer.hpp"
#include "knitpat/model/weights_registry.hpp"
#include "model_fixtures.hpp"
#include "test_util.hpp"

namespace knitpat {
namespace {

using namespace knitpat::fixtures;

// Builds a registry in `dir` holding a small graph for `name` whose final
// stage has the registry's feature_dim.
void make_registry(const std::filesystem::path& dir, BackboneName name) {
  RandomStream rng(11);
  auto layer = [&](std::size_t in, std::size_t out, std::size_t k, std::size_t s,
                   std::size_t block) {
    ConvLayer l;
    l.in_channels = in;
    l.out_channels = out;
    l.kernel = k;
    l.stride = s;
    l.block = block;
    l.weight.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(k * k * in));
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = rng.uniform(-0.3, 0.3);
    l.bias = RowVector::Constant(static_cast<Eigen::Index>(out), 0.01);
    return l;
  };
  std::vector<ConvLayer> layers = {layer(3, 8, 3, 8, 0),
                                   layer(8, backbone_info(name).feature_dim, 1, 2, 1)};
  const std::string file = std::string(backbone_info(name).id) + ".kpbb";
  write_backbone_file(ConvBackbone(std::string(backbone_info(name).id), 224, std::move(layers)),
                      dir / file);
  write_weights_lock(dir, {{name, file}});
}

TEST(BackboneRegistryTest, ClosedSetOfNames) {
  EXPECT_EQ(parse_backbone_name("inception_resnet_v2"), BackboneName::kInceptionResNetV2);
  EXPECT_EQ(parse_backbone_name("mobilenet_v2"), BackboneName::kMobileNetV2);
  EXPECT_FALSE(parse_backbone_name("alexnet").has_value());
  EXPECT_EQ(backbone_info(BackboneName::kInceptionResNetV2).feature_dim, 1536u);
  EXPECT_EQ(backbone_registry().size(), 8u);
}

TEST(HeadSpecTest, DefaultsAndValidation) {
  HeadSpec head;
  EXPECT_EQ(head.widths, (std::vector<std::size_t>{512, 256, 128}));
  EXPECT_DOUBLE_EQ(head.dropout_rate, 0.5);
  EXPECT_TRUE(head.use_batch_norm);
  EXPECT_EQ(head.num_classes, 7u);
  head.widths.clear();
  EXPECT_THROW(head.validate(), std::invalid_argument);
  head = {};
  head.num_classes = 1;
  EXPECT_THROW(head.validate(), std::invalid_argument);
  head = {};
  head.dropout_rate = 1.0;
  EXPECT_THROW(head.validate(), std::invalid_argument);
}

TEST(ClassifierTest, StubParameterCountMatchesHandCount) {
  const auto model = build_classifier(stub_spec(4, {2}, 3, FreezePolicy::kFreezeAllBackbone),
                                      nullptr);
  const auto counts = count_parameters(model);
  EXPECT_EQ(counts.trainable, (4u * 2 + 2) + (2u * 2) + (2u * 3 + 3));
  // Stub backbone: 3x3x3 -> 8 conv and 3x3x8 -> 4 conv.
  EXPECT_EQ(counts.frozen, (27u * 8 + 8) + (72u * 4 + 4));
}

TEST(ClassifierTest, FreezePolicies) {
  const auto all = build_classifier(stub_spec(4, {2}, 3, FreezePolicy::kFreezeAllBackbone), nullptr);
  const auto last = build_classifier(stub_spec(4, {2}, 3, FreezePolicy::kFreezeExceptLastBlock), nullptr);
  const auto none = build_classifier(stub_spec(4, {2}, 3, FreezePolicy::kTrainAll), nullptr);
  EXPECT_EQ(all.first_trainable_backbone_layer(), 2u);
  EXPECT_EQ(last.first_trainable_backbone_layer(), 1u);
  EXPECT_EQ(none.count_parameters().frozen, 0u);
  EXPECT_LT(all.count_parameters().trainable, last.count_parameters().trainable);
  EXPECT_LT(last.count_parameters().trainable, none.count_parameters().trainable);

  auto copy = all;
  for (const auto& p : copy.parameters()) {
    if (p.name.rfind("backbone/", 0) == 0) EXPECT_FALSE(p.trainable) << p.name;
  }
}

TEST(ClassifierTest, PredictProbaRowsAreDistributions) {
  const auto model = build_classifier(stub_spec(16, {12, 8}, 7, FreezePolicy::kFreezeAllBackbone),
                                      nullptr, 3);
  auto batch = random_batch(5, 1);
  batch[3] = batch[1];
  const Matrix p = model.predict_proba(batch);
  ASSERT_EQ(p.rows(), 5);
  ASSERT_EQ(p.cols(), 7);
  for (Eigen::Index r = 0; r < 5; ++r) {
    EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-6);
    EXPECT_GT(p.row(r).minCoeff(), 0.0);
    EXPECT_LT(p.row(r).maxCoeff(), 1.0);
  }
  EXPECT_EQ(p.row(1), p.row(3));
  EXPECT_EQ(model.predict_proba(batch), p);
}

TEST(ClassifierTest, ShapeMismatchNamesBothShapes) {
  const auto model = build_classifier(stub_spec(4, {2}, 3, FreezePolicy::kTrainAll), nullptr);
  const auto batch = random_batch(1, 2, 100);
  try {
    model.predict_proba(batch);
    FAIL();
  } catch (const ModelError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("224x224x3"), std::string::npos);
    EXPECT_NE(msg.find("100x100x3"), std::string::npos);
  }
}

TEST(ClassifierTest, InceptionResNetV2FromRegistry) {
  testing::TempDir dir;
  make_registry(dir.path(), BackboneName::kInceptionResNetV2);
  const auto registry = WeightsRegistry::load(dir.path());
  ClassifierSpec spec;
  spec.backbone = backbone_spec(BackboneName::kInceptionResNetV2);
  const auto model = build_classifier(spec, &registry, 5);
  EXPECT_EQ(model.backbone().feature_dim(), 1536u);
  const Matrix p = model.predict_proba(random_batch(2, 3));
  ASSERT_EQ(p.rows(), 2);
  ASSERT_EQ(p.cols(), 7);
  for (Eigen::Index r = 0; r < 2; ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-6);
}

TEST(WeightsRegistryTest, MissingAndCorruptFilesNameChecksum) {
  testing::TempDir dir;
  make_registry(dir.path(), BackboneName::kResNet50);
  const auto registry = WeightsRegistry::load(dir.path());
  const std::string expected = registry.entry(BackboneName::kResNet50)->sha256;
  EXPECT_EQ(expected.size(), 64u);
  EXPECT_NO_THROW(registry.verify(BackboneName::kResNet50));

  {
    std::ofstream f(dir / "resnet50.kpbb", std::ios::binary | std::ios::app);
    f << "junk";
  }
  try {
    registry.resolve(BackboneName::kResNet50);
    FAIL();
  } catch (const ModelError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("resnet50"), std::string::npos);
    EXPECT_NE(msg.find(expected), std::string::npos);
  }

  std::filesystem::remove(dir / "resnet50.kpbb");
  try {
    registry.resolve(BackboneName::kResNet50);
    FAIL();
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("missing"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find(expected), std::string::npos);
  }
  EXPECT_THROW(registry.resolve(BackboneName::kVgg19), ModelError);
  EXPECT_THROW(WeightsRegistry::load(dir / "nowhere"), ModelError);
}

TEST(WeightsRegistryTest, FeatureDimMustMatchRegistry) {
  testing::TempDir dir;
  write_backbone_file(ConvBackbone::stub(10), dir / "fake.kpbb");
  write_weights_lock(dir.path(), {{BackboneName::kVgg19, "fake.kpbb"}});
  EXPECT_THROW(WeightsRegistry::load(dir.path()).resolve(BackboneName::kVgg19), ModelError);
}

TEST(ClassifierTest, CheckpointRoundTripIsBitIdentical) {
  testing::TempDir dir;
  auto model = build_classifier(stub_spec(6, {5, 4}, 7, FreezePolicy::kFreezeExceptLastBlock),
                                nullptr, 9);
  // Move off the initial values so every tensor is exercised.
  auto batch = random_batch(4, 4);
  ForwardPass pass;
  RandomStream rng(1);
  const Matrix probs = model.forward(batch, Mode::kTraining, &rng, &pass);
  Optimizer opt(OptimizerKind::kAdam, 0.01);
  opt.step(model.parameters(), model.backward(pass, cross_entropy_grad(probs, {0, 1, 2, 3})));
  model.commit_statistics(pass);

  save_checkpoint(model, dir / "model.kpck");
  const auto loaded = load_checkpoint(dir / "model.kpck");
  EXPECT_EQ(loaded.spec(), model.spec());
  EXPECT_EQ(loaded.predict_proba(batch), model.predict_proba(batch));
  EXPECT_EQ(spec_from_json(spec_to_json(model.spec())), model.spec());
}

TEST(ClassifierTest, CheckpointCorruptionDetected) {
  testing::TempDir dir;
  const auto model = build_classifier(stub_spec(4, {3}, 3, FreezePolicy::kTrainAll), nullptr);
  save_checkpoint(model, dir / "m.kpck");
  std::string bytes = testing::slurp(dir / "m.kpck");
  bytes[bytes.size() / 2] ^= 0x5a;
  testing::touch(dir / "bad.kpck", bytes);
  EXPECT_THROW(load_checkpoint(dir / "bad.kpck"), ModelError);
  EXPECT_THROW(load_checkpoint(dir / "missing.kpck"), ModelError);

  bytes = testing::slurp(dir / "m.kpck");
  bytes[4] = 9;  // version field
  testing::touch(dir / "future.kpck", bytes);
  try {
    load_checkpoint(dir / "future.kpck");
    FAIL();
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
}

TEST(GradientTest, HeadMatchesFiniteDifferencesInInferenceMode) {
  auto model = build_classifier(stub_spec(4, {6, 5}, 3, FreezePolicy::kFreezeAllBackbone),
                                nullptr, 21);
  RandomStream rng(8);
  for (auto& block : model.head().blocks()) {
    for (Eigen::Index i = 0; i < block.norm->moving_mean.size(); ++i) {
      block.norm->moving_mean[i] = rng.uniform(0.0, 0.2);
      block.norm->moving_variance[i] = rng.uniform(0.01, 0.5);
      block.norm->gamma[i] = rng.uniform(0.5, 1.5);
      block.norm->beta[i] = rng.uniform(-0.2, 0.2);
    }
  }
  const auto r = grad_check(model, random_batch(4, 5), {0, 1, 2, 1}, Mode::kInference, "head/");
  EXPECT_EQ(r.checked, model.head().parameter_count());
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(GradientTest, HeadMatchesFiniteDifferencesWithBatchStatistics) {
  ClassifierSpec spec = stub_spec(4, {6, 5}, 3, FreezePolicy::kFreezeAllBackbone);
  spec.head.dropout_rate = 0.0;
  auto model = build_classifier(spec, nullptr, 22);
  const auto r = grad_check(model, random_batch(6, 6), {0, 1, 2, 1, 0, 2}, Mode::kTraining, "head/");
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(GradientTest, BackboneMatchesFiniteDifferences) {
  ClassifierSpec spec = stub_spec(3, {4}, 2, FreezePolicy::kTrainAll);
  auto model = build_classifier(spec, nullptr, 23);
  const auto r = grad_check(model, random_batch(2, 7), {0, 1}, Mode::kInference, "backbone/");
  EXPECT_EQ(r.checked, model.count_parameters().trainable - model.head().parameter_count());
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(OptimizerTest, FrozenParametersUntouched) {
  for (auto kind : {OptimizerKind::kAdam, OptimizerKind::kSgd, OptimizerKind::kRmsprop,
                    OptimizerKind::kNadam}) {
    auto model = build_classifier(stub_spec(4, {5}, 3, FreezePolicy::kFreezeAllBackbone), nullptr, 1);
    const auto before = model.backbone().layers();
    const auto head_before = model.head().output().weight;
    const auto batch = random_batch(3, 9);
    const std::vector<std::size_t> labels = {0, 2, 1};
    Optimizer opt(kind, 1e-2);
    double first_loss = 0.0, last_loss = 0.0;
    for (int step = 0; step < 20; ++step) {
      ForwardPass pass;
      const Matrix probs = model.forward(batch, Mode::kInference, nullptr, &pass);
      (step == 0 ? first_loss : last_loss) = cross_entropy(probs, labels);
      opt.step(model.parameters(), model.backward(pass, cross_entropy_grad(probs, labels)));
    }
    for (std::size_t i = 0; i < before.size(); ++i) {
      EXPECT_EQ(model.backbone().layers()[i].weight, before[i].weight);
      EXPECT_EQ(model.backbone().layers()[i].bias, before[i].bias);
    }
    EXPECT_NE(model.head().output().weight, head_before) << to_string(kind);
    EXPECT_LT(last_loss, first_loss) << to_string(kind);
  }
}

TEST(OptimizerTest, ZeroLearningRateIsNoOp) {
  auto model = build_classifier(stub_spec(4, {5}, 3, FreezePolicy::kTrainAll), nullptr, 1);
  const auto before = model.head().output().weight;
  const auto conv_before = model.backbone().layers()[0].weight;
  const auto batch = random_batch(2, 10);
  ForwardPass pass;
  const Matrix probs = model.forward(batch, Mode::kInference, nullptr, &pass);
  Optimizer opt(OptimizerKind::kAdam, 0.0);
  opt.step(model.parameters(), model.backward(pass, cross_entropy_grad(probs, {0, 1})));
  EXPECT_EQ(model.head().output().weight, before);
  EXPECT_EQ(model.backbone().layers()[0].weight, conv_before);
  EXPECT_THROW(Optimizer(OptimizerKind::kSgd, -1.0), std::invalid_argument);
  EXPECT_EQ(parse_optimizer("nadam"), OptimizerKind::kNadam);
  EXPECT_FALSE(parse_optimizer("adagrad").has_value());
}

}  // namespace
}  // namespace knitpat
