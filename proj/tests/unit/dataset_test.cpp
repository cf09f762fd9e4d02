#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "knitpat/dataset/class_weights.hpp"
#include "knitpat/dataset/manifest.hpp"
#include "knitpat/dataset/split.hpp"
#include "test_util.hpp"

namespace knitpat {
namespace {

using testing::TempDir;
using testing::touch;

DatasetManifest synthetic_manifest(const std::vector<std::size_t>& per_class) {
  std::vector<ImageSample> samples;
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    for (std::size_t i = 0; i < per_class[c]; ++i) {
      samples.push_back({std::string(kClassNames[c]) + "/img_" + std::to_string(i) + ".png",
                         class_from_index(c), SampleSource::kSynthetic, Split::kUnassigned});
    }
  }
  return DatasetManifest(std::move(samples));
}

// Integer largest-remainder allocation for ratios given in whole percent.
SplitSizes percent_oracle(std::size_t n, std::array<std::size_t, 3> pct) {
  SplitSizes sizes{};
  std::array<std::size_t, 3> rem{};
  std::size_t used = 0;
  for (int i = 0; i < 3; ++i) {
    sizes[i] = n * pct[i] / 100;
    rem[i] = n * pct[i] % 100;
    used += sizes[i];
  }
  std::array<int, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
  for (int k = 0; used < n; ++k, ++used) ++sizes[order[k]];
  return sizes;
}

TEST(ClassLabelTest, IndexIsBijection) {
  std::set<std::string_view> names;
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    const ClassLabel label = class_from_index(i);
    EXPECT_EQ(class_index(label), i);
    EXPECT_EQ(parse_class_label(class_name(label)), label);
    names.insert(class_name(label));
  }
  EXPECT_EQ(names.size(), kNumClasses);
  EXPECT_THROW(class_from_index(7), std::out_of_range);
  EXPECT_FALSE(parse_class_label("ribbing").has_value());
}

TEST(ManifestTest, RejectsDuplicatePaths) {
  std::vector<ImageSample> s = {{"a.png", ClassLabel::kCable, SampleSource::kReal, Split::kUnassigned},
                                {"a.png", ClassLabel::kMoss, SampleSource::kReal, Split::kUnassigned}};
  EXPECT_THROW(DatasetManifest{s}, DatasetError);
}

TEST(ScanCorpusTest, TalliesClassDirectories) {
  TempDir dir;
  touch(dir / "cable/a.png");
  touch(dir / "cable/b.jpg");
  touch(dir / "moss/c.png");
  touch(dir / "moss/notes.txt");
  const auto m = scan_corpus(dir.path());
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m.class_counts()[class_index(ClassLabel::kCable)], 2u);
  EXPECT_EQ(m.class_counts()[class_index(ClassLabel::kMoss)], 1u);
  EXPECT_EQ(m.samples()[0].path, "cable/a.png");
  EXPECT_EQ(m.samples()[2].path, "moss/c.png");
  for (const auto& s : m.samples()) EXPECT_EQ(s.split, Split::kUnassigned);
}

TEST(ScanCorpusTest, SourceSubdirectories) {
  TempDir dir;
  touch(dir / "tuck/real/a.png");
  touch(dir / "tuck/synthetic/b.png");
  touch(dir / "tuck/scraped/c.jpeg");
  touch(dir / "tuck/d.png");
  const auto m = scan_corpus(dir.path());
  ASSERT_EQ(m.size(), 4u);
  EXPECT_EQ(m.samples()[0].path, "tuck/d.png");
  EXPECT_EQ(m.samples()[0].source, SampleSource::kReal);
  EXPECT_EQ(m.samples()[1].source, SampleSource::kReal);
  EXPECT_EQ(m.samples()[2].source, SampleSource::kScraped);
  EXPECT_EQ(m.samples()[3].source, SampleSource::kSynthetic);
}

TEST(ScanCorpusTest, UnknownClassDirectoryIsNamed) {
  TempDir dir;
  touch(dir / "cable/a.png");
  touch(dir / "ribbing/b.png");
  try {
    scan_corpus(dir.path());
    FAIL() << "expected DatasetError";
  } catch (const DatasetError& e) {
    EXPECT_NE(std::string(e.what()).find("ribbing"), std::string::npos);
  }
}

TEST(ScanCorpusTest, EmptyCorpusIsError) {
  TempDir dir;
  std::filesystem::create_directories(dir / "cable");
  EXPECT_THROW(scan_corpus(dir.path()), DatasetError);
}

TEST(ManifestIoTest, ScanWriteLoadIsIdentity) {
  TempDir dir;
  touch(dir / "cable/a.png");
  touch(dir / "cable/with,comma.png");
  touch(dir / "mesh/synthetic/c.png");
  const auto scanned = scan_corpus(dir.path());
  write_manifest(scanned, dir / "manifest.csv");
  const auto loaded = load_manifest(dir / "manifest.csv");
  EXPECT_EQ(loaded, scanned);
  EXPECT_EQ(loaded.class_counts(), scanned.class_counts());
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest.meta.json"));

  const auto first = testing::slurp(dir / "manifest.csv");
  EXPECT_EQ(first.rfind("path,label,source,split\n", 0), 0u);
  EXPECT_EQ(first.find('\r'), std::string::npos);
  write_manifest(load_manifest(dir / "manifest.csv"), dir / "manifest.csv");
  EXPECT_EQ(testing::slurp(dir / "manifest.csv"), first);
}

TEST(ManifestIoTest, PathsRebasedToManifestDirectory) {
  TempDir dir;
  touch(dir / "corpus/diamond/a.png");
  touch(dir / "corpus/diamond/b.png");
  const auto scanned = scan_corpus(dir / "corpus");
  write_manifest(scanned, dir / "meta/out/manifest.csv");
  const auto loaded = load_manifest(dir / "meta/out/manifest.csv");
  EXPECT_EQ(loaded.samples()[0].path, "../../corpus/diamond/a.png");
  EXPECT_TRUE(std::filesystem::exists(loaded.resolve(loaded.samples()[0])));
}

TEST(ManifestIoTest, MetadataCountMismatchDetected) {
  TempDir dir;
  touch(dir / "cable/a.png");
  write_manifest(scan_corpus(dir.path()), dir / "m.csv");
  std::ofstream(dir / "m.csv", std::ios::app) << "cable/extra.png,cable,real,unassigned\n";
  EXPECT_THROW(load_manifest(dir / "m.csv"), DatasetError);
}

TEST(ManifestIoTest, BadLabelReportsLine) {
  TempDir dir;
  std::ofstream(dir / "m.csv") << "path,label,source,split\na.png,ribbing,real,train\n";
  try {
    load_manifest(dir / "m.csv");
    FAIL();
  } catch (const DatasetError& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos);
  }
}

TEST(AllocateSplitTest, ExactRatios) {
  EXPECT_EQ(allocate_split(100, {}), (SplitSizes{70, 20, 10}));
  EXPECT_EQ(allocate_split(10, {}), (SplitSizes{7, 2, 1}));
  EXPECT_EQ(allocate_split(3, {}), (SplitSizes{2, 1, 0}));
}

TEST(AllocateSplitTest, MatchesIntegerOracle) {
  for (std::size_t n = 0; n <= 5000; ++n) {
    ASSERT_EQ(allocate_split(n, {}), percent_oracle(n, {70, 20, 10})) << n;
    ASSERT_EQ(allocate_split(n, {0.8, 0.1, 0.1}), percent_oracle(n, {80, 10, 10})) << n;
  }
}

TEST(StratifiedSplitTest, FullCorpusGoldenTotals) {
  // Synthetic 13,235-image class distribution; per-class sizes come from the
  // integer oracle above and totals were frozen from it.
  const std::vector<std::size_t> counts = {2911, 2406, 1873, 1795, 1604, 1490, 1156};
  const auto m = stratified_split(synthetic_manifest(counts), {}, 42);
  EXPECT_EQ(m.size(), 13235u);
  EXPECT_EQ(m.indices_in(Split::kTrain).size(), 9265u);
  EXPECT_EQ(m.indices_in(Split::kVal).size(), 2647u);
  EXPECT_EQ(m.indices_in(Split::kTest).size(), 1323u);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto expect = percent_oracle(counts[c], {70, 20, 10});
    EXPECT_EQ(m.class_counts_in(Split::kTrain)[c], expect[0]);
    EXPECT_EQ(m.class_counts_in(Split::kVal)[c], expect[1]);
    EXPECT_EQ(m.class_counts_in(Split::kTest)[c], expect[2]);
  }
}

TEST(StratifiedSplitTest, DeterministicAndSeedSensitive) {
  const auto base = synthetic_manifest({40, 33, 10, 100, 3, 17, 9});
  const auto a = stratified_split(base, {}, 7);
  const auto b = stratified_split(base, {}, 7);
  const auto c = stratified_split(base, {}, 8);
  EXPECT_EQ(a, b);
  EXPECT_EQ(stratified_split(a, {}, 7), a);  // idempotent
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    any_diff |= a.samples()[i].split != c.samples()[i].split;
  }
  EXPECT_TRUE(any_diff);
  for (auto s : {Split::kTrain, Split::kVal, Split::kTest}) {
    EXPECT_EQ(a.class_counts_in(s), c.class_counts_in(s));
  }
}

TEST(StratifiedSplitTest, PartitionCoversManifest) {
  const auto m = stratified_split(synthetic_manifest({12, 0, 30, 5, 0, 9, 4}), {}, 1);
  EXPECT_EQ(m.indices_in(Split::kUnassigned).size(), 0u);
  EXPECT_EQ(m.indices_in(Split::kTrain).size() + m.indices_in(Split::kVal).size() +
                m.indices_in(Split::kTest).size(),
            m.size());
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (m.class_counts()[c] == 0) continue;
    EXPECT_GT(m.class_counts_in(Split::kTrain)[c], 0u);
  }
}

TEST(StratifiedSplitTest, TooSmallClassNamed) {
  try {
    stratified_split(synthetic_manifest({10, 2}), {}, 0);
    FAIL();
  } catch (const DatasetError& e) {
    EXPECT_NE(std::string(e.what()).find("cable"), std::string::npos);
  }
  EXPECT_THROW(stratified_split(synthetic_manifest({10}), {0.7, 0.2, 0.2}, 0), DatasetError);
}

TEST(ClassWeightsTest, Examples) {
  const std::vector<std::size_t> equal(7, 25);
  const auto balanced = balanced_class_weights(equal);
  for (double w : balanced.values()) EXPECT_EQ(w, 1.0);

  const std::vector<std::size_t> counts = {100, 50, 50};
  const auto w = balanced_class_weights(counts);
  EXPECT_NEAR(w[0], 200.0 / 300.0, 1e-12);
  EXPECT_NEAR(w[1], 200.0 / 150.0, 1e-12);
  EXPECT_NEAR(w[2], 200.0 / 150.0, 1e-12);
  EXPECT_NEAR(100 * w[0] + 50 * w[1] + 50 * w[2], 200.0, 1e-9);

  const std::vector<std::size_t> ones = {1, 1};
  EXPECT_EQ(balanced_class_weights(ones).values(), (std::vector<double>{1.0, 1.0}));
}

TEST(ClassWeightsTest, IdentityHoldsForRandomCounts) {
  std::mt19937_64 gen(123);
  std::uniform_int_distribution<std::size_t> k_dist(2, 12), n_dist(1, 100000);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::size_t> counts(k_dist(gen));
    for (auto& n : counts) n = n_dist(gen);
    const auto w = balanced_class_weights(counts);
    double weighted = 0.0;
    std::size_t total = 0;
    for (std::size_t c = 0; c < counts.size(); ++c) {
      ASSERT_GT(w[c], 0.0);
      weighted += static_cast<double>(counts[c]) * w[c];
      total += counts[c];
    }
    ASSERT_NEAR(weighted / static_cast<double>(total), 1.0, 1e-9);
  }
}

TEST(ClassWeightsTest, ManifestTrainingSplitOnly) {
  const auto m = stratified_split(synthetic_manifest({100, 50, 50, 10, 10, 10, 20}), {}, 3);
  const auto w = compute_class_weights(m);
  const auto train = m.class_counts_in(Split::kTrain);
  double total = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) total += static_cast<double>(train[c]) * w[c];
  EXPECT_NEAR(total, static_cast<double>(m.indices_in(Split::kTrain).size()), 1e-9);
  EXPECT_THROW(compute_class_weights(synthetic_manifest({100, 50})), DatasetError);
}

}  // namespace
}  // namespace knitpat
