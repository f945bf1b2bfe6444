#include "dage/dataset.hpp"
#include "dage/error.hpp"
#include "dage/idx.hpp"
#include "dage/sampling.hpp"
#include "test_helpers.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include <unistd.h>

using namespace dage;
using namespace dage::data;

namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("dage-data-" + std::to_string(::getpid()) + "-" +
                                                 std::to_string(counter_++))) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

IdxArray images3() {
  IdxArray a;
  a.type = 0x08;
  a.dims = {3, 4, 4};
  for (int i = 0; i < 48; ++i) a.values.push_back((i * 37) % 256);
  return a;
}

IdxArray labels(std::vector<double> v) {
  IdxArray a;
  a.dims = {static_cast<std::uint32_t>(v.size())};
  a.values = std::move(v);
  return a;
}

// Labelled dataset with `per_class` samples of each of k classes in 2D.
Dataset toy(int k, int per_class, DomainTag domain = DomainTag::Target) {
  Dataset ds;
  ds.name = "toy";
  ds.num_classes = k;
  ds.shape = {1, 1, 2};
  ds.domain = domain;
  ds.features.resize(2, k * per_class);
  for (int c = 0; c < k; ++c) {
    for (int i = 0; i < per_class; ++i) {
      ds.features.col(c * per_class + i) << c, i;
      ds.labels.push_back(c);
    }
  }
  return ds;
}

Dataset from_labels(const std::vector<int>& y) {
  Dataset ds;
  ds.num_classes = *std::max_element(y.begin(), y.end()) + 1;
  ds.shape = {1, 1, 1};
  ds.features = Matrix::Zero(1, static_cast<Eigen::Index>(y.size()));
  ds.labels = y;
  return ds;
}

std::pair<Matrix, int> nearest_mean(const Dataset& train) {
  Matrix means = Matrix::Zero(train.features.rows(), train.num_classes);
  const auto counts = train.class_counts();
  for (std::size_t i = 0; i < train.size(); ++i) means.col(train.labels[i]) += train.features.col(static_cast<Eigen::Index>(i));
  for (int k = 0; k < train.num_classes; ++k) means.col(k) /= static_cast<double>(counts[static_cast<std::size_t>(k)]);
  return {means, train.num_classes};
}

double accuracy(const Matrix& means, const Dataset& ds) {
  int hits = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    Eigen::Index best = 0;
    (means.colwise() - ds.features.col(static_cast<Eigen::Index>(i))).colwise().squaredNorm().minCoeff(&best);
    hits += best == ds.labels[i];
  }
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

}  // namespace

// --- IDX ---------------------------------------------------------------------

TEST(Idx, ThreeImageRoundTrip) {
  TempDir dir;
  write_idx(dir / "img.idx", images3());
  write_idx(dir / "lab.idx", labels({0, 2, 1}));
  const IdxArray raw = read_idx(dir / "img.idx");
  EXPECT_EQ(raw.dims, images3().dims);
  EXPECT_EQ(raw.values, images3().values);

  const Dataset ds = load_idx(dir / "img.idx", dir / "lab.idx", {.target_side = 0, .num_classes = 3});
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.shape, (nn::Shape{1, 4, 4}));
  EXPECT_EQ(ds.labels, (std::vector<int>{0, 2, 1}));
  for (int i = 0; i < 48; ++i) EXPECT_DOUBLE_EQ(ds.features(i % 16, i / 16), images3().values[i] / 255.0);
  EXPECT_GE(ds.features.minCoeff(), 0.0);
  EXPECT_LE(ds.features.maxCoeff(), 1.0);
  EXPECT_EQ(ds.class_counts(), (std::vector<std::size_t>{1, 1, 1}));
}

TEST(Idx, TruncatedFileNamesOffset) {
  TempDir dir;
  write_idx(dir / "img.idx", images3());
  fs::resize_file(dir / "img.idx", 16 + 20);
  try {
    read_idx(dir / "img.idx");
    FAIL() << "truncated IDX file accepted";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("offset 36"), std::string::npos) << e.what();
  }
  fs::resize_file(dir / "img.idx", 6);
  EXPECT_THROW(read_idx(dir / "img.idx"), ParseError);
}

TEST(Idx, BadMagicAndMismatch) {
  TempDir dir;
  {
    std::ofstream f(dir / "bad.idx", std::ios::binary);
    f.write("\x01\x02\x08\x01\x00\x00\x00\x01\x05", 9);
  }
  EXPECT_THROW(read_idx(dir / "bad.idx"), ParseError);
  write_idx(dir / "img.idx", images3());
  write_idx(dir / "lab.idx", labels({0, 1}));
  EXPECT_THROW(load_idx(dir / "img.idx", dir / "lab.idx"), DimensionError);
  // An image file where labels belong.
  EXPECT_THROW(load_idx(dir / "img.idx", dir / "img.idx"), ParseError);
}

TEST(Idx, FloatFeaturesRoundTrip) {
  TempDir dir;
  const DomainPair d = synth_shift(3, 2, 5, {}, 1);
  save_idx(d.source, dir / "f.idx", dir / "l.idx");
  EXPECT_EQ(read_idx(dir / "f.idx").type, 0x0E);
  const Dataset back = load_idx(dir / "f.idx", dir / "l.idx", {.num_classes = 2});
  EXPECT_EQ(back.features, d.source.features);
  EXPECT_EQ(back.labels, d.source.labels);
}

TEST(Idx, BilinearResize) {
  const std::vector<double> img{0, 1, 0, 1};
  const auto up = resize_bilinear(img, 2, 4);
  const std::vector<double> row{0, 0.25, 0.75, 1};
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) EXPECT_DOUBLE_EQ(up[static_cast<std::size_t>(y * 4 + x)], row[static_cast<std::size_t>(x)]);
  }
  const std::vector<double> flat(16 * 16, 0.3);
  for (double v : resize_bilinear(flat, 16, 28)) EXPECT_NEAR(v, 0.3, 1e-15);
  const IdxArray three = images3();
  const std::vector<double> img4(three.values.begin(), three.values.begin() + 16);
  EXPECT_EQ(resize_bilinear(img4, 4, 4), img4);
  EXPECT_THROW(resize_bilinear(img, 3, 4), DimensionError);
}

TEST(Idx, ResizeOnLoad) {
  TempDir dir;
  write_idx(dir / "img.idx", images3());
  write_idx(dir / "lab.idx", labels({0, 2, 1}));
  const Dataset ds = load_idx(dir / "img.idx", dir / "lab.idx", {.target_side = 28, .num_classes = 3});
  EXPECT_EQ(ds.shape, (nn::Shape{1, 28, 28}));
  EXPECT_EQ(ds.features.rows(), 784);
  const Dataset padded =
      load_idx(dir / "img.idx", dir / "lab.idx", {.target_side = 8, .resize = Resize::Pad, .num_classes = 3});
  EXPECT_EQ(padded.features(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(padded.features(2 * 8 + 2, 1), images3().values[16] / 255.0);
}

TEST(Idx, PadCenter) {
  const auto p = pad_center(std::vector<double>{1, 2, 3, 4}, 2, 4);
  const std::vector<double> want{0, 0, 0, 0, 0, 1, 2, 0, 0, 3, 4, 0, 0, 0, 0, 0};
  EXPECT_EQ(p, want);
  EXPECT_THROW(pad_center(std::vector<double>{1, 2, 3, 4}, 2, 1), ConfigError);
}

TEST(Manifest, ChecksumVerified) {
  TempDir dir;
  write_idx(dir / "img.idx", images3());
  write_idx(dir / "lab.idx", labels({0, 2, 1}));
  Manifest m;
  m.entries = {{"name", "tiny"}, {"images", "img.idx"}, {"labels", "lab.idx"}, {"classes", "3"},
               {"checksum", file_checksum(dir / "img.idx")}};
  write_manifest(dir / "tiny.manifest", m);
  const Manifest back = read_manifest(dir / "tiny.manifest");
  EXPECT_EQ(back.entries, m.entries);
  EXPECT_EQ(load_manifest(dir / "tiny.manifest").size(), 3u);

  IdxArray other = images3();
  other.values[5] = 1;
  write_idx(dir / "img.idx", other);
  EXPECT_THROW(load_manifest(dir / "tiny.manifest"), ConfigError);
  EXPECT_THROW(read_manifest(dir / "absent.manifest"), ConfigError);
}

TEST(Manifest, OptionalMnistFile) {
  const char* root = std::getenv("DAGE_DATA_ROOT");
  const fs::path p = fs::path(root ? root : "data") / "mnist-train.manifest";
  if (!fs::exists(p)) GTEST_SKIP() << "no MNIST training manifest under " << p.parent_path();
  const Dataset ds = load_manifest(p);
  EXPECT_EQ(ds.shape, (nn::Shape{1, 28, 28}));
  EXPECT_EQ(*std::max_element(ds.labels.begin(), ds.labels.end()), 9);
  if (ds.size() != 60000) GTEST_SKIP() << "manifest holds a " << ds.size() << "-image subset";
}

// --- synthetic shift ------------------------------------------------------------

TEST(SynthShift, IdentityShift) {
  EXPECT_TRUE(ShiftConfig{}.is_identity());
  const DomainPair d = synth_shift(200, 3, 4, {}, 5);
  EXPECT_EQ(d.source.size(), 600u);
  EXPECT_EQ(d.source.domain, DomainTag::Source);
  EXPECT_EQ(d.target.domain, DomainTag::Target);
  const double tol = 4.0 / std::sqrt(200.0) * std::sqrt(2.0);
  for (int k = 0; k < 3; ++k) {
    Vector ms = Vector::Zero(4), mt = Vector::Zero(4);
    for (std::size_t i = 0; i < 600; ++i) {
      if (d.source.labels[i] == k) ms += d.source.features.col(static_cast<Eigen::Index>(i)) / 200.0;
      if (d.target.labels[i] == k) mt += d.target.features.col(static_cast<Eigen::Index>(i)) / 200.0;
    }
    EXPECT_LE((ms - mt).cwiseAbs().maxCoeff(), tol);
  }
}

TEST(SynthShift, Translation) {
  ShiftConfig shift;
  shift.translation = {10, 0, 0};
  const int n = 400;
  const DomainPair d = synth_shift(n, 2, 3, shift, 6);
  const Matrix mu = blob_means(2, 3, shift.class_radius);
  for (int k = 0; k < 2; ++k) {
    Vector ms = Vector::Zero(3), mt = Vector::Zero(3);
    for (std::size_t i = 0; i < d.source.size(); ++i) {
      if (d.source.labels[i] == k) ms += d.source.features.col(static_cast<Eigen::Index>(i)) / n;
      if (d.target.labels[i] == k) mt += d.target.features.col(static_cast<Eigen::Index>(i)) / n;
    }
    const Vector expected = (Vector(3) << 10, 0, 0).finished();
    EXPECT_LE((mt - ms - expected).cwiseAbs().maxCoeff(), 4.0 * shift.noise_std / std::sqrt(n) * std::sqrt(2.0));
    EXPECT_LE((ms - mu.col(k)).cwiseAbs().maxCoeff(), 4.0 * shift.noise_std / std::sqrt(n));
  }
}

TEST(SynthShift, Deterministic) {
  ShiftConfig shift;
  shift.rotation = 0.7;
  const DomainPair a = synth_shift(5, 3, 3, shift, 9);
  const DomainPair b = synth_shift(5, 3, 3, shift, 9);
  EXPECT_EQ(a.target.features, b.target.features);
  EXPECT_EQ(a.source.labels, b.source.labels);
  EXPECT_NE(synth_shift(5, 3, 3, shift, 10).source.features, a.source.features);
}

TEST(SynthShift, IdentityShiftClassifierTransfers) {
  // A source-trained classifier scores alike on source-test and target-test.
  double gap = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ShiftConfig shift;
    shift.noise_std = 2.0;
    const DomainPair d = synth_shift(150, 4, 2, shift, seed);
    const Split s = sample_protocol(d.source, {50, seed});
    const auto [means, k] = nearest_mean(s.train);
    gap += accuracy(means, s.test) - accuracy(means, d.target);
  }
  // 5 seeds x (400 + 600) Bernoulli trials: the mean gap stays within a few standard errors.
  EXPECT_LE(std::abs(gap / 5.0), 0.03);
}

// --- split protocol -------------------------------------------------------------

TEST(SampleProtocol, ExactCountsAndDisjoint) {
  const Dataset ds = toy(10, 20);
  const Split s = sample_protocol(ds, {3, 1});
  EXPECT_EQ(s.train.size(), 30u);
  EXPECT_EQ(s.train.class_counts(), std::vector<std::size_t>(10, 3));
  EXPECT_EQ(s.test.size(), 170u);
  std::set<std::pair<double, double>> seen;
  for (const Dataset* part : {&s.train, &s.test}) {
    for (Eigen::Index i = 0; i < part->features.cols(); ++i) {
      EXPECT_TRUE(seen.insert({part->features(0, i), part->features(1, i)}).second);
    }
  }
  EXPECT_EQ(seen.size(), ds.size());
}

TEST(SampleProtocol, FullClassIsAnError) {
  const Dataset ds = toy(3, 3);
  EXPECT_THROW(sample_protocol(ds, {3, 1}), ConfigError);
  EXPECT_NO_THROW(sample_protocol(ds, {3, 1}, false));
  EXPECT_THROW(sample_protocol(ds, {4, 1}, false), ConfigError);
}

TEST(SampleProtocol, Seeds) {
  const Dataset ds = toy(10, 50);
  const SplitPlan a(ds, {3, 1}), b(ds, {3, 1}), c(ds, {3, 2});
  EXPECT_EQ(a.train_indices(), b.train_indices());
  EXPECT_NE(a.train_indices(), c.train_indices());
  EXPECT_EQ(a.test(ds).size(), 470u);
  EXPECT_THROW(a.train(toy(10, 49)), DimensionError);
}

TEST(ValidationSplit, HoldsOutPerClass) {
  const Split s = validation_split(toy(4, 20), 0.1, 1, 3);
  EXPECT_EQ(s.test.class_counts(), std::vector<std::size_t>(4, 2));
  const Split small = validation_split(toy(4, 3), 0.1, 1, 3);
  EXPECT_EQ(small.test.class_counts(), std::vector<std::size_t>(4, 1));
  EXPECT_EQ(small.train.class_counts(), std::vector<std::size_t>(4, 2));
}

// --- pairs and batches ----------------------------------------------------------

TEST(MakePairs, TwoByTwo) {
  const PairBatch p = make_pairs(from_labels({0, 1}), from_labels({0, 1}), 3.0, 1);
  EXPECT_EQ(p.size(), 4u);
  EXPECT_EQ(p.positive_count(), 2u);
  EXPECT_EQ(p.negative_count(), 2u);
}

TEST(MakePairs, NegativeSubsampling) {
  // One positive pair among eleven.
  std::vector<int> ys(11, 1);
  ys[0] = 0;
  const PairBatch p = make_pairs(from_labels(ys), from_labels({0}), 3.0, 1);
  EXPECT_EQ(p.positive_count(), 1u);
  EXPECT_EQ(p.negative_count(), 3u);
  EXPECT_EQ(make_pairs(from_labels(ys), from_labels({0}), 0.0, 1).size(), 11u);
}

TEST(MakePairs, DisjointLabelsRejected) {
  EXPECT_THROW(make_pairs(from_labels({0, 1}), from_labels({2, 3}), 3.0, 1), ConfigError);
}

TEST(MakePairs, AlphaFlagsAndRatio) {
  test::Rng rng(4);
  for (int t = 0; t < 30; ++t) {
    const Dataset s = from_labels(test::random_labels(static_cast<std::size_t>(test::uniform_int(rng, 3, 30)), 4, rng));
    std::vector<int> yt = test::random_labels(static_cast<std::size_t>(test::uniform_int(rng, 1, 12)), 4, rng);
    yt.push_back(s.labels[0]);
    const Dataset tg = from_labels(yt);
    const double ratio = 1.0 + t % 4;
    const PairBatch p = make_pairs(s, tg, ratio, static_cast<std::uint64_t>(t));
    std::set<std::pair<std::size_t, std::size_t>> uniq;
    for (std::size_t i = 0; i < p.size(); ++i) {
      ASSERT_EQ(p.positive[i] != 0, s.labels[p.source[i]] == tg.labels[p.target[i]]);
      ASSERT_TRUE(uniq.insert({p.source[i], p.target[i]}).second);
    }
    ASSERT_LE(static_cast<double>(p.negative_count()), ratio * static_cast<double>(p.positive_count()));
  }
}

TEST(StratifiedBatches, EveryBatchHasTwoClasses) {
  const Dataset s = from_labels({0, 0, 1, 1, 2, 2});
  const Dataset t = from_labels({0, 1, 2, 0, 1, 2, 0, 1, 2});
  const PairBatch pairs = make_pairs(s, t, 0.0, 1);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (const PairBatch& b : stratified_batches(pairs, t.labels, 8, seed)) {
      std::set<int> classes;
      for (std::size_t j : b.target) classes.insert(t.labels[j]);
      ASSERT_GE(classes.size(), 2u);
    }
  }
}

TEST(StratifiedBatches, DeterministicPermutation) {
  const Dataset s = from_labels({0, 1, 2, 0, 1});
  const Dataset t = from_labels({0, 1, 2, 2});
  const PairBatch pairs = make_pairs(s, t, 0.0, 1);
  const auto a = stratified_batches(pairs, t.labels, 8, 3);
  const auto b = stratified_batches(pairs, t.labels, 8, 3);
  std::multiset<std::pair<std::size_t, std::size_t>> all, seen;
  for (std::size_t i = 0; i < pairs.size(); ++i) all.insert({pairs.source[i], pairs.target[i]});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].source, b[k].source);
    EXPECT_EQ(a[k].target, b[k].target);
    for (std::size_t i = 0; i < a[k].size(); ++i) seen.insert({a[k].source[i], a[k].target[i]});
  }
  EXPECT_EQ(seen, all);

  StratifiedBatches it(pairs, t.labels, 8, 3);
  std::size_t n = 0;
  while (auto batch = it.next()) n += batch->size();
  EXPECT_EQ(n, pairs.size());
  it.reset();
  EXPECT_EQ(it.epoch_index(), 1u);
  EXPECT_THROW(StratifiedBatches(pairs, t.labels, 1, 3), ConfigError);
}
