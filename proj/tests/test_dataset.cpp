#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "noisylab/dataset.hpp"
#include "noisylab/rng.hpp"
#include "oracles.hpp"

using namespace noisylab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("noisylab_data_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<unsigned char> be32(uint32_t v) {
  return {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
}

void append(std::vector<unsigned char>& dst, const std::vector<unsigned char>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

// Minimal 2-image 1x2 IDX pair with pixel bytes {0, 255} and {128, 64}.
void write_tiny_idx(const TempDir& dir) {
  std::vector<unsigned char> img;
  append(img, be32(0x00000803));
  append(img, be32(2));  // images
  append(img, be32(1));  // rows
  append(img, be32(2));  // cols
  img.push_back(0);
  img.push_back(255);
  img.push_back(128);
  img.push_back(64);
  write_bytes(dir.file("imgs"), img);

  std::vector<unsigned char> lab;
  append(lab, be32(0x00000801));
  append(lab, be32(2));
  lab.push_back(3);
  lab.push_back(7);
  write_bytes(dir.file("labs"), lab);
}

}  // namespace

TEST_CASE("IDX parser reads a hand-built pair with exact scaling") {
  TempDir dir;
  write_tiny_idx(dir);
  const Dataset ds = load_mnist_idx(dir.file("imgs"), dir.file("labs"));
  REQUIRE(ds.size() == 2);
  REQUIRE(ds.dim() == 2);
  CHECK(ds.features(0, 0) == 0.0);
  CHECK(ds.features(0, 1) == 1.0);
  CHECK(ds.features(1, 0) == doctest::Approx(128.0 / 255.0));
  CHECK(ds.labels[0] == 3);
  CHECK(ds.labels[1] == 7);
}

TEST_CASE("IDX parser rejects the wrong magic kind") {
  TempDir dir;
  write_tiny_idx(dir);
  // Labels file carrying the images magic 0x00000803.
  std::vector<unsigned char> bad;
  append(bad, be32(0x00000803));
  append(bad, be32(2));
  bad.push_back(1);
  bad.push_back(2);
  write_bytes(dir.file("badlabs"), bad);
  CHECK_THROWS_WITH_AS(load_mnist_idx(dir.file("imgs"), dir.file("badlabs")),
                       doctest::Contains("malformed magic"), std::runtime_error);
}

TEST_CASE("IDX parser reports truncation with a byte offset") {
  TempDir dir;
  std::vector<unsigned char> img;
  append(img, be32(0x00000803));
  append(img, be32(2));
  append(img, be32(1));
  append(img, be32(2));
  img.push_back(9);  // 1 of 4 payload bytes
  write_bytes(dir.file("imgs"), img);
  std::vector<unsigned char> lab;
  append(lab, be32(0x00000801));
  append(lab, be32(2));
  lab.push_back(0);
  lab.push_back(1);
  write_bytes(dir.file("labs"), lab);
  CHECK_THROWS_WITH_AS(load_mnist_idx(dir.file("imgs"), dir.file("labs")),
                       doctest::Contains("byte offset"), std::runtime_error);
}

TEST_CASE("IDX parser rejects image/label count mismatch") {
  TempDir dir;
  write_tiny_idx(dir);
  std::vector<unsigned char> lab;
  append(lab, be32(0x00000801));
  append(lab, be32(3));
  lab.push_back(0);
  lab.push_back(1);
  lab.push_back(2);
  write_bytes(dir.file("labs3"), lab);
  CHECK_THROWS_WITH_AS(load_mnist_idx(dir.file("imgs"), dir.file("labs3")),
                       doctest::Contains("count mismatch"), std::runtime_error);
}

TEST_CASE("IDX round-trip preserves features and labels exactly") {
  TempDir dir;
  rng::Engine gen(99);
  Dataset ds;
  ds.features = Matrix(37, 12);
  ds.labels.resize(37);
  ds.num_classes = 10;
  for (double& v : ds.features.flat()) {
    v = static_cast<double>(rng::bounded(gen, 256)) / 255.0;
  }
  for (int& l : ds.labels) l = static_cast<int>(rng::bounded(gen, 10));

  save_mnist_idx(ds, dir.file("imgs"), dir.file("labs"), 3, 4);
  const Dataset back = load_mnist_idx(dir.file("imgs"), dir.file("labs"));
  REQUIRE(back.size() == ds.size());
  REQUIRE(back.dim() == ds.dim());
  for (size_t i = 0; i < ds.features.size(); ++i) {
    CHECK(back.features.data()[i] == ds.features.data()[i]);
  }
  CHECK(back.labels == ds.labels);
}

TEST_CASE("blobs are deterministic bit-for-bit") {
  const Dataset a = make_blobs(100, 3, 2, 0.1, 1);
  const Dataset b = make_blobs(100, 3, 2, 0.1, 1);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.features.size(); ++i) {
    CHECK(a.features.data()[i] == b.features.data()[i]);
  }
  CHECK(a.labels == b.labels);

  const Dataset c = make_blobs(100, 3, 2, 0.1, 2);
  bool all_equal = true;
  for (size_t i = 0; i < a.features.size(); ++i) {
    all_equal = all_equal && a.features.data()[i] == c.features.data()[i];
  }
  CHECK_FALSE(all_equal);
}

TEST_CASE("blobs centers keep pairwise distance >= 2") {
  for (int classes : {2, 3, 4, 7}) {
    const Dataset ds = make_blobs(200, classes, 3, 1e-6, 5);
    // With negligible spread each sample sits at its center.
    for (int a = 0; a < classes; ++a) {
      for (int b = a + 1; b < classes; ++b) {
        double d2 = 0.0;
        for (int k = 0; k < ds.dim(); ++k) {
          const double diff = ds.features(a * 200, k) - ds.features(b * 200, k);
          d2 += diff * diff;
        }
        CHECK(std::sqrt(d2) >= 2.0 - 1e-4);
      }
    }
  }
}

TEST_CASE("blobs are linearly separable per the softmax-regression oracle") {
  const Dataset ds = make_blobs(100, 3, 2, 0.1, 1);
  oracles::SoftmaxRegression reg;
  reg.fit(ds.features, ds.labels, ds.num_classes, 2000, 0.5);
  CHECK(reg.train_accuracy(ds.features, ds.labels) >= 0.99);
}

TEST_CASE("blobs rejects zero spread") {
  CHECK_THROWS_AS(make_blobs(10, 3, 2, 0.0, 1), std::invalid_argument);
}

TEST_CASE("split produces the paper-style 50k/10k partition from 60k") {
  rng::Engine gen(4);
  Dataset ds;
  ds.num_classes = 10;
  ds.features = Matrix(60000, 2);
  ds.labels.resize(60000);
  for (int i = 0; i < 60000; ++i) {
    ds.labels[i] = static_cast<int>(rng::bounded(gen, 10));
    ds.features(i, 0) = i;
    ds.features(i, 1) = ds.labels[i];
  }
  const auto [train, test] = split(ds, 5.0 / 6.0, 17);
  CHECK(train.size() == 50000);
  CHECK(test.size() == 10000);
  CHECK(train.split_tag == SplitTag::train);
  CHECK(test.split_tag == SplitTag::test);

  // Stratification: per-class share within +/-2% of the overall fraction.
  std::vector<int> total(10, 0), in_train(10, 0);
  for (int l : ds.labels) total[l] += 1;
  for (int l : train.labels) in_train[l] += 1;
  for (int c = 0; c < 10; ++c) {
    CHECK(std::abs(static_cast<double>(in_train[c]) / total[c] - 5.0 / 6.0) <= 0.02);
  }
}

TEST_CASE("split is a deterministic partition") {
  const Dataset ds = make_blobs(50, 4, 2, 0.2, 3);
  const auto [a_train, a_test] = split(ds, 0.75, 9);
  const auto [b_train, b_test] = split(ds, 0.75, 9);
  CHECK(a_train.labels == b_train.labels);
  for (size_t i = 0; i < a_train.features.size(); ++i) {
    CHECK(a_train.features.data()[i] == b_train.features.data()[i]);
  }

  // Partition: every original row appears exactly once across the splits.
  // Feature column 0 values are unique enough to act as row identities.
  std::vector<double> seen;
  for (int i = 0; i < a_train.size(); ++i) seen.push_back(a_train.features(i, 0));
  for (int i = 0; i < a_test.size(); ++i) seen.push_back(a_test.features(i, 0));
  std::vector<double> original;
  for (int i = 0; i < ds.size(); ++i) original.push_back(ds.features(i, 0));
  std::sort(seen.begin(), seen.end());
  std::sort(original.begin(), original.end());
  CHECK(seen == original);
}

TEST_CASE("split rejects fractions that would empty a side") {
  const Dataset ds = make_blobs(5, 2, 2, 0.2, 3);
  CHECK_THROWS_AS(split(ds, 1.5, 1), std::invalid_argument);
  CHECK_THROWS_AS(split(ds, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(split(ds, 0.01, 1), std::invalid_argument);  // rounds to empty train
}

TEST_CASE("dataset validation catches bad labels and non-finite features") {
  Dataset ds = make_blobs(5, 2, 2, 0.2, 3);
  ds.validate();
  Dataset bad = ds;
  bad.labels[0] = 9;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ds;
  bad.features(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
