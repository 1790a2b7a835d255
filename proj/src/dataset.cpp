#include "noisylab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "noisylab/rng.hpp"

namespace noisylab {

namespace {

constexpr uint32_t kImagesMagic = 0x00000803;
constexpr uint32_t kLabelsMagic = 0x00000801;

[[noreturn]] void idx_error(const std::string& path, const std::string& what, uint64_t offset) {
  throw std::runtime_error(path + ": " + what + " at byte offset " + std::to_string(offset));
}

uint32_t read_be32(std::ifstream& in, const std::string& path, const char* field) {
  const uint64_t offset = static_cast<uint64_t>(in.tellg());
  unsigned char buf[4];
  if (!in.read(reinterpret_cast<char*>(buf), 4)) {
    idx_error(path, std::string("truncated file while reading ") + field, offset);
  }
  return (uint32_t(buf[0]) << 24) | (uint32_t(buf[1]) << 16) | (uint32_t(buf[2]) << 8) |
         uint32_t(buf[3]);
}

void write_be32(std::ofstream& out, uint32_t v) {
  const unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(buf), 4);
}

}  // namespace

void Dataset::validate() const {
  require(size() > 0, "Dataset: empty");
  require(dim() > 0, "Dataset: zero feature dimension");
  require(num_classes >= 2, "Dataset: fewer than 2 classes");
  require(static_cast<int>(labels.size()) == size(), "Dataset: label count mismatch");
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw std::invalid_argument("Dataset: label " + std::to_string(labels[i]) + " at index " +
                                  std::to_string(i) + " outside [0, " +
                                  std::to_string(num_classes) + ")");
    }
  }
  for (double v : features.flat()) {
    if (!std::isfinite(v)) throw std::invalid_argument("Dataset: non-finite feature value");
  }
}

Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error(images_path + ": cannot open");
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error(labels_path + ": cannot open");

  const uint32_t img_magic = read_be32(img, images_path, "magic");
  if (img_magic != kImagesMagic) {
    char hex[16];
    std::snprintf(hex, sizeof hex, "0x%08x", img_magic);
    idx_error(images_path, std::string("malformed magic ") + hex + " (expected 0x00000803)", 0);
  }
  const uint32_t count = read_be32(img, images_path, "image count");
  const uint32_t rows = read_be32(img, images_path, "row count");
  const uint32_t cols = read_be32(img, images_path, "column count");

  const uint32_t lab_magic = read_be32(lab, labels_path, "magic");
  if (lab_magic != kLabelsMagic) {
    char hex[16];
    std::snprintf(hex, sizeof hex, "0x%08x", lab_magic);
    idx_error(labels_path, std::string("malformed magic ") + hex + " (expected 0x00000801)", 0);
  }
  const uint32_t lab_count = read_be32(lab, labels_path, "label count");
  if (lab_count != count) {
    throw std::runtime_error(images_path + " / " + labels_path + ": image/label count mismatch (" +
                             std::to_string(count) + " vs " + std::to_string(lab_count) + ")");
  }
  if (count == 0 || rows == 0 || cols == 0) {
    throw std::runtime_error(images_path + ": zero-sized dimensions");
  }

  const size_t pixels = static_cast<size_t>(rows) * cols;
  Dataset ds;
  ds.features = Matrix(static_cast<int>(count), static_cast<int>(pixels));
  ds.labels.resize(count);
  ds.num_classes = 10;

  std::vector<unsigned char> buf(pixels);
  for (uint32_t i = 0; i < count; ++i) {
    const uint64_t offset = static_cast<uint64_t>(img.tellg());
    if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels))) {
      idx_error(images_path, "truncated file in image " + std::to_string(i), offset);
    }
    auto row = ds.features.row(static_cast<int>(i));
    for (size_t p = 0; p < pixels; ++p) row[p] = buf[p] / 255.0;
  }
  for (uint32_t i = 0; i < count; ++i) {
    const uint64_t offset = static_cast<uint64_t>(lab.tellg());
    unsigned char b;
    if (!lab.read(reinterpret_cast<char*>(&b), 1)) {
      idx_error(labels_path, "truncated file in label " + std::to_string(i), offset);
    }
    ds.labels[i] = b;
  }
  return ds;
}

void save_mnist_idx(const Dataset& ds, const std::string& images_path,
                    const std::string& labels_path, int rows, int cols) {
  require(rows > 0 && cols > 0 && rows * cols == ds.dim(),
          "save_mnist_idx: rows*cols must equal the feature dimension");
  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error(images_path + ": cannot open for writing");
  std::ofstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error(labels_path + ": cannot open for writing");

  write_be32(img, kImagesMagic);
  write_be32(img, static_cast<uint32_t>(ds.size()));
  write_be32(img, static_cast<uint32_t>(rows));
  write_be32(img, static_cast<uint32_t>(cols));
  std::vector<unsigned char> buf(static_cast<size_t>(ds.dim()));
  for (int i = 0; i < ds.size(); ++i) {
    auto row = ds.features.row(i);
    for (int p = 0; p < ds.dim(); ++p) {
      buf[p] = static_cast<unsigned char>(std::lround(row[p] * 255.0));
    }
    img.write(reinterpret_cast<const char*>(buf.data()), ds.dim());
  }

  write_be32(lab, kLabelsMagic);
  write_be32(lab, static_cast<uint32_t>(ds.size()));
  for (int i = 0; i < ds.size(); ++i) {
    const unsigned char b = static_cast<unsigned char>(ds.labels[i]);
    lab.write(reinterpret_cast<const char*>(&b), 1);
  }
}

Dataset make_blobs(int num_per_class, int num_classes, int dim, double spread, uint64_t seed) {
  require(num_per_class > 0, "make_blobs: num_per_class must be positive");
  require(num_classes >= 2, "make_blobs: need at least 2 classes");
  require(dim >= 2, "make_blobs: need dim >= 2 to place class centers");
  require(spread > 0.0, "make_blobs: spread must be positive");

  // Centers on a circle with chord length 2 between neighbors.
  const double radius = 1.0 / std::sin(std::numbers::pi / num_classes);
  Matrix centers(num_classes, dim, 0.0);
  for (int k = 0; k < num_classes; ++k) {
    const double angle = 2.0 * std::numbers::pi * k / num_classes;
    centers(k, 0) = radius * std::cos(angle);
    centers(k, 1) = radius * std::sin(angle);
  }

  const int n = num_per_class * num_classes;
  Dataset ds;
  ds.features = Matrix(n, dim);
  ds.labels.resize(n);
  ds.num_classes = num_classes;

  rng::Engine gen(seed);
  int row = 0;
  for (int k = 0; k < num_classes; ++k) {
    for (int s = 0; s < num_per_class; ++s, ++row) {
      auto out = ds.features.row(row);
      for (int d = 0; d < dim; ++d) out[d] = centers(k, d) + spread * rng::normal(gen);
      ds.labels[row] = k;
    }
  }
  return ds;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, uint64_t seed) {
  require(train_fraction > 0.0 && train_fraction < 1.0, "split: fraction outside (0,1)");
  const int n = ds.size();
  const int target_train = static_cast<int>(std::llround(train_fraction * n));
  require(target_train > 0 && target_train < n, "split: a split would be empty");

  std::vector<std::vector<int>> by_class(ds.num_classes);
  for (int i = 0; i < n; ++i) by_class[ds.labels[i]].push_back(i);

  // Largest-remainder apportionment of the train quota across classes.
  std::vector<int> quota(ds.num_classes);
  std::vector<std::pair<double, int>> remainders;
  int assigned = 0;
  for (int c = 0; c < ds.num_classes; ++c) {
    const double exact = train_fraction * by_class[c].size();
    quota[c] = static_cast<int>(std::floor(exact));
    assigned += quota[c];
    remainders.push_back({exact - quota[c], c});
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (int i = 0; assigned < target_train; ++i, ++assigned) {
    quota[remainders[i % remainders.size()].second]++;
  }
  for (int c = 0; c < ds.num_classes; ++c) {
    require(quota[c] <= static_cast<int>(by_class[c].size()), "split: class quota overflow");
  }

  rng::Engine gen(seed);
  std::vector<int> train_idx, test_idx;
  train_idx.reserve(target_train);
  test_idx.reserve(n - target_train);
  for (int c = 0; c < ds.num_classes; ++c) {
    auto& members = by_class[c];
    const auto order = rng::shuffled_indices(static_cast<int>(members.size()), gen);
    for (size_t j = 0; j < members.size(); ++j) {
      (static_cast<int>(j) < quota[c] ? train_idx : test_idx).push_back(members[order[j]]);
    }
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  require(!train_idx.empty() && !test_idx.empty(), "split: a split would be empty");

  auto take = [&](const std::vector<int>& idx, SplitTag tag) {
    Dataset out;
    out.features = Matrix(static_cast<int>(idx.size()), ds.dim());
    out.labels.resize(idx.size());
    out.num_classes = ds.num_classes;
    out.split_tag = tag;
    for (size_t i = 0; i < idx.size(); ++i) {
      auto src = ds.features.row(idx[i]);
      auto dst = out.features.row(static_cast<int>(i));
      std::copy(src.begin(), src.end(), dst.begin());
      out.labels[i] = ds.labels[idx[i]];
    }
    return out;
  };
  return {take(train_idx, SplitTag::train), take(test_idx, SplitTag::test)};
}

}  // namespace noisylab
