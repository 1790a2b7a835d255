#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "noisylab/matrix.hpp"

namespace noisylab {

enum class SplitTag { train, test };

// Immutable after construction: N x D features (MNIST pixels scaled to
// [0,1], or synthetic coordinates) plus integer class labels in [0, C).
struct Dataset {
  Matrix features;          // N x D
  std::vector<int> labels;  // N, each in [0, num_classes)
  int num_classes = 0;
  SplitTag split_tag = SplitTag::train;

  int size() const { return features.rows(); }
  int dim() const { return features.cols(); }

  // Throws if a label is out of range, a feature is non-finite, or any of
  // N > 0, D > 0, C >= 2 fails.
  void validate() const;
};

// IDX ingestion, bit-exact per the format: 4-byte big-endian magic
// (0x00000803 images, 0x00000801 labels), big-endian 4-byte dimension
// sizes, then raw unsigned bytes. Pixels are scaled by 1/255.
// Malformed input reports the offending byte offset.
Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path);

// Inverse of load_mnist_idx for byte-representable features (multiples of
// 1/255); rows x cols gives the stored image shape (rows*cols == dim()).
void save_mnist_idx(const Dataset& ds, const std::string& images_path,
                    const std::string& labels_path, int rows, int cols);

// Synthetic well-separated Gaussian blobs. Class centers lie on a circle
// of radius 1/sin(pi/C) in the first two coordinates, giving pairwise
// center distance >= 2; per-dimension standard deviation `spread`.
// Same seed => bit-identical dataset.
Dataset make_blobs(int num_per_class, int num_classes, int dim, double spread, uint64_t seed);

// Deterministic stratified split: per-class proportions within +/-2% of
// the overall fraction, exact train size round(fraction*N) via largest
// remainder apportionment.
std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, uint64_t seed);

}  // namespace noisylab
