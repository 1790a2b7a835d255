#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "noisylab/matrix.hpp"

namespace noisylab {

enum class NoiseKind { symmetric, pairflip };

NoiseKind noise_kind_from_string(const std::string& s);
std::string to_string(NoiseKind k);

// Row-stochastic label-noise transition matrix T[i][j] = P(noisy=j | clean=i).
struct NoiseModel {
  NoiseKind kind = NoiseKind::symmetric;
  double ratio = 0.0;  // epsilon in [0, 1)
  Matrix transition;   // C x C, rows sum to 1, diagonal 1-epsilon

  int num_classes() const { return transition.rows(); }
};

// symmetric: off-diagonal mass epsilon/(C-1); pairflip: mass epsilon on the
// cyclic successor (i+1) mod C.
NoiseModel build_transition_matrix(NoiseKind kind, double ratio, int num_classes);

struct CorruptionRecord {
  std::vector<int> clean_labels;
  std::vector<int> noisy_labels;
  std::vector<bool> corrupted_mask;  // true iff clean != noisy

  int size() const { return static_cast<int>(clean_labels.size()); }
  double corrupted_fraction() const;
};

// Each noisy label drawn independently from row T[clean]; deterministic
// under seed.
CorruptionRecord corrupt_labels(const std::vector<int>& labels, const NoiseModel& model,
                                uint64_t seed);

// CSV with header `index,clean,noisy,corrupted`.
void write_corruption_csv(const CorruptionRecord& record, const std::string& path);

}  // namespace noisylab
