#include "noisylab/noise.hpp"

#include <fstream>
#include <stdexcept>

#include "noisylab/rng.hpp"

namespace noisylab {

NoiseKind noise_kind_from_string(const std::string& s) {
  if (s == "symmetric") return NoiseKind::symmetric;
  if (s == "pairflip") return NoiseKind::pairflip;
  throw std::invalid_argument("unknown noise kind '" + s + "' (expected symmetric or pairflip)");
}

std::string to_string(NoiseKind k) {
  return k == NoiseKind::symmetric ? "symmetric" : "pairflip";
}

NoiseModel build_transition_matrix(NoiseKind kind, double ratio, int num_classes) {
  require(ratio >= 0.0 && ratio < 1.0, "build_transition_matrix: ratio outside [0, 1)");
  require(num_classes >= 2, "build_transition_matrix: need at least 2 classes");

  NoiseModel model;
  model.kind = kind;
  model.ratio = ratio;
  model.transition = Matrix(num_classes, num_classes, 0.0);
  for (int i = 0; i < num_classes; ++i) {
    model.transition(i, i) = 1.0 - ratio;
    if (kind == NoiseKind::symmetric) {
      const double off = ratio / (num_classes - 1);
      for (int j = 0; j < num_classes; ++j) {
        if (j != i) model.transition(i, j) = off;
      }
    } else {
      model.transition(i, (i + 1) % num_classes) = ratio;
    }
  }
  return model;
}

double CorruptionRecord::corrupted_fraction() const {
  if (clean_labels.empty()) return 0.0;
  size_t n = 0;
  for (bool b : corrupted_mask) n += b;
  return static_cast<double>(n) / clean_labels.size();
}

CorruptionRecord corrupt_labels(const std::vector<int>& labels, const NoiseModel& model,
                                uint64_t seed) {
  const int c = model.num_classes();
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= c) {
      throw std::invalid_argument("corrupt_labels: label " + std::to_string(labels[i]) +
                                  " at index " + std::to_string(i) + " outside [0, " +
                                  std::to_string(c) + ")");
    }
  }

  CorruptionRecord record;
  record.clean_labels = labels;
  record.noisy_labels.resize(labels.size());
  record.corrupted_mask.resize(labels.size());

  rng::Engine gen(seed);
  for (size_t i = 0; i < labels.size(); ++i) {
    const double u = rng::uniform01(gen);
    const int clean = labels[i];
    double cum = 0.0;
    int noisy = c - 1;  // falls through only on accumulated rounding
    for (int j = 0; j < c; ++j) {
      cum += model.transition(clean, j);
      if (u < cum) {
        noisy = j;
        break;
      }
    }
    record.noisy_labels[i] = noisy;
    record.corrupted_mask[i] = noisy != clean;
  }
  return record;
}

void write_corruption_csv(const CorruptionRecord& record, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "index,clean,noisy,corrupted\n";
  for (int i = 0; i < record.size(); ++i) {
    out << i << ',' << record.clean_labels[i] << ',' << record.noisy_labels[i] << ','
        << (record.corrupted_mask[i] ? 1 : 0) << '\n';
  }
}

}  // namespace noisylab
