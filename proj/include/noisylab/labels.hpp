#pragma once

#include <span>
#include <string>
#include <vector>

#include "noisylab/matrix.hpp"
#include "noisylab/noise.hpp"

namespace noisylab {

// Trainable label logits y~ (N x C), initialized at k_init * onehot(noisy).
// The label distribution y^d is the row-wise softmax. Noisy labels are
// frozen at construction; single-writer contract for update().
class LabelStore {
 public:
  LabelStore(std::vector<int> noisy_labels, int num_classes, double k_init, double lambda_step);

  int size() const { return y_tilde_.rows(); }
  int num_classes() const { return y_tilde_.cols(); }
  double k_init() const { return k_init_; }
  double lambda_step() const { return lambda_step_; }
  void set_lambda_step(double lambda);

  const std::vector<int>& noisy_labels() const { return noisy_labels_; }
  const Matrix& y_tilde() const { return y_tilde_; }

  // Overflow-safe softmax of the selected rows; B x C, rows on the simplex.
  Matrix distribution(std::span<const int> indices) const;

  // y~[idx] -= lambda * (grad1 + grad2), row by row. Rows with any
  // non-finite summed gradient are refused; returns how many were refused.
  int update(std::span<const int> indices, const Matrix& grad1, const Matrix& grad2);

  // Argmax of y^d per row; ties break to the lowest class index.
  std::vector<int> corrected_labels() const;

 private:
  Matrix y_tilde_;
  std::vector<int> noisy_labels_;
  double k_init_;
  double lambda_step_;
};

struct CorrectionRow {
  int index;
  int clean;
  int noisy;
  int corrected;
  double max_prob;
};

struct CorrectionTable {
  std::vector<CorrectionRow> rows;
  // Fraction of corrupted examples whose corrected label matches clean.
  double recovery_rate = 0.0;
  // Fraction of uncorrupted examples whose corrected label matches clean.
  double preservation_rate = 0.0;
};

CorrectionTable export_corrected(const LabelStore& store, const CorruptionRecord& record);

// CSV with header `index,clean,noisy,corrected,max_prob`.
void write_corrections_csv(const CorrectionTable& table, const std::string& path);

}  // namespace noisylab
