#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "noisylab/matrix.hpp"

namespace noisylab {

// Two-layer MLP: affine -> ReLU -> affine. Parameters live in one flat
// vector [W1 (D x H), b1, W2 (H x C), b2]; the structured views alias it.
class MlpModel {
 public:
  // dims = {input, hidden, classes}. Weights initialized uniformly in
  // [-1/sqrt(fan_in), 1/sqrt(fan_in)] from the seed.
  MlpModel(std::vector<int> dims, uint64_t seed);

  const std::vector<int>& layer_dims() const { return dims_; }
  int input_dim() const { return dims_[0]; }
  int hidden_dim() const { return dims_[1]; }
  int num_classes() const { return dims_[2]; }
  int param_count() const { return static_cast<int>(params_.size()); }

  std::span<double> flat() { return {params_.data(), params_.size()}; }
  std::span<const double> flat() const { return {params_.data(), params_.size()}; }

  MatrixView w1() { return {params_.data(), dims_[0], dims_[1]}; }
  MatrixView w2() { return {params_.data() + w2_offset_, dims_[1], dims_[2]}; }
  std::span<double> b1() { return {params_.data() + b1_offset_, static_cast<size_t>(dims_[1])}; }
  std::span<double> b2() { return {params_.data() + b2_offset_, static_cast<size_t>(dims_[2])}; }

  const double* w1_data() const { return params_.data(); }
  const double* b1_data() const { return params_.data() + b1_offset_; }
  const double* w2_data() const { return params_.data() + w2_offset_; }
  const double* b2_data() const { return params_.data() + b2_offset_; }

  bool same_shape(const MlpModel& other) const { return dims_ == other.dims_; }

 private:
  std::vector<int> dims_;
  size_t b1_offset_, w2_offset_, b2_offset_;
  std::vector<double> params_;
};

// Activations cached by forward() for the matching backward() call.
struct ForwardRecord {
  Matrix input;   // B x D
  Matrix hidden;  // B x H, post-ReLU
  Matrix logits;  // B x C
  Matrix probs;   // B x C, rows on the simplex

  int batch() const { return input.rows(); }
};

ForwardRecord forward(const MlpModel& model, const Matrix& batch);

// Row-wise argmax of forward probabilities; ties go to the lowest class.
std::vector<int> predict(const MlpModel& model, const Matrix& features, int batch_size);

// Exact gradient over the flat parameter vector of the scalar loss whose
// logit-gradient is supplied. `record` must come from this model and batch.
std::vector<double> backward(const MlpModel& model, const ForwardRecord& record,
                             const Matrix& dloss_dlogits);

struct AdamState {
  explicit AdamState(int param_count, double learning_rate = 1e-3, double beta1 = 0.9,
                     double beta2 = 0.999, double epsilon = 1e-8);

  std::vector<double> m, v;
  int64_t step = 0;
  double learning_rate, beta1, beta2, epsilon;
};

// Bias-corrected Adam step. Throws on non-finite gradient entries; the
// model and state are untouched in that case.
void adam_step(MlpModel& model, AdamState& state, std::span<const double> gradient);

// ||theta_a - theta_b||_2 over the flat vectors.
double param_distance(const MlpModel& a, const MlpModel& b);

// Text header `NOISYLAB-CKPT v1 <dims-comma-separated> <param_count>` then
// little-endian 64-bit float parameters in flat order.
void save_checkpoint(const MlpModel& model, const std::string& path);
MlpModel load_checkpoint(const std::string& path);

}  // namespace noisylab
