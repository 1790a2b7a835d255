#pragma once

#include <span>
#include <vector>

#include "noisylab/matrix.hpp"

namespace noisylab {

// Entries are clamped to >= kProbFloor before logs and quotients, so no
// loss or gradient here can go non-finite on valid simplex input.
inline constexpr double kProbFloor = 1e-12;
// distance^mu with mu < 0 diverges as the networks coincide; distances
// below this floor are clamped and the event surfaced to the caller.
inline constexpr double kDistFloor = 1e-8;

struct LossWeights {
  double alpha = 0.1;  // weight of the noisy-label anchor term
  double beta = 0.4;   // weight of the prediction-entropy term
  double xi = 0.1;     // weight of the parameter-distance co-regularizer
  double mu = -1.0;    // co-regularization exponent, < 0 whenever xi > 0

  void validate() const;
};

struct LossBreakdown {
  double l_c = 0.0;
  double l_o = 0.0;
  double l_e = 0.0;
  double l_d = 0.0;
  double total = 0.0;
  std::vector<double> per_sample_lc;  // feeds small-loss selection
};

// sum_j p_j ln(p_j / q_j); both arguments on the simplex within 1e-6.
double kl_divergence(std::span<const double> p, std::span<const double> q);

// Batch mean of the symmetric KL between matching rows.
double divergence(const Matrix& p1, const Matrix& p2);

struct CompatLoss {
  double value = 0.0;
  std::vector<double> per_sample;
  Matrix dlabel_dist;  // d(mean)/d label_dist = -(1/B) probs/label_dist
};
// Flipped KL: prediction in the first slot, (1/B) sum_i KL(probs_i || label_dist_i).
CompatLoss compat_loss(const Matrix& probs, const Matrix& label_dist);

// Gradient of mean compat loss w.r.t. the logits that produced `probs`.
Matrix compat_loss_logit_grad(const Matrix& probs, const Matrix& label_dist);

struct OriginLoss {
  double value = 0.0;
  Matrix dlabel_dist;
};
// (1/B) sum_i KL(noisy_onehot_i || label_dist_i) = -(1/B) sum_i ln q_{i,class}.
OriginLoss origin_loss(const Matrix& noisy_onehot, const Matrix& label_dist);

struct EntropyLoss {
  double value = 0.0;
  Matrix dlogits;
};
// Mean Shannon entropy of the prediction rows; gradient w.r.t. logits.
EntropyLoss entropy_loss(const Matrix& probs);

struct CoRegularization {
  double value = 0.0;
  double ddist = 0.0;
  bool clamped = false;
};
// dist^mu and its derivative; dist below kDistFloor is clamped, flagged.
CoRegularization co_regularization(double dist, double mu);

LossBreakdown total_loss(const Matrix& probs, const Matrix& label_dist, const Matrix& noisy_onehot,
                         double dist, const LossWeights& weights);

// Gradient of mean(l_c) + alpha * mean(l_o) w.r.t. the label logits y~,
// chained through the label softmax: (1/B) [(y^d - p) + alpha (y^d - y^)].
Matrix label_gradient(const Matrix& probs, const Matrix& label_dist, const Matrix& noisy_onehot,
                      double alpha);

struct CrossEntropyLoss {
  double value = 0.0;
  std::vector<double> per_sample;
  Matrix dlogits;  // (1/B)(probs - onehot)
};
// Plain cross-entropy on hard labels; the Standard and Co-teaching loss.
CrossEntropyLoss cross_entropy_loss(const Matrix& probs, std::span<const int> labels);

Matrix onehot(std::span<const int> labels, int num_classes);

}  // namespace noisylab
