#include "noisylab/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace noisylab {

namespace {

constexpr double kSimplexTol = 1e-6;

double floored(double x) { return x > kProbFloor ? x : kProbFloor; }

void check_simplex_row(std::span<const double> row, const char* what, int index) {
  double sum = 0.0;
  for (double v : row) {
    if (!(v >= -kSimplexTol)) {
      throw std::invalid_argument(std::string(what) + ": negative entry in row " +
                                  std::to_string(index));
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSimplexTol) {
    throw std::invalid_argument(std::string(what) + ": row " + std::to_string(index) +
                                " sums to " + std::to_string(sum) + ", not 1");
  }
}

void check_simplex(const Matrix& m, const char* what) {
  for (int i = 0; i < m.rows(); ++i) check_simplex_row(m.row(i), what, i);
}

int onehot_class(std::span<const double> row, const char* what, int index) {
  int cls = -1;
  bool valid = true;
  for (size_t j = 0; j < row.size(); ++j) {
    if (std::abs(row[j] - 1.0) < 1e-9) {
      if (cls >= 0) valid = false;
      cls = static_cast<int>(j);
    } else if (std::abs(row[j]) > 1e-9) {
      valid = false;
    }
  }
  if (cls < 0 || !valid) {
    throw std::invalid_argument(std::string(what) + ": row " + std::to_string(index) +
                                " is not one-hot");
  }
  return cls;
}

}  // namespace

void LossWeights::validate() const {
  require(alpha >= 0.0, "LossWeights: alpha must be >= 0");
  require(beta >= 0.0, "LossWeights: beta must be >= 0");
  require(xi >= 0.0, "LossWeights: xi must be >= 0");
  if (xi > 0.0) require(mu < 0.0, "LossWeights: mu must be strictly negative when xi > 0");
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  require(p.size() == q.size(), "kl_divergence: length mismatch");
  check_simplex_row(p, "kl_divergence(p)", 0);
  check_simplex_row(q, "kl_divergence(q)", 0);
  double acc = 0.0;
  for (size_t j = 0; j < p.size(); ++j) {
    if (p[j] <= 0.0) continue;  // 0 ln(0/q) = 0
    acc += p[j] * std::log(floored(p[j]) / floored(q[j]));
  }
  return acc;
}

double divergence(const Matrix& p1, const Matrix& p2) {
  require(p1.same_shape(p2), "divergence: shape mismatch");
  require(p1.rows() > 0, "divergence: empty batch");
  double acc = 0.0;
  for (int i = 0; i < p1.rows(); ++i) {
    acc += kl_divergence(p1.row(i), p2.row(i)) + kl_divergence(p2.row(i), p1.row(i));
  }
  return acc / p1.rows();
}

CompatLoss compat_loss(const Matrix& probs, const Matrix& label_dist) {
  require(probs.same_shape(label_dist), "compat_loss: shape mismatch");
  require(probs.rows() > 0, "compat_loss: empty batch");
  check_simplex(probs, "compat_loss(probs)");
  check_simplex(label_dist, "compat_loss(label_dist)");

  const int b = probs.rows();
  const int c = probs.cols();
  CompatLoss out;
  out.per_sample.resize(b);
  out.dlabel_dist = Matrix(b, c);
  double sum = 0.0;
  for (int i = 0; i < b; ++i) {
    auto p = probs.row(i);
    auto q = label_dist.row(i);
    auto dq = out.dlabel_dist.row(i);
    double kl = 0.0;
    for (int j = 0; j < c; ++j) {
      const double pj = floored(p[j]);
      const double qj = floored(q[j]);
      kl += pj * std::log(pj / qj);
      dq[j] = -pj / qj / b;
    }
    out.per_sample[i] = kl;
    sum += kl;
  }
  out.value = sum / b;
  return out;
}

Matrix compat_loss_logit_grad(const Matrix& probs, const Matrix& label_dist) {
  require(probs.same_shape(label_dist), "compat_loss_logit_grad: shape mismatch");
  const int b = probs.rows();
  const int c = probs.cols();
  Matrix grad(b, c);
  for (int i = 0; i < b; ++i) {
    auto p = probs.row(i);
    auto q = label_dist.row(i);
    auto g = grad.row(i);
    double kl = 0.0;
    for (int j = 0; j < c; ++j) {
      kl += floored(p[j]) * std::log(floored(p[j]) / floored(q[j]));
    }
    for (int j = 0; j < c; ++j) {
      const double lr = std::log(floored(p[j]) / floored(q[j]));
      g[j] = p[j] * (lr - kl) / b;
    }
  }
  return grad;
}

OriginLoss origin_loss(const Matrix& noisy_onehot, const Matrix& label_dist) {
  require(noisy_onehot.same_shape(label_dist), "origin_loss: shape mismatch");
  require(noisy_onehot.rows() > 0, "origin_loss: empty batch");
  check_simplex(label_dist, "origin_loss(label_dist)");

  const int b = noisy_onehot.rows();
  const int c = noisy_onehot.cols();
  OriginLoss out;
  out.dlabel_dist = Matrix(b, c, 0.0);
  double sum = 0.0;
  for (int i = 0; i < b; ++i) {
    const int cls = onehot_class(noisy_onehot.row(i), "origin_loss(noisy_onehot)", i);
    const double q = floored(label_dist(i, cls));
    sum += -std::log(q);
    out.dlabel_dist(i, cls) = -1.0 / q / b;
  }
  out.value = sum / b;
  return out;
}

EntropyLoss entropy_loss(const Matrix& probs) {
  require(probs.rows() > 0, "entropy_loss: empty batch");
  check_simplex(probs, "entropy_loss(probs)");
  const int b = probs.rows();
  const int c = probs.cols();
  EntropyLoss out;
  out.dlogits = Matrix(b, c);
  double sum = 0.0;
  for (int i = 0; i < b; ++i) {
    auto p = probs.row(i);
    auto g = out.dlogits.row(i);
    double h = 0.0;
    for (int j = 0; j < c; ++j) {
      if (p[j] > 0.0) h -= p[j] * std::log(floored(p[j]));
    }
    sum += h;
    for (int j = 0; j < c; ++j) {
      g[j] = -p[j] * (std::log(floored(p[j])) + h) / b;
    }
  }
  out.value = sum / b;
  return out;
}

CoRegularization co_regularization(double dist, double mu) {
  require(mu < 0.0, "co_regularization: mu must be negative");
  CoRegularization out;
  double d = dist;
  if (d < kDistFloor) {
    d = kDistFloor;
    out.clamped = true;
  }
  out.value = std::pow(d, mu);
  out.ddist = mu * std::pow(d, mu - 1.0);
  return out;
}

LossBreakdown total_loss(const Matrix& probs, const Matrix& label_dist, const Matrix& noisy_onehot,
                         double dist, const LossWeights& weights) {
  weights.validate();
  LossBreakdown out;
  CompatLoss lc = compat_loss(probs, label_dist);
  out.l_c = lc.value;
  out.per_sample_lc = std::move(lc.per_sample);
  out.l_o = weights.alpha > 0.0 ? origin_loss(noisy_onehot, label_dist).value : 0.0;
  out.l_e = weights.beta > 0.0 ? entropy_loss(probs).value : 0.0;
  out.l_d = weights.xi > 0.0 ? co_regularization(dist, weights.mu).value : 0.0;
  out.total = out.l_c + weights.alpha * out.l_o + weights.beta * out.l_e + weights.xi * out.l_d;
  return out;
}

Matrix label_gradient(const Matrix& probs, const Matrix& label_dist, const Matrix& noisy_onehot,
                      double alpha) {
  require(probs.same_shape(label_dist) && probs.same_shape(noisy_onehot),
          "label_gradient: shape mismatch");
  const int b = probs.rows();
  const int c = probs.cols();
  Matrix grad(b, c);
  for (int i = 0; i < b; ++i) {
    auto p = probs.row(i);
    auto q = label_dist.row(i);
    auto y = noisy_onehot.row(i);
    auto g = grad.row(i);
    for (int j = 0; j < c; ++j) {
      g[j] = ((q[j] - p[j]) + alpha * (q[j] - y[j])) / b;
    }
  }
  return grad;
}

CrossEntropyLoss cross_entropy_loss(const Matrix& probs, std::span<const int> labels) {
  require(static_cast<int>(labels.size()) == probs.rows(), "cross_entropy_loss: label count");
  const int b = probs.rows();
  const int c = probs.cols();
  CrossEntropyLoss out;
  out.per_sample.resize(b);
  out.dlogits = Matrix(b, c);
  double sum = 0.0;
  for (int i = 0; i < b; ++i) {
    const int y = labels[i];
    require(y >= 0 && y < c, "cross_entropy_loss: label out of range");
    auto p = probs.row(i);
    out.per_sample[i] = -std::log(floored(p[y]));
    sum += out.per_sample[i];
    auto g = out.dlogits.row(i);
    for (int j = 0; j < c; ++j) g[j] = (p[j] - (j == y ? 1.0 : 0.0)) / b;
  }
  out.value = sum / b;
  return out;
}

Matrix onehot(std::span<const int> labels, int num_classes) {
  Matrix out(static_cast<int>(labels.size()), num_classes, 0.0);
  for (size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 && labels[i] < num_classes, "onehot: label out of range");
    out(static_cast<int>(i), labels[i]) = 1.0;
  }
  return out;
}

}  // namespace noisylab
