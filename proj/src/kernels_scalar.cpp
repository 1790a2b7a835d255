#include <cmath>

#include "noisylab/kernels.hpp"

namespace noisylab::kernels {
namespace {

// Loop orders match the SIMD variants (i-k-j for the accumulating matmuls)
// so the only cross-backend difference is lane blocking and FMA rounding.

void matmul_nn(const double* a, const double* b, double* c, int rows, int inner, int cols) {
  for (int i = 0; i < rows; ++i) {
    const double* arow = a + static_cast<size_t>(i) * inner;
    double* crow = c + static_cast<size_t>(i) * cols;
    for (int k = 0; k < inner; ++k) {
      const double aik = arow[k];
      const double* brow = b + static_cast<size_t>(k) * cols;
      for (int j = 0; j < cols; ++j) crow[j] += aik * brow[j];
    }
  }
}

void matmul_tn(const double* a, const double* b, double* c, int rows, int inner, int cols) {
  for (int i = 0; i < inner; ++i) {
    const double* arow = a + static_cast<size_t>(i) * rows;
    const double* brow = b + static_cast<size_t>(i) * cols;
    for (int k = 0; k < rows; ++k) {
      const double aik = arow[k];
      double* crow = c + static_cast<size_t>(k) * cols;
      for (int j = 0; j < cols; ++j) crow[j] += aik * brow[j];
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c, int rows, int inner, int cols) {
  for (int i = 0; i < rows; ++i) {
    const double* arow = a + static_cast<size_t>(i) * inner;
    double* crow = c + static_cast<size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) {
      const double* brow = b + static_cast<size_t>(j) * inner;
      double acc = 0.0;
      for (int k = 0; k < inner; ++k) acc += arow[k] * brow[k];
      crow[j] += acc;
    }
  }
}

double dot(const double* x, const double* y, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double squared_distance(const double* x, const double* y, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = x[i] - y[i];
    acc += d * d;
  }
  return acc;
}

void axpy(double alpha, const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void adam_update(double* p, double* m, double* v, const double* g, int n, double lr, double beta1,
                 double beta2, double bc1, double bc2, double eps) {
  for (int i = 0; i < n; ++i) {
    const double gi = g[i];
    m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
    v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
    p[i] -= lr * (m[i] * bc1) / (std::sqrt(v[i] * bc2) + eps);
  }
}

}  // namespace

const Ops& scalar() {
  static const Ops ops = {"scalar",  matmul_nn,        matmul_tn, matmul_nt,
                          dot,       squared_distance, axpy,      adam_update};
  return ops;
}

}  // namespace noisylab::kernels
