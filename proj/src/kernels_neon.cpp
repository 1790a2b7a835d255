#if defined(__aarch64__) || defined(__ARM_NEON)

#include <arm_neon.h>

#include <cmath>

#include "noisylab/kernels.hpp"

namespace noisylab::kernels {
namespace {

// 2-lane float64x2 kernels for aarch64.

void matmul_nn(const double* a, const double* b, double* c, int rows, int inner, int cols) {
  const int cols2 = cols & ~1;
  for (int i = 0; i < rows; ++i) {
    const double* arow = a + static_cast<size_t>(i) * inner;
    double* crow = c + static_cast<size_t>(i) * cols;
    for (int k = 0; k < inner; ++k) {
      const float64x2_t aik = vdupq_n_f64(arow[k]);
      const double* brow = b + static_cast<size_t>(k) * cols;
      int j = 0;
      for (; j < cols2; j += 2) {
        float64x2_t cj = vld1q_f64(crow + j);
        cj = vfmaq_f64(cj, aik, vld1q_f64(brow + j));
        vst1q_f64(crow + j, cj);
      }
      for (; j < cols; ++j) crow[j] += arow[k] * brow[j];
    }
  }
}

void matmul_tn(const double* a, const double* b, double* c, int rows, int inner, int cols) {
  const int cols2 = cols & ~1;
  for (int i = 0; i < inner; ++i) {
    const double* arow = a + static_cast<size_t>(i) * rows;
    const double* brow = b + static_cast<size_t>(i) * cols;
    for (int k = 0; k < rows; ++k) {
      const float64x2_t aik = vdupq_n_f64(arow[k]);
      double* crow = c + static_cast<size_t>(k) * cols;
      int j = 0;
      for (; j < cols2; j += 2) {
        float64x2_t cj = vld1q_f64(crow + j);
        cj = vfmaq_f64(cj, aik, vld1q_f64(brow + j));
        vst1q_f64(crow + j, cj);
      }
      for (; j < cols; ++j) crow[j] += arow[k] * brow[j];
    }
  }
}

double dot(const double* x, const double* y, int n) {
  const int n2 = n & ~1;
  float64x2_t acc = vdupq_n_f64(0.0);
  int i = 0;
  for (; i < n2; i += 2) acc = vfmaq_f64(acc, vld1q_f64(x + i), vld1q_f64(y + i));
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void matmul_nt(const double* a, const double* b, double* c, int rows, int inner, int cols) {
  for (int i = 0; i < rows; ++i) {
    const double* arow = a + static_cast<size_t>(i) * inner;
    double* crow = c + static_cast<size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) crow[j] += dot(arow, b + static_cast<size_t>(j) * inner, inner);
  }
}

double squared_distance(const double* x, const double* y, int n) {
  const int n2 = n & ~1;
  float64x2_t acc = vdupq_n_f64(0.0);
  int i = 0;
  for (; i < n2; i += 2) {
    const float64x2_t d = vsubq_f64(vld1q_f64(x + i), vld1q_f64(y + i));
    acc = vfmaq_f64(acc, d, d);
  }
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

void axpy(double alpha, const double* x, double* y, int n) {
  const int n2 = n & ~1;
  const float64x2_t av = vdupq_n_f64(alpha);
  int i = 0;
  for (; i < n2; i += 2) {
    float64x2_t yi = vld1q_f64(y + i);
    yi = vfmaq_f64(yi, av, vld1q_f64(x + i));
    vst1q_f64(y + i, yi);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void adam_update(double* p, double* m, double* v, const double* g, int n, double lr, double beta1,
                 double beta2, double bc1, double bc2, double eps) {
  const int n2 = n & ~1;
  const float64x2_t b1 = vdupq_n_f64(beta1);
  const float64x2_t b2 = vdupq_n_f64(beta2);
  const float64x2_t ob1 = vdupq_n_f64(1.0 - beta1);
  const float64x2_t ob2 = vdupq_n_f64(1.0 - beta2);
  const float64x2_t vlr = vdupq_n_f64(lr);
  const float64x2_t vbc1 = vdupq_n_f64(bc1);
  const float64x2_t vbc2 = vdupq_n_f64(bc2);
  const float64x2_t veps = vdupq_n_f64(eps);
  int i = 0;
  for (; i < n2; i += 2) {
    const float64x2_t gi = vld1q_f64(g + i);
    float64x2_t mi = vaddq_f64(vmulq_f64(b1, vld1q_f64(m + i)), vmulq_f64(ob1, gi));
    float64x2_t vi =
        vaddq_f64(vmulq_f64(b2, vld1q_f64(v + i)), vmulq_f64(ob2, vmulq_f64(gi, gi)));
    vst1q_f64(m + i, mi);
    vst1q_f64(v + i, vi);
    const float64x2_t num = vmulq_f64(vlr, vmulq_f64(mi, vbc1));
    const float64x2_t den = vaddq_f64(vsqrtq_f64(vmulq_f64(vi, vbc2)), veps);
    vst1q_f64(p + i, vsubq_f64(vld1q_f64(p + i), vdivq_f64(num, den)));
  }
  for (; i < n; ++i) {
    const double gi = g[i];
    m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
    v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
    p[i] -= lr * (m[i] * bc1) / (std::sqrt(v[i] * bc2) + eps);
  }
}

}  // namespace

const Ops& neon_ops() {
  static const Ops ops = {"neon",    matmul_nn,        matmul_tn, matmul_nt,
                          dot,       squared_distance, axpy,      adam_update};
  return ops;
}

}  // namespace noisylab::kernels

#endif  // aarch64
