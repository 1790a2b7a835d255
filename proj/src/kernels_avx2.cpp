#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>

#include "noisylab/kernels.hpp"

namespace noisylab::kernels {
namespace {

// 4-lane double kernels. Remainder columns run scalar.

void matmul_nn(const double* a, const double* b, double* c, int rows, int inner, int cols) {
  const int cols4 = cols & ~3;
  for (int i = 0; i < rows; ++i) {
    const double* arow = a + static_cast<size_t>(i) * inner;
    double* crow = c + static_cast<size_t>(i) * cols;
    for (int k = 0; k < inner; ++k) {
      const __m256d aik = _mm256_set1_pd(arow[k]);
      const double* brow = b + static_cast<size_t>(k) * cols;
      int j = 0;
      for (; j < cols4; j += 4) {
        __m256d cj = _mm256_loadu_pd(crow + j);
        cj = _mm256_fmadd_pd(aik, _mm256_loadu_pd(brow + j), cj);
        _mm256_storeu_pd(crow + j, cj);
      }
      const double s = arow[k];
      for (; j < cols; ++j) crow[j] += s * brow[j];
    }
  }
}

void matmul_tn(const double* a, const double* b, double* c, int rows, int inner, int cols) {
  const int cols4 = cols & ~3;
  for (int i = 0; i < inner; ++i) {
    const double* arow = a + static_cast<size_t>(i) * rows;
    const double* brow = b + static_cast<size_t>(i) * cols;
    for (int k = 0; k < rows; ++k) {
      const __m256d aik = _mm256_set1_pd(arow[k]);
      double* crow = c + static_cast<size_t>(k) * cols;
      int j = 0;
      for (; j < cols4; j += 4) {
        __m256d cj = _mm256_loadu_pd(crow + j);
        cj = _mm256_fmadd_pd(aik, _mm256_loadu_pd(brow + j), cj);
        _mm256_storeu_pd(crow + j, cj);
      }
      const double s = arow[k];
      for (; j < cols; ++j) crow[j] += s * brow[j];
    }
  }
}

double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double dot(const double* x, const double* y, int n) {
  const int n4 = n & ~3;
  __m256d acc = _mm256_setzero_pd();
  int i = 0;
  for (; i < n4; i += 4) acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
  double s = hsum(acc);
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
  const int n4 = n & ~3;
  __m256d acc = _mm256_setzero_pd();
  int i = 0;
  for (; i < n4; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

void axpy(double alpha, const double* x, double* y, int n) {
  const int n4 = n & ~3;
  const __m256d av = _mm256_set1_pd(alpha);
  int i = 0;
  for (; i < n4; i += 4) {
    __m256d yi = _mm256_loadu_pd(y + i);
    yi = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yi);
    _mm256_storeu_pd(y + i, yi);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void adam_update(double* p, double* m, double* v, const double* g, int n, double lr, double beta1,
                 double beta2, double bc1, double bc2, double eps) {
  const int n4 = n & ~3;
  const __m256d b1 = _mm256_set1_pd(beta1);
  const __m256d b2 = _mm256_set1_pd(beta2);
  const __m256d ob1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d ob2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d vlr = _mm256_set1_pd(lr);
  const __m256d vbc1 = _mm256_set1_pd(bc1);
  const __m256d vbc2 = _mm256_set1_pd(bc2);
  const __m256d veps = _mm256_set1_pd(eps);
  int i = 0;
  for (; i < n4; i += 4) {
    const __m256d gi = _mm256_loadu_pd(g + i);
    __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(ob1, gi));
    __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                               _mm256_mul_pd(ob2, _mm256_mul_pd(gi, gi)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d num = _mm256_mul_pd(vlr, _mm256_mul_pd(mi, vbc1));
    const __m256d den = _mm256_add_pd(_mm256_sqrt_pd(_mm256_mul_pd(vi, vbc2)), veps);
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), _mm256_div_pd(num, den)));
  }
  for (; i < n; ++i) {
    const double gi = g[i];
    m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
    v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
    p[i] -= lr * (m[i] * bc1) / (std::sqrt(v[i] * bc2) + eps);
  }
}

}  // namespace

const Ops& avx2_ops() {
  static const Ops ops = {"avx2",    matmul_nn,        matmul_tn, matmul_nt,
                          dot,       squared_distance, axpy,      adam_update};
  return ops;
}

}  // namespace noisylab::kernels

#endif  // x86_64
