#pragma once

#include <string_view>

namespace noisylab::kernels {

// Hot arithmetic loops, runtime-dispatched. Every entry has a scalar
// reference implementation; SIMD variants must agree with it within
// floating-point reassociation tolerance (see tests/test_kernels.cpp).
//
// All matrices are row-major. The matmul kernels ACCUMULATE into c, so the
// caller zero- or bias-initializes the output.
struct Ops {
  const char* name;

  // c[rows x cols] += a[rows x inner] * b[inner x cols]
  void (*matmul_nn)(const double* a, const double* b, double* c, int rows, int inner, int cols);
  // c[rows x cols] += a[inner x rows]^T * b[inner x cols]
  void (*matmul_tn)(const double* a, const double* b, double* c, int rows, int inner, int cols);
  // c[rows x cols] += a[rows x inner] * b[cols x inner]^T
  void (*matmul_nt)(const double* a, const double* b, double* c, int rows, int inner, int cols);

  double (*dot)(const double* x, const double* y, int n);
  double (*squared_distance)(const double* x, const double* y, int n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, int n);

  // Fused Adam update. bc1/bc2 are the bias corrections 1/(1-beta^t).
  //   m = beta1*m + (1-beta1)*g;  v = beta2*v + (1-beta2)*g*g
  //   p -= lr * (m*bc1) / (sqrt(v*bc2) + eps)
  void (*adam_update)(double* p, double* m, double* v, const double* g, int n, double lr,
                      double beta1, double beta2, double bc1, double bc2, double eps);
};

const Ops& scalar();

// The dispatched table. First call resolves from the CPU, honoring the
// NOISYLAB_KERNELS environment variable ("scalar", "avx2", "neon", "auto").
const Ops& active();

// Force a backend by name; returns false if it is unavailable on this CPU.
bool select(std::string_view name);

bool avx2_available();
bool neon_available();

}  // namespace noisylab::kernels
