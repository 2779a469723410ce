// AArch64 only; NEON is part of the baseline ISA there.

#include <arm_neon.h>

#include "rcg/simd/kernels.hpp"

namespace rcg::simd {

namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_neon(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_neon(w + r * cols, x, cols);
}

void gemv_t_neon(const double* w, std::size_t rows, std::size_t cols, const double* g,
                 double* out) {
  for (std::size_t r = 0; r < rows; ++r) axpy_neon(g[r], w + r * cols, out, cols);
}

void ger_neon(double alpha, const double* g, const double* x, double* out, std::size_t rows,
              std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy_neon(alpha * g[r], x, out + r * cols, cols);
}

constexpr KernelTable kNeon{Isa::neon, "neon",      dot_neon, axpy_neon,
                            gemv_neon, gemv_t_neon, ger_neon};

}  // namespace

const KernelTable* detail::neon_table() { return &kNeon; }

}  // namespace rcg::simd
