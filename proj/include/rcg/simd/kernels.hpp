#pragma once

// Data-parallel inner loops used by the dense and network code.
//
// Each kernel has a portable scalar reference implementation and, where the
// build and the CPU allow it, an AVX2+FMA (x86-64) or NEON (AArch64) variant.
// The variant is chosen once at first use from CPU capabilities; the
// environment variable RCG_SIMD=scalar|avx2|neon forces a specific table.
// Vector variants agree with the scalar reference to rounding only (FMA and
// a different summation order), so bitwise determinism holds per machine and
// kernel table, not across them.

#include <cstddef>
#include <span>

namespace rcg::simd {

enum class Isa { scalar, avx2, neon };

struct KernelTable {
  Isa isa;
  const char* name;
  /// sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// y = W x, W row-major rows x cols
  void (*gemv)(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y);
  /// out += W^T g
  void (*gemv_t)(const double* w, std::size_t rows, std::size_t cols, const double* g,
                 double* out);
  /// G += alpha * g x^T, G row-major rows x cols
  void (*ger)(double alpha, const double* g, const double* x, double* out, std::size_t rows,
              std::size_t cols);
};

const KernelTable& scalar_table();
/// Table for the given ISA if it was compiled in and the CPU supports it.
const KernelTable* table_for(Isa isa);
/// The table all wrappers below dispatch through.
const KernelTable& active();
/// Overrides the active table (tests and benchmarks). Throws if unavailable.
void select(Isa isa);
const char* isa_name(Isa isa);

double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void gemv(std::span<const double> w, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y);
void gemv_t(std::span<const double> w, std::size_t rows, std::size_t cols,
            std::span<const double> g, std::span<double> out);
void ger(double alpha, std::span<const double> g, std::span<const double> x,
         std::span<double> out);

namespace detail {
const KernelTable* avx2_table();  // nullptr when not compiled in
const KernelTable* neon_table();  // nullptr when not compiled in
}  // namespace detail

}  // namespace rcg::simd
