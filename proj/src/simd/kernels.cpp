#include "rcg/simd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string_view>

#include "rcg/error.hpp"

namespace rcg::simd {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_scalar(const double* w, std::size_t rows, std::size_t cols, const double* x,
                 double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_scalar(w + r * cols, x, cols);
}

void gemv_t_scalar(const double* w, std::size_t rows, std::size_t cols, const double* g,
                   double* out) {
  for (std::size_t r = 0; r < rows; ++r) axpy_scalar(g[r], w + r * cols, out, cols);
}

void ger_scalar(double alpha, const double* g, const double* x, double* out, std::size_t rows,
                std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy_scalar(alpha * g[r], x, out + r * cols, cols);
}

constexpr KernelTable kScalar{Isa::scalar, "scalar",      dot_scalar, axpy_scalar,
                              gemv_scalar, gemv_t_scalar, ger_scalar};

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* pick_default() {
  if (const char* env = std::getenv("RCG_SIMD")) {
    std::string_view want(env);
    if (want == "scalar") return &kScalar;
    if (want == "avx2") {
      if (auto* t = table_for(Isa::avx2)) return t;
    }
    if (want == "neon") {
      if (auto* t = table_for(Isa::neon)) return t;
    }
  }
  if (auto* t = table_for(Isa::avx2)) return t;
  if (auto* t = table_for(Isa::neon)) return t;
  return &kScalar;
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{pick_default()};
  return slot;
}

void require(bool ok, const char* what) {
  if (!ok) throw InvalidArgument(what);
}

}  // namespace

#ifndef RCG_HAVE_AVX2
const KernelTable* detail::avx2_table() { return nullptr; }
#endif
#ifndef RCG_HAVE_NEON
const KernelTable* detail::neon_table() { return nullptr; }
#endif

const KernelTable& scalar_table() { return kScalar; }

const KernelTable* table_for(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return &kScalar;
    case Isa::avx2:
      return cpu_has_avx2_fma() ? detail::avx2_table() : nullptr;
    case Isa::neon:
      return detail::neon_table();
  }
  return nullptr;
}

const KernelTable& active() { return *active_slot().load(std::memory_order_relaxed); }

void select(Isa isa) {
  const KernelTable* t = table_for(isa);
  if (!t) throw InvalidArgument(std::string("simd::select: ") + isa_name(isa) + " unavailable");
  active_slot().store(t, std::memory_order_relaxed);
}

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::neon:
      return "neon";
  }
  return "?";
}

double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "simd::dot: length mismatch");
  return active().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require(x.size() == y.size(), "simd::axpy: length mismatch");
  active().axpy(alpha, x.data(), y.data(), x.size());
}

void gemv(std::span<const double> w, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y) {
  require(w.size() == rows * cols && x.size() == cols && y.size() == rows,
          "simd::gemv: shape mismatch");
  active().gemv(w.data(), rows, cols, x.data(), y.data());
}

void gemv_t(std::span<const double> w, std::size_t rows, std::size_t cols,
            std::span<const double> g, std::span<double> out) {
  require(w.size() == rows * cols && g.size() == rows && out.size() == cols,
          "simd::gemv_t: shape mismatch");
  active().gemv_t(w.data(), rows, cols, g.data(), out.data());
}

void ger(double alpha, std::span<const double> g, std::span<const double> x,
         std::span<double> out) {
  require(out.size() == g.size() * x.size(), "simd::ger: shape mismatch");
  active().ger(alpha, g.data(), x.data(), out.data(), g.size(), x.size());
}

}  // namespace rcg::simd
