#pragma once

// Dense float64 kernels behind every matrix-vector product in the model.
// A scalar reference table and an AVX2/FMA table share one signature set;
// the active table is picked once at startup from CPUID and may be pinned
// with the SHEM_ISA environment variable ("scalar" or "avx2").

#include <cstddef>
#include <span>
#include <string_view>

namespace shem::kernels {

enum class Isa { kScalar, kAvx2 };

struct KernelTable {
  Isa isa;
  // sum_i x[i] * y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // y += A x, A is rows x cols row-major
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols,
               const double* x, double* y);
  // y += A^T x
  void (*gemv_t)(const double* a, std::size_t rows, std::size_t cols,
                 const double* x, double* y);
  // A += u v^T
  void (*ger)(double* a, std::size_t rows, std::size_t cols, const double* u,
              const double* v);
};

const KernelTable& scalar_table();

// Null when the binary was built without AVX2 support.
const KernelTable* avx2_table();

bool cpu_supports_avx2();

// Table used by the free functions below.
const KernelTable& active();
void set_active(Isa isa);
std::string_view isa_name(Isa isa);

inline double dot(std::span<const double> x, std::span<const double> y) {
  return active().dot(x.data(), y.data(), x.size());
}

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  active().axpy(a, x.data(), y.data(), x.size());
}

}  // namespace shem::kernels
