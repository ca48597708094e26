#pragma once

// Data-parallel inner loops used by the distance, clustering and scatter
// assembly code. Each kernel has a portable scalar reference and an AVX2/FMA
// variant; the active table is chosen once at startup from CPUID and can be
// pinned to the scalar path with WCV_SIMD=scalar.

#include <cstddef>
#include <span>
#include <string_view>

namespace wcv::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa);

struct KernelTable {
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += w * x
  void (*axpy)(double w, const double* x, double* y, std::size_t n);
  // m += w * v * v^t, m column-major n x n
  void (*add_scaled_outer)(double* m, std::size_t n, double w, const double* v);
};

namespace scalar {
double squared_distance(const double* a, const double* b, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
void axpy(double w, const double* x, double* y, std::size_t n);
void add_scaled_outer(double* m, std::size_t n, double w, const double* v);
}  // namespace scalar

namespace avx2 {
double squared_distance(const double* a, const double* b, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
void axpy(double w, const double* x, double* y, std::size_t n);
void add_scaled_outer(double* m, std::size_t n, double w, const double* v);
}  // namespace avx2

bool cpu_supports(Isa isa);

const KernelTable& table_for(Isa isa);

Isa active_isa();

// Throws wcv::Error(InvalidInput) if the CPU lacks the requested ISA.
void set_active_isa(Isa isa);

const KernelTable& active();

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

}  // namespace wcv::kernels
