#include <atomic>
#include <cstdlib>
#include <cstring>

#include "wcv/error.hpp"
#include "wcv/kernels.hpp"

namespace wcv::kernels {

namespace {

constexpr KernelTable kScalarTable{&scalar::squared_distance, &scalar::dot, &scalar::axpy,
                                   &scalar::add_scaled_outer};
constexpr KernelTable kAvx2Table{&avx2::squared_distance, &avx2::dot, &avx2::axpy,
                                 &avx2::add_scaled_outer};

Isa detect() {
  if (const char* env = std::getenv("WCV_SIMD"); env != nullptr && std::strcmp(env, "scalar") == 0) {
    return Isa::Scalar;
  }
  return cpu_supports(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

std::string_view to_string(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

bool cpu_supports(Isa isa) {
  if (isa == Isa::Scalar) return true;
#if (defined(__x86_64__) || defined(__i386__)) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& table_for(Isa isa) { return isa == Isa::Avx2 ? kAvx2Table : kScalarTable; }

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!cpu_supports(isa)) {
    throw Error(ErrorCode::InvalidInput, "CPU does not support " + std::string(to_string(isa)));
  }
  current().store(isa, std::memory_order_relaxed);
}

const KernelTable& active() { return table_for(active_isa()); }

}  // namespace wcv::kernels
