#include <atomic>
#include <stdexcept>
#include <string>

#include "indiff/simd/kernels.hpp"

namespace indiff::simd {

#ifndef INDIFF_HAVE_AVX2_TU
const Kernels* avx2_kernels() { return nullptr; }
#endif

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) && defined(INDIFF_HAVE_AVX2_TU)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

std::atomic<int>& selected() {
  static std::atomic<int> isa{static_cast<int>(cpu_has_avx2() ? Isa::avx2 : Isa::scalar)};
  return isa;
}

}  // namespace

bool isa_available(Isa isa) {
  return isa == Isa::scalar || (avx2_kernels() != nullptr && cpu_has_avx2());
}

Isa active_isa() { return static_cast<Isa>(selected().load(std::memory_order_relaxed)); }

void force_isa(Isa isa) {
  if (!isa_available(isa)) throw std::invalid_argument(std::string("ISA not available: ") + isa_name(isa));
  selected().store(static_cast<int>(isa), std::memory_order_relaxed);
}

const char* isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

const Kernels& kernels() {
  return active_isa() == Isa::avx2 ? *avx2_kernels() : scalar_kernels();
}

}  // namespace indiff::simd
