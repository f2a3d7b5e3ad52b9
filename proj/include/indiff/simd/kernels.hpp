#pragma once

#include <cstddef>

namespace indiff::simd {

enum class Isa { scalar, avx2 };

// Leaf-sweep kernels. Each ISA provides the same table; results agree with
// the scalar reference to a few ulp per term (different summation order).
struct Kernels {
  // out[i] = w[i] * exp(z[i] - shift); returns sum(out).
  double (*exp_weighted)(const double* w, const double* z, double shift, double* out,
                         std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  // sum a[i] * b[i] * c[i]
  double (*dot3)(const double* a, const double* b, const double* c, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*max)(const double* x, std::size_t n);
};

const Kernels& scalar_kernels();
// nullptr when the translation unit was not built for this target.
const Kernels* avx2_kernels();

bool isa_available(Isa isa);
Isa active_isa();
// Overrides the CPUID choice; throws std::invalid_argument if unavailable.
void force_isa(Isa isa);
const char* isa_name(Isa isa);

const Kernels& kernels();

}  // namespace indiff::simd
