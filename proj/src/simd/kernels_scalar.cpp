#include <algorithm>
#include <cmath>
#include <limits>

#include "indiff/simd/kernels.hpp"

namespace indiff::simd {
namespace {

double exp_weighted(const double* w, const double* z, double shift, double* out, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = w[i] * std::exp(z[i] - shift);
    s += out[i];
  }
  return s;
}

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double dot3(const double* a, const double* b, const double* c, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i] * c[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double max(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, x[i]);
  return m;
}

}  // namespace

const Kernels& scalar_kernels() {
  static const Kernels k{exp_weighted, dot, dot3, axpy, max};
  return k;
}

}  // namespace indiff::simd
