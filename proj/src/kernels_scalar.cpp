#include "wcv/kernels.hpp"

namespace wcv::kernels::scalar {

double squared_distance(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = a[i] - b[i];
    sum += t * t;
  }
  return sum;
}

double dot(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy(double w, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += w * x[i];
}

void add_scaled_outer(double* m, std::size_t n, double w, const double* v) {
  for (std::size_t j = 0; j < n; ++j) {
    const double s = w * v[j];
    double* col = m + j * n;
    for (std::size_t i = 0; i < n; ++i) col[i] += s * v[i];
  }
}

}  // namespace wcv::kernels::scalar
