#include "hiercoord/kernels.hpp"

namespace hiercoord::kernels::detail {
namespace {

void blend_scalar(const double* prev, const double* hat, const double* gain,
                  double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = (1.0 - gain[i]) * prev[i] + gain[i] * hat[i];
  }
}

double weighted_sq_diff_scalar(const double* a, const double* b, const double* w,
                               std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += w[i] * d * d;
  }
  return acc;
}

double hinge_sq_scalar(const double* y, const double* bound, const double* w,
                       std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = y[i] - bound[i];
    if (d > 0.0) acc += w[i] * d * d;
  }
  return acc;
}

double hinge_sum_scalar(const double* y, const double* bound, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = y[i] - bound[i];
    if (d > 0.0) acc += d;
  }
  return acc;
}

}  // namespace

const KernelTable scalar_table{blend_scalar, weighted_sq_diff_scalar,
                               hinge_sq_scalar, hinge_sum_scalar};

}  // namespace hiercoord::kernels::detail
