#include "hiercoord/kernels.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>

namespace hiercoord::kernels::detail {
namespace {

void blend_neon(const double* prev, const double* hat, const double* gain,
                double* out, std::size_t n) {
  const float64x2_t one = vdupq_n_f64(1.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t g = vld1q_f64(gain + i);
    const float64x2_t a = vmulq_f64(vsubq_f64(one, g), vld1q_f64(prev + i));
    const float64x2_t b = vmulq_f64(g, vld1q_f64(hat + i));
    vst1q_f64(out + i, vaddq_f64(a, b));
  }
  for (; i < n; ++i) {
    out[i] = (1.0 - gain[i]) * prev[i] + gain[i] * hat[i];
  }
}

double weighted_sq_diff_neon(const double* a, const double* b, const double* w,
                             std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t d = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    acc = vaddq_f64(acc, vmulq_f64(vld1q_f64(w + i), vmulq_f64(d, d)));
  }
  double total = vaddvq_f64(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    total += w[i] * d * d;
  }
  return total;
}

double hinge_sq_neon(const double* y, const double* bound, const double* w,
                     std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  float64x2_t acc = zero;
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t d =
        vmaxq_f64(vsubq_f64(vld1q_f64(y + i), vld1q_f64(bound + i)), zero);
    acc = vaddq_f64(acc, vmulq_f64(vld1q_f64(w + i), vmulq_f64(d, d)));
  }
  double total = vaddvq_f64(acc);
  for (; i < n; ++i) {
    const double d = y[i] - bound[i];
    if (d > 0.0) total += w[i] * d * d;
  }
  return total;
}

double hinge_sum_neon(const double* y, const double* bound, std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  float64x2_t acc = zero;
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    acc = vaddq_f64(
        acc, vmaxq_f64(vsubq_f64(vld1q_f64(y + i), vld1q_f64(bound + i)), zero));
  }
  double total = vaddvq_f64(acc);
  for (; i < n; ++i) {
    const double d = y[i] - bound[i];
    if (d > 0.0) total += d;
  }
  return total;
}

}  // namespace

const KernelTable neon_table{blend_neon, weighted_sq_diff_neon, hinge_sq_neon,
                             hinge_sum_neon};

}  // namespace hiercoord::kernels::detail
#endif
