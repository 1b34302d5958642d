#include "hiercoord/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

namespace hiercoord::kernels::detail {
namespace {

// No FMA contraction anywhere in this file: blend must stay bitwise equal to
// the scalar reference so traces do not depend on the dispatched ISA.

__attribute__((target("avx2"))) double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  const __m128d sh = _mm_unpackhi_pd(s, s);
  return _mm_cvtsd_f64(_mm_add_sd(s, sh));
}

__attribute__((target("avx2"))) void blend_avx2(const double* prev,
                                                const double* hat,
                                                const double* gain, double* out,
                                                std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d p = _mm256_loadu_pd(prev + i);
    const __m256d h = _mm256_loadu_pd(hat + i);
    const __m256d g = _mm256_loadu_pd(gain + i);
    const __m256d a = _mm256_mul_pd(_mm256_sub_pd(one, g), p);
    const __m256d b = _mm256_mul_pd(g, h);
    _mm256_storeu_pd(out + i, _mm256_add_pd(a, b));
  }
  for (; i < n; ++i) {
    out[i] = (1.0 - gain[i]) * prev[i] + gain[i] * hat[i];
  }
}

__attribute__((target("avx2"))) double weighted_sq_diff_avx2(const double* a,
                                                             const double* b,
                                                             const double* w,
                                                             std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(w + i), _mm256_mul_pd(d, d)));
  }
  double total = hsum(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    total += w[i] * d * d;
  }
  return total;
}

__attribute__((target("avx2"))) double hinge_sq_avx2(const double* y,
                                                     const double* bound,
                                                     const double* w,
                                                     std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  __m256d acc = zero;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_max_pd(
        _mm256_sub_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(bound + i)), zero);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(w + i), _mm256_mul_pd(d, d)));
  }
  double total = hsum(acc);
  for (; i < n; ++i) {
    const double d = y[i] - bound[i];
    if (d > 0.0) total += w[i] * d * d;
  }
  return total;
}

__attribute__((target("avx2"))) double hinge_sum_avx2(const double* y,
                                                      const double* bound,
                                                      std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  __m256d acc = zero;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(
        acc, _mm256_max_pd(_mm256_sub_pd(_mm256_loadu_pd(y + i),
                                         _mm256_loadu_pd(bound + i)),
                           zero));
  }
  double total = hsum(acc);
  for (; i < n; ++i) {
    const double d = y[i] - bound[i];
    if (d > 0.0) total += d;
  }
  return total;
}

}  // namespace

const KernelTable avx2_table{blend_avx2, weighted_sq_diff_avx2, hinge_sq_avx2,
                             hinge_sum_avx2};

}  // namespace hiercoord::kernels::detail
#endif
