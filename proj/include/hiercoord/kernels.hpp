#pragma once

// Data-parallel inner loops used by the coordinator and the cost functions.
//
// Every kernel has a scalar reference implementation; AVX2 (x86-64) and NEON
// (aarch64) variants are compiled when the toolchain supports them and picked
// at runtime. HIERCOORD_SIMD=scalar forces the reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace hiercoord::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa);

struct KernelTable {
  /// out[i] = (1 - gain[i]) * prev[i] + gain[i] * hat[i]
  void (*blend)(const double* prev, const double* hat, const double* gain,
                double* out, std::size_t n);
  /// sum_i w[i] * (a[i] - b[i])^2
  double (*weighted_sq_diff)(const double* a, const double* b, const double* w,
                             std::size_t n);
  /// sum_i w[i] * max(y[i] - bound[i], 0)^2
  double (*hinge_sq)(const double* y, const double* bound, const double* w,
                     std::size_t n);
  /// sum_i max(y[i] - bound[i], 0)
  double (*hinge_sum)(const double* y, const double* bound, std::size_t n);
};

bool isa_available(Isa isa);
const KernelTable& table(Isa isa);

/// The table selected at first use (best available ISA unless overridden).
const KernelTable& active();
Isa active_isa();

// Span front-ends on the active table. Sizes must agree; checked.
void blend(std::span<const double> prev, std::span<const double> hat,
           std::span<const double> gain, std::span<double> out);
double weighted_sq_diff(std::span<const double> a, std::span<const double> b,
                        std::span<const double> w);
double hinge_sq(std::span<const double> y, std::span<const double> bound,
                std::span<const double> w);
double hinge_sum(std::span<const double> y, std::span<const double> bound);

namespace detail {
extern const KernelTable scalar_table;
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable avx2_table;
#endif
#if defined(__aarch64__)
extern const KernelTable neon_table;
#endif
}  // namespace detail

}  // namespace hiercoord::kernels
