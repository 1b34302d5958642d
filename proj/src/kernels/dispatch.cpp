#include "hiercoord/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace hiercoord::kernels {

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Isa isa) {
  if (!isa_available(isa)) {
    throw std::invalid_argument("kernel ISA not available: " + std::string(isa_name(isa)));
  }
  switch (isa) {
#if defined(__x86_64__) || defined(_M_X64)
    case Isa::Avx2: return detail::avx2_table;
#endif
#if defined(__aarch64__)
    case Isa::Neon: return detail::neon_table;
#endif
    default: return detail::scalar_table;
  }
}

namespace {

Isa select_isa() {
  if (const char* env = std::getenv("HIERCOORD_SIMD")) {
    const std::string_view v(env);
    if (v == "scalar") return Isa::Scalar;
    if (v == "avx2" && isa_available(Isa::Avx2)) return Isa::Avx2;
    if (v == "neon" && isa_available(Isa::Neon)) return Isa::Neon;
  }
  if (isa_available(Isa::Avx2)) return Isa::Avx2;
  if (isa_available(Isa::Neon)) return Isa::Neon;
  return Isa::Scalar;
}

void check_sizes(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": length mismatch");
}

}  // namespace

Isa active_isa() {
  static const Isa isa = select_isa();
  return isa;
}

const KernelTable& active() {
  static const KernelTable& t = table(active_isa());
  return t;
}

void blend(std::span<const double> prev, std::span<const double> hat,
           std::span<const double> gain, std::span<double> out) {
  check_sizes(prev.size(), hat.size(), "blend");
  check_sizes(prev.size(), gain.size(), "blend");
  check_sizes(prev.size(), out.size(), "blend");
  active().blend(prev.data(), hat.data(), gain.data(), out.data(), prev.size());
}

double weighted_sq_diff(std::span<const double> a, std::span<const double> b,
                        std::span<const double> w) {
  check_sizes(a.size(), b.size(), "weighted_sq_diff");
  check_sizes(a.size(), w.size(), "weighted_sq_diff");
  return active().weighted_sq_diff(a.data(), b.data(), w.data(), a.size());
}

double hinge_sq(std::span<const double> y, std::span<const double> bound,
                std::span<const double> w) {
  check_sizes(y.size(), bound.size(), "hinge_sq");
  check_sizes(y.size(), w.size(), "hinge_sq");
  return active().hinge_sq(y.data(), bound.data(), w.data(), y.size());
}

double hinge_sum(std::span<const double> y, std::span<const double> bound) {
  check_sizes(y.size(), bound.size(), "hinge_sum");
  return active().hinge_sum(y.data(), bound.data(), y.size());
}

}  // namespace hiercoord::kernels
