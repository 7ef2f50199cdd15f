#include "fnr/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>

namespace fnr::kernels {

#if !defined(FNR_HAVE_AVX2_TU)
// Builds without the AVX2 translation unit route everything to scalar.
namespace avx2 {
std::uint64_t count_and(const std::uint8_t* a, const std::uint8_t* b, std::size_t n) {
  return scalar::count_and(a, b, n);
}
std::uint64_t count_nonzero(const std::uint8_t* a, std::size_t n) {
  return scalar::count_nonzero(a, n);
}
void or_into(std::uint8_t* dst, const std::uint8_t* src, std::size_t n) {
  scalar::or_into(dst, src, n);
}
void and3(const std::uint8_t* a, const std::uint8_t* b, const std::uint8_t* c, std::uint8_t* out,
          std::size_t n) {
  scalar::and3(a, b, c, out, n);
}
double masked_sum(const float* values, const std::uint8_t* mask, std::size_t n) {
  return scalar::masked_sum(values, mask, n);
}
}  // namespace avx2
#endif

namespace {

bool cpu_has_avx2() {
#if defined(FNR_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("popcnt");
#else
  return false;
#endif
}

Isa detect_default() {
  if (const char* force = std::getenv("FNR_FORCE_SCALAR"); force != nullptr && *force != '\0' &&
                                                            *force != '0') {
    return Isa::scalar;
  }
  return cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
}

// -1 means "no override".
std::atomic<int> g_override{-1};

void check_sizes(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("kernel operands differ in length");
}

}  // namespace

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool isa_available(Isa isa) {
  static const bool avx2_ok = cpu_has_avx2();
  return isa == Isa::scalar || avx2_ok;
}

Isa active_isa() {
  const int pinned = g_override.load(std::memory_order_relaxed);
  if (pinned >= 0) return static_cast<Isa>(pinned);
  static const Isa detected = detect_default();
  return detected;
}

void set_isa_override(std::optional<Isa> isa) {
  if (!isa) {
    g_override.store(-1);
    return;
  }
  g_override.store(static_cast<int>(isa_available(*isa) ? *isa : Isa::scalar));
}

std::uint64_t count_and(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  check_sizes(a.size(), b.size());
  return active_isa() == Isa::avx2 ? avx2::count_and(a.data(), b.data(), a.size())
                                   : scalar::count_and(a.data(), b.data(), a.size());
}

std::uint64_t count_nonzero(std::span<const std::uint8_t> a) {
  return active_isa() == Isa::avx2 ? avx2::count_nonzero(a.data(), a.size())
                                   : scalar::count_nonzero(a.data(), a.size());
}

void or_into(std::span<std::uint8_t> dst, std::span<const std::uint8_t> src) {
  check_sizes(dst.size(), src.size());
  if (active_isa() == Isa::avx2) {
    avx2::or_into(dst.data(), src.data(), dst.size());
  } else {
    scalar::or_into(dst.data(), src.data(), dst.size());
  }
}

void and3(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b,
          std::span<const std::uint8_t> c, std::span<std::uint8_t> out) {
  check_sizes(a.size(), b.size());
  check_sizes(a.size(), c.size());
  check_sizes(a.size(), out.size());
  if (active_isa() == Isa::avx2) {
    avx2::and3(a.data(), b.data(), c.data(), out.data(), a.size());
  } else {
    scalar::and3(a.data(), b.data(), c.data(), out.data(), a.size());
  }
}

double masked_sum(std::span<const float> values, std::span<const std::uint8_t> mask) {
  check_sizes(values.size(), mask.size());
  return active_isa() == Isa::avx2 ? avx2::masked_sum(values.data(), mask.data(), values.size())
                                   : scalar::masked_sum(values.data(), mask.data(), values.size());
}

}  // namespace fnr::kernels
