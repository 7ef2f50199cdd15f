#pragma once
// Dense-bitmap inner loops with a scalar reference path and an AVX2 path.
//
// Bitmaps are byte arrays holding 0 or 1. The AVX2 variants are compiled in a
// separate translation unit and picked at runtime through cpuid; the scalar
// variants are always available and serve as the equivalence reference.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

namespace fnr::kernels {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

/// True if the running CPU and the build both support the given ISA.
bool isa_available(Isa isa);

/// ISA used by the dispatching entry points below. Defaults to the best
/// available one unless FNR_FORCE_SCALAR is set in the environment.
Isa active_isa();

/// Pin the dispatcher to one ISA (tests), or clear the pin with nullopt.
/// Requesting an unavailable ISA falls back to scalar.
void set_isa_override(std::optional<Isa> isa);

/// Number of positions where both a[i] and b[i] are non-zero.
std::uint64_t count_and(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

/// Number of non-zero bytes.
std::uint64_t count_nonzero(std::span<const std::uint8_t> a);

/// dst[i] |= src[i]
void or_into(std::span<std::uint8_t> dst, std::span<const std::uint8_t> src);

/// out[i] = a[i] & b[i] & c[i]
void and3(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b,
          std::span<const std::uint8_t> c, std::span<std::uint8_t> out);

/// Sum of values[i] over positions with mask[i] != 0, accumulated in double.
double masked_sum(std::span<const float> values, std::span<const std::uint8_t> mask);

// Per-ISA entry points, exposed for equivalence tests.
namespace scalar {
std::uint64_t count_and(const std::uint8_t* a, const std::uint8_t* b, std::size_t n);
std::uint64_t count_nonzero(const std::uint8_t* a, std::size_t n);
void or_into(std::uint8_t* dst, const std::uint8_t* src, std::size_t n);
void and3(const std::uint8_t* a, const std::uint8_t* b, const std::uint8_t* c, std::uint8_t* out,
          std::size_t n);
double masked_sum(const float* values, const std::uint8_t* mask, std::size_t n);
}  // namespace scalar

namespace avx2 {
std::uint64_t count_and(const std::uint8_t* a, const std::uint8_t* b, std::size_t n);
std::uint64_t count_nonzero(const std::uint8_t* a, std::size_t n);
void or_into(std::uint8_t* dst, const std::uint8_t* src, std::size_t n);
void and3(const std::uint8_t* a, const std::uint8_t* b, const std::uint8_t* c, std::uint8_t* out,
          std::size_t n);
double masked_sum(const float* values, const std::uint8_t* mask, std::size_t n);
}  // namespace avx2

}  // namespace fnr::kernels
