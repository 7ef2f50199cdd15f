#include <immintrin.h>

#include "fnr/kernels.hpp"

namespace fnr::kernels::avx2 {

namespace {

inline std::uint64_t popcount_movemask(__m256i v) {
  return static_cast<std::uint64_t>(
      _mm_popcnt_u32(static_cast<unsigned>(_mm256_movemask_epi8(v))));
}

}  // namespace

std::uint64_t count_and(const std::uint8_t* a, const std::uint8_t* b, std::size_t n) {
  const __m256i zero = _mm256_setzero_si256();
  std::uint64_t count = 0;
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
    __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
    // A lane is set iff neither byte is zero.
    __m256i za = _mm256_cmpeq_epi8(va, zero);
    __m256i zb = _mm256_cmpeq_epi8(vb, zero);
    __m256i both = _mm256_andnot_si256(_mm256_or_si256(za, zb), _mm256_set1_epi8(-1));
    count += popcount_movemask(both);
  }
  for (; i < n; ++i) count += (a[i] != 0) & (b[i] != 0);
  return count;
}

std::uint64_t count_nonzero(const std::uint8_t* a, std::size_t n) {
  const __m256i zero = _mm256_setzero_si256();
  std::uint64_t count = 0;
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
    count += 32 - popcount_movemask(_mm256_cmpeq_epi8(va, zero));
  }
  for (; i < n; ++i) count += a[i] != 0;
  return count;
}

void or_into(std::uint8_t* dst, const std::uint8_t* src, std::size_t n) {
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    __m256i vd = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(dst + i));
    __m256i vs = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(src + i));
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + i), _mm256_or_si256(vd, vs));
  }
  for (; i < n; ++i) dst[i] |= src[i];
}

void and3(const std::uint8_t* a, const std::uint8_t* b, const std::uint8_t* c, std::uint8_t* out,
          std::size_t n) {
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
    __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
    __m256i vc = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(c + i));
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + i),
                        _mm256_and_si256(_mm256_and_si256(va, vb), vc));
  }
  for (; i < n; ++i) out[i] = a[i] & b[i] & c[i];
}

double masked_sum(const float* values, const std::uint8_t* mask, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m128 v = _mm_loadu_ps(values + i);
    // Expand the four mask bytes to 32-bit lanes, then to an all-ones compare mask.
    std::int32_t bytes;
    __builtin_memcpy(&bytes, mask + i, 4);
    __m128i m = _mm_cvtepu8_epi32(_mm_cvtsi32_si128(bytes));
    __m128 keep = _mm_castsi128_ps(_mm_cmpgt_epi32(m, _mm_setzero_si128()));
    acc = _mm256_add_pd(acc, _mm256_cvtps_pd(_mm_and_ps(v, keep)));
  }
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  double total = (lane[0] + lane[1]) + (lane[2] + lane[3]);
  for (; i < n; ++i) {
    if (mask[i]) total += static_cast<double>(values[i]);
  }
  return total;
}

}  // namespace fnr::kernels::avx2
