#include "fnr/kernels.hpp"

namespace fnr::kernels::scalar {

std::uint64_t count_and(const std::uint8_t* a, const std::uint8_t* b, std::size_t n) {
  std::uint64_t count = 0;
  for (std::size_t i = 0; i < n; ++i) count += (a[i] != 0) & (b[i] != 0);
  return count;
}

std::uint64_t count_nonzero(const std::uint8_t* a, std::size_t n) {
  std::uint64_t count = 0;
  for (std::size_t i = 0; i < n; ++i) count += a[i] != 0;
  return count;
}

void or_into(std::uint8_t* dst, const std::uint8_t* src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] |= src[i];
}

void and3(const std::uint8_t* a, const std::uint8_t* b, const std::uint8_t* c, std::uint8_t* out,
          std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] & b[i] & c[i];
}

// Four interleaved partial sums, combined as (s0 + s1) + (s2 + s3). The AVX2
// variant accumulates the same lanes in the same order, so both paths return
// bit-identical results.
double masked_sum(const float* values, const std::uint8_t* mask, std::size_t n) {
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (std::size_t j = 0; j < 4; ++j) {
      lane[j] += mask[i + j] ? static_cast<double>(values[i + j]) : 0.0;
    }
  }
  double total = (lane[0] + lane[1]) + (lane[2] + lane[3]);
  for (; i < n; ++i) {
    if (mask[i]) total += static_cast<double>(values[i]);
  }
  return total;
}

}  // namespace fnr::kernels::scalar
