#include "vcq/gf2.hpp"

#include <array>
#include <bit>
#include <stdexcept>

#include "vcq/rng.hpp"

namespace vcq::gf2 {

int rank_of_rows(std::span<const uint64_t> rows) {
  std::array<uint64_t, 64> pivot{};
  int rank = 0;
  for (uint64_t word : rows) {
    while (word != 0) {
      const int lead = 63 - std::countl_zero(word);
      if (pivot[lead] == 0) {
        pivot[lead] = word;
        ++rank;
        break;
      }
      word ^= pivot[lead];
    }
  }
  return rank;
}

double failure_oracle(int block_length, int info_bits, int erasures, int trials,
                      uint64_t seed) {
  if (block_length < 1 || block_length > 64) {
    throw std::invalid_argument("gf2::failure_oracle: block_length must lie in [1, 64]");
  }
  if (info_bits < 1 || info_bits > block_length) {
    throw std::invalid_argument("gf2::failure_oracle: info_bits must lie in [1, block_length]");
  }
  if (erasures < 0 || erasures > block_length) {
    throw std::invalid_argument("gf2::failure_oracle: erasures must lie in [0, block_length]");
  }
  if (trials < 1) {
    throw std::invalid_argument("gf2::failure_oracle: trials must be >= 1");
  }
  if (erasures == 0) return 0.0;

  const int redundancy = block_length - info_bits;
  const uint64_t row_mask =
      (block_length == 64) ? ~uint64_t{0} : (uint64_t{1} << block_length) - 1;
  // Fixed erased set: the first `erasures` columns.
  const uint64_t erased_mask =
      (erasures == 64) ? ~uint64_t{0} : (uint64_t{1} << erasures) - 1;

  CounterRng rng(seed);
  std::array<uint64_t, 64> sub{};
  long failures = 0;
  for (int trial = 0; trial < trials; ++trial) {
    for (int row = 0; row < redundancy; ++row) {
      const uint64_t h_row =
          rng.bits(0, static_cast<uint64_t>(trial) * 64 + row) & row_mask;
      sub[row] = h_row & erased_mask;
    }
    const int rank = rank_of_rows(std::span<const uint64_t>(sub.data(), redundancy));
    if (rank < erasures) ++failures;
  }
  return static_cast<double>(failures) / trials;
}

}  // namespace vcq::gf2
