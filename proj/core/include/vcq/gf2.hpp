#pragma once

#include <cstdint>
#include <span>

namespace vcq::gf2 {

/// Rank over GF(2) of a matrix whose rows are packed into 64-bit words.
int rank_of_rows(std::span<const uint64_t> rows);

/// Monte Carlo estimate of the decoding failure probability of a random
/// binary parity-check code: samples (block_length - info_bits) x
/// block_length matrices, erases a fixed set of `erasures` columns, and
/// declares failure when those columns are linearly dependent. Block
/// lengths up to 64 bits. Deterministic given the seed.
double failure_oracle(int block_length, int info_bits, int erasures, int trials,
                      uint64_t seed);

}  // namespace vcq::gf2
