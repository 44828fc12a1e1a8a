#pragma once

// Block permutation of fMRI targets for the random-target baseline.

#include <cstdint>
#include <vector>

#include "types.hpp"

namespace braintools::permute {

inline constexpr Eigen::Index kDefaultBlockLen = 10;

struct BlockPermutation {
  Eigen::Index block_len = kDefaultBlockLen;
  std::vector<std::size_t> mapping;  // output block k takes input block mapping[k]
  std::uint64_t seed = 0;
};

// Uniform random cyclic permutation (Sattolo) of n_blocks drawn from
// SplitMix64(seed): for i = n-1 .. 1, j = below(i), swap(p[i], p[j]).
// Every cyclic permutation is a derangement for n >= 2.
std::vector<std::size_t> derangement(std::size_t n_blocks, std::uint64_t seed);

BlockPermutation make_block_permutation(Eigen::Index n_trs, Eigen::Index block_len, std::uint64_t seed);

// Rows split into ceil(n / block_len) blocks (the last may be short) and
// reassembled in permuted block order. Requires n_trs >= 2 * block_len.
Matrix block_permute(const Matrix& y, Eigen::Index block_len, std::uint64_t seed);
Matrix apply_block_permutation(const Matrix& y, const BlockPermutation& perm);

}  // namespace braintools::permute
