#include "permute.hpp"

#include <numeric>
#include <utility>

#include "errors.hpp"
#include "rng.hpp"

namespace braintools::permute {

std::vector<std::size_t> derangement(std::size_t n_blocks, std::uint64_t seed) {
  std::vector<std::size_t> p(n_blocks);
  std::iota(p.begin(), p.end(), std::size_t{0});
  rng::SplitMix64 gen(seed);
  for (std::size_t i = n_blocks; i-- > 1;) {
    const auto j = static_cast<std::size_t>(gen.below(i));
    std::swap(p[i], p[j]);
  }
  return p;
}

BlockPermutation make_block_permutation(Eigen::Index n_trs, Eigen::Index block_len, std::uint64_t seed) {
  if (block_len < 1) throw InputError("block_permute: block length must be positive");
  if (n_trs < 2 * block_len)
    throw InputError("block_permute: " + std::to_string(n_trs) + " TRs is fewer than two blocks of " +
                     std::to_string(block_len));
  BlockPermutation perm;
  perm.block_len = block_len;
  perm.seed = seed;
  perm.mapping = derangement(static_cast<std::size_t>((n_trs + block_len - 1) / block_len), seed);
  return perm;
}

Matrix apply_block_permutation(const Matrix& y, const BlockPermutation& perm) {
  const Eigen::Index n = y.rows();
  const Eigen::Index len = perm.block_len;
  if (static_cast<std::size_t>((n + len - 1) / len) != perm.mapping.size())
    throw InputError("block permutation does not match the number of rows");
  Matrix out(n, y.cols());
  Eigen::Index row = 0;
  for (const std::size_t src : perm.mapping) {
    const Eigen::Index begin = static_cast<Eigen::Index>(src) * len;
    const Eigen::Index size = std::min(len, n - begin);
    out.middleRows(row, size) = y.middleRows(begin, size);
    row += size;
  }
  return out;
}

Matrix block_permute(const Matrix& y, Eigen::Index block_len, std::uint64_t seed) {
  return apply_block_permutation(y, make_block_permutation(y.rows(), block_len, seed));
}

}  // namespace braintools::permute
