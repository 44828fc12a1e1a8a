#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "types.hpp"

namespace braintools::stats {

// Fewest paired observations for which a test is reported.
inline constexpr std::size_t kMinPairs = 5;
// Largest number of non-zero differences handled by exact enumeration in Auto mode.
inline constexpr std::size_t kExactLimit = 20;

enum class WilcoxonMode { Exact, NormalApprox, Auto };

WilcoxonMode parse_mode(const std::string& s);
std::string to_string(WilcoxonMode mode);

struct PairedSample {
  Vector a;
  Vector b;
  std::vector<std::string> labels;
};

struct WilcoxonResult {
  double w = 0.0;  // min(W+, W-)
  double w_plus = 0.0;
  double w_minus = 0.0;
  double p = 1.0;  // two-sided
  std::size_t n = 0;          // pairs
  std::size_t n_nonzero = 0;  // after dropping zero differences
  bool exact = false;
  bool degenerate = false;  // all differences zero; p = 1
};

// Signed ranks of d = a - b: zero differences dropped, average ranks for
// ties. Two-sided p = min(1, 2 P(T <= min(W+, W-))). The exact null is the
// distribution of the positive-rank sum over all 2^m sign assignments;
// the normal approximation uses the tie-corrected variance with a 0.5
// continuity correction.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    WilcoxonMode mode = WilcoxonMode::Auto);
WilcoxonResult wilcoxon_signed_rank(const PairedSample& sample, WilcoxonMode mode = WilcoxonMode::Auto);

// Average ranks (1-based) of non-negative values.
std::vector<double> average_ranks(std::span<const double> values);

}  // namespace braintools::stats
