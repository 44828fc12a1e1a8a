#include "stats.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numeric>

#include "errors.hpp"

namespace braintools::stats {

WilcoxonMode parse_mode(const std::string& s) {
  if (s == "exact") return WilcoxonMode::Exact;
  if (s == "normal_approx" || s == "normal") return WilcoxonMode::NormalApprox;
  if (s == "auto") return WilcoxonMode::Auto;
  throw InputError("unknown Wilcoxon mode '" + s + "' (expected exact, normal_approx or auto)");
}

std::string to_string(WilcoxonMode mode) {
  switch (mode) {
    case WilcoxonMode::Exact: return "exact";
    case WilcoxonMode::NormalApprox: return "normal_approx";
    case WilcoxonMode::Auto: return "auto";
  }
  return "auto";
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

namespace {

// P(T+ <= w) under the null, where T+ is the sum of ranks receiving a
// positive sign. Works on doubled ranks, which are integers even with ties.
double exact_lower_tail(const std::vector<double>& ranks, double w) {
  std::vector<long> doubled(ranks.size());
  long total = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    doubled[i] = std::lround(2.0 * ranks[i]);
    total += doubled[i];
  }
  // counts[s] = number of sign assignments with doubled positive sum s.
  std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
  counts[0] = 1.0;
  long reach = 0;
  for (const long r : doubled) {
    for (long s = reach; s >= 0; --s)
      if (counts[static_cast<std::size_t>(s)] != 0.0) counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
    reach += r;
  }
  const long limit = std::lround(2.0 * w);
  double below = 0.0;
  for (long s = 0; s <= std::min(limit, total); ++s) below += counts[static_cast<std::size_t>(s)];
  return below / std::ldexp(1.0, static_cast<int>(ranks.size()));
}

double normal_two_sided(const std::vector<double>& abs_diffs, double w) {
  const auto m = static_cast<double>(abs_diffs.size());
  const double mean = m * (m + 1.0) / 4.0;
  double var = m * (m + 1.0) * (2.0 * m + 1.0) / 24.0;
  // Tie correction: subtract sum(t^3 - t) / 48 over tie groups.
  std::vector<double> sorted(abs_diffs.begin(), abs_diffs.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const auto t = static_cast<double>(j - i + 1);
    var -= (t * t * t - t) / 48.0;
    i = j + 1;
  }
  if (!(var > 0.0)) return 1.0;
  const double z = std::min(0.0, (w - mean + 0.5) / std::sqrt(var));
  return std::min(1.0, std::erfc(-z / std::sqrt(2.0)));
}

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, WilcoxonMode mode) {
  if (a.size() != b.size()) throw InputError("wilcoxon: paired samples differ in length");
  WilcoxonResult res;
  res.n = a.size();
  std::vector<double> abs_diffs;
  std::vector<bool> positive;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i]) || !std::isfinite(b[i])) throw InputError("wilcoxon: non-finite value");
    const double d = a[i] - b[i];
    if (d == 0.0) continue;
    abs_diffs.push_back(std::abs(d));
    positive.push_back(d > 0.0);
  }
  res.n_nonzero = abs_diffs.size();
  if (abs_diffs.empty()) {
    res.degenerate = true;
    res.p = 1.0;
    return res;
  }
  const auto ranks = average_ranks(abs_diffs);
  for (std::size_t i = 0; i < ranks.size(); ++i) (positive[i] ? res.w_plus : res.w_minus) += ranks[i];
  res.w = std::min(res.w_plus, res.w_minus);

  res.exact = mode == WilcoxonMode::Exact || (mode == WilcoxonMode::Auto && res.n_nonzero <= kExactLimit);
  const double p = res.exact ? std::min(1.0, 2.0 * exact_lower_tail(ranks, res.w)) : normal_two_sided(abs_diffs, res.w);
  res.p = std::max(p, DBL_MIN);
  return res;
}

WilcoxonResult wilcoxon_signed_rank(const PairedSample& sample, WilcoxonMode mode) {
  return wilcoxon_signed_rank(std::span<const double>(sample.a.data(), static_cast<std::size_t>(sample.a.size())),
                              std::span<const double>(sample.b.data(), static_cast<std::size_t>(sample.b.size())), mode);
}

}  // namespace braintools::stats
