#include <cmath>

#include "ceiling.hpp"
#include "doctest.h"
#include "errors.hpp"
#include "test_util.hpp"

using namespace braintools;
using namespace braintools::ceiling;

namespace {

std::vector<FmriRun> runs_of(const std::vector<Matrix>& ms) {
  std::vector<FmriRun> out;
  for (std::size_t r = 0; r < ms.size(); ++r) {
    FmriRun run;
    run.data = ms[r];
    run.story_id = "test";
    run.participant_id = "p";
    run.repeat_index = static_cast<int>(r);
    out.push_back(std::move(run));
  }
  return out;
}

// Loop oracle from running sums.
double nc_oracle(const std::vector<Matrix>& reps, Eigen::Index v) {
  const double R = static_cast<double>(reps.size());
  const Eigen::Index n = reps[0].rows();
  auto var = [&](auto&& at) {
    double s = 0.0, ss = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) {
      const double x = at(t);
      s += x;
      ss += x * x;
    }
    return (ss - s * s / static_cast<double>(n)) / static_cast<double>(n - 1);
  };
  double sum_var = 0.0;
  for (const auto& m : reps) sum_var += var([&](Eigen::Index t) { return m(t, v); });
  const double var_sum = var([&](Eigen::Index t) {
    double acc = 0.0;
    for (const auto& m : reps) acc += m(t, v);
    return acc;
  });
  const double tp = sum_var / R;
  if (tp <= 0.0) return 0.0;
  double sp = (var_sum - sum_var) / (R * (R - 1.0));
  sp = std::min(std::max(sp, 0.0), tp);
  return std::sqrt(sp / tp);
}

// Mean NC of y_r = s + noise_r over voxels, generated in chunks.
double mean_nc(double signal_sd, int R, Eigen::Index n, Eigen::Index voxels, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  const Eigen::Index chunk = 100;
  double total = 0.0;
  for (Eigen::Index done = 0; done < voxels; done += chunk) {
    const Matrix s = signal_sd * bt_test::gaussian(n, chunk, gen);
    std::vector<Matrix> reps;
    for (int r = 0; r < R; ++r) reps.push_back(s + bt_test::gaussian(n, chunk, gen));
    std::vector<const Matrix*> ptrs;
    for (const auto& m : reps) ptrs.push_back(&m);
    total += SignalPowerCeiling{}.estimate(ptrs).sum();
  }
  return total / static_cast<double>(voxels);
}

}  // namespace

TEST_CASE("identical repeats give a ceiling of one") {
  std::mt19937_64 gen(1);
  Matrix y = bt_test::gaussian(50, 6, gen);
  y.col(5).setConstant(2.0);
  const auto map = estimate_noise_ceiling(runs_of({y, y, y}), 0.4);
  for (int v = 0; v < 5; ++v) CHECK(map.nc[v] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(map.nc[5] == 0.0);
  CHECK(map.n_kept() == 5);
}

TEST_CASE("matches the running-sum oracle") {
  std::mt19937_64 gen(2);
  for (int R : {2, 3, 10}) {
    std::vector<Matrix> reps;
    const Matrix s = bt_test::gaussian(80, 40, gen);
    for (int r = 0; r < R; ++r) reps.push_back(0.8 * s + bt_test::gaussian(80, 40, gen));
    const auto map = estimate_noise_ceiling(runs_of(reps), 0.4);
    for (Eigen::Index v = 0; v < 40; ++v) CHECK(map.nc[v] == doctest::Approx(nc_oracle(reps, v)).epsilon(1e-10));
  }
}

TEST_CASE("pure noise concentrates near zero") {
  CHECK(mean_nc(0.0, 10, 10000, 1000, 3) < 0.05);
}

TEST_CASE("unit signal and unit noise") {
  CHECK(mean_nc(1.0, 10, 5000, 1000, 4) == doctest::Approx(std::sqrt(0.5)).epsilon(0.05 / std::sqrt(0.5)));
}

TEST_CASE("invariant to common shift and positive scale") {
  std::mt19937_64 gen(5);
  const Matrix s = bt_test::gaussian(60, 20, gen);
  std::vector<Matrix> reps, moved;
  for (int r = 0; r < 4; ++r) {
    reps.push_back(s + bt_test::gaussian(60, 20, gen));
    moved.push_back(3.5 * reps.back().array() + 7.0);
  }
  const auto a = estimate_noise_ceiling(runs_of(reps), 0.4);
  const auto b = estimate_noise_ceiling(runs_of(moved), 0.4);
  CHECK(bt_test::max_abs_diff(a.nc, b.nc) < 1e-10);
  CHECK(a.keep_mask == threshold_mask(a.nc, 0.4));
}

TEST_CASE("more repeats never lower the expected ceiling") {
  // Monte-Carlo batches of 300 voxels at SNR 0.5.
  double previous = 0.0;
  for (int R : {2, 4, 8, 16}) {
    const double m = mean_nc(std::sqrt(0.5), R, 400, 300, 100 + static_cast<std::uint64_t>(R));
    CHECK(m >= previous - 0.01);
    previous = m;
  }
}

TEST_CASE("ceiling input errors") {
  const Matrix y = Matrix::Random(10, 3);
  CHECK_THROWS_AS(estimate_noise_ceiling(runs_of({y}), 0.4), InputError);
  CHECK_THROWS_AS(estimate_noise_ceiling(runs_of({y, Matrix::Random(9, 3)}), 0.4), InputError);
  auto runs = runs_of({y, y});
  runs[1].story_id = "other";
  CHECK_THROWS_AS(estimate_noise_ceiling(runs, 0.4), InputError);
}

TEST_CASE("threshold mask") {
  Vector nc(4);
  nc << 0.1, 0.4, 0.41, 0.9;
  CHECK(threshold_mask(nc, 0.4) == VoxelMask{false, false, true, true});
}

TEST_CASE("apply mask") {
  Matrix y(2, 3);
  y << 1, 2, 3, 4, 5, 6;
  const auto m = apply_mask(y, VoxelMask{true, false, true});
  Matrix want(2, 2);
  want << 1, 3, 4, 6;
  CHECK(m.data == want);
  CHECK(m.voxel_index == std::vector<std::size_t>{0, 2});
  CHECK(apply_mask(y, VoxelMask(3, true)).data == y);
  CHECK_THROWS_AS(apply_mask(y, VoxelMask(3, false)), InputError);
  CHECK_THROWS_AS(apply_mask(y, VoxelMask(2, true)), InputError);

  std::mt19937_64 gen(6);
  const Matrix big = bt_test::gaussian(20, 100, gen);
  VoxelMask mask(100);
  for (auto&& b : mask) b = gen() % 3 == 0;
  mask[0] = true;
  const auto got = apply_mask(big, mask);
  Eigen::Index c = 0;
  for (std::size_t v = 0; v < 100; ++v)
    if (mask[v]) CHECK(got.data.col(c++) == big.col(static_cast<Eigen::Index>(v)));
  CHECK(c == got.data.cols());
}
