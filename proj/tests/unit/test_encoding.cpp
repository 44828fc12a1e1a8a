#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "encoding.hpp"
#include "errors.hpp"
#include "log.hpp"
#include "stats.hpp"
#include "test_util.hpp"

using namespace braintools;
using namespace braintools::encoding;

namespace {

struct QuietLog {
  QuietLog() {
    log::set_sink([](std::string_view, std::string_view) {});
  }
  ~QuietLog() { log::set_sink({}); }
};

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  // Average ranks of raw values via the stats helper (which expects non-negative input).
  auto ranks = [](std::vector<double> v) {
    const double lo = *std::min_element(v.begin(), v.end());
    for (auto& x : v) x -= lo;
    return stats::average_ranks(v);
  };
  const auto ra = ranks(a), rb = ranks(b);
  return pearson_r(std::span<const double>(ra), std::span<const double>(rb));
}

ceiling::NoiseCeilingMap nc_map(const Vector& nc, double threshold = 0.0) {
  ceiling::NoiseCeilingMap m;
  m.nc = nc;
  m.threshold = threshold;
  m.keep_mask = ceiling::threshold_mask(nc, threshold);
  return m;
}

}  // namespace

TEST_CASE("pearson") {
  const std::vector<double> a{1, 2, 3, 4}, b{1, 2, 3, 5}, neg{-1, -2, -3, -4};
  CHECK(pearson_r(std::span<const double>(a), std::span<const double>(a)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pearson_r(std::span<const double>(a), std::span<const double>(neg)) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(pearson_r(std::span<const double>(a), std::span<const double>(b)) ==
        doctest::Approx(0.9827076298239908).epsilon(1e-14));
  bool constant = false;
  const std::vector<double> flat{2, 2, 2, 2};
  CHECK(pearson_r(std::span<const double>(a), std::span<const double>(flat), &constant) == 0.0);
  CHECK(constant);
  const std::vector<double> three{1, 2, 3};
  CHECK_THROWS_AS(pearson_r(std::span<const double>(a), std::span<const double>(three)), InputError);

  std::mt19937_64 gen(1);
  const Matrix m = bt_test::gaussian(30, 2, gen);
  const Vector u = m.col(0), v = m.col(1);
  const double r = pearson_r(u, v);
  CHECK(pearson_r(Vector((3.0 * u).array() + 2.0), v) == doctest::Approx(r).epsilon(1e-12));
  CHECK(pearson_r(Vector(-u), v) == doctest::Approx(-r).epsilon(1e-12));
}

TEST_CASE("folds") {
  const Eigen::Index lens[] = {10, 12, 8};
  CHECK(make_folds(lens, 30, 0) == std::vector<Eigen::Index>{10, 12, 8});
  CHECK(make_folds(lens, 30, 3) == std::vector<Eigen::Index>{10, 10, 10});
  QuietLog quiet;
  const Eigen::Index one[] = {30};
  CHECK(make_folds(one, 30, 0).size() == 5);
  CHECK_THROWS_AS(make_folds(lens, 31, 0), InputError);
}

TEST_CASE("noiseless targets select the smallest alpha") {
  std::mt19937_64 gen(2);
  const Matrix x = bt_test::gaussian(120, 10, gen);
  const Matrix y = x * bt_test::gaussian(10, 20, gen);
  RidgeConfig cfg;
  cfg.alpha_grid = logspace_grid(1e-2, 1e4, 7);
  const Eigen::Index lens[] = {40, 40, 40};
  const auto sel = select_alphas(x, y, lens, cfg);
  for (Eigen::Index v = 0; v < 20; ++v) CHECK(sel.alpha_per_voxel[v] == cfg.alpha_grid.front());
}

TEST_CASE("pure noise favours large alphas") {
  std::mt19937_64 gen(3);
  RidgeConfig cfg;
  const Eigen::Index lens[] = {50, 50, 50, 50};
  std::vector<double> chosen;
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix x = bt_test::gaussian(200, 20, gen);
    const Matrix y = bt_test::gaussian(200, 50, gen);
    const auto sel = select_alphas(x, y, lens, cfg);
    chosen.insert(chosen.end(), sel.alpha_per_voxel.data(), sel.alpha_per_voxel.data() + 50);
  }
  std::nth_element(chosen.begin(), chosen.begin() + chosen.size() / 2, chosen.end());
  const double median_grid = std::sqrt(cfg.alpha_grid[4] * cfg.alpha_grid[5]);
  CHECK(chosen[chosen.size() / 2] >= median_grid);
}

TEST_CASE("selected alpha tracks the noise level") {
  std::mt19937_64 gen(4);
  const Eigen::Index n = 400, p = 40, voxels = 200;
  // Decaying feature spectrum so that shrinkage changes the prediction shape.
  Vector scale(p);
  for (Eigen::Index j = 0; j < p; ++j) scale[j] = std::pow(10.0, -2.0 * static_cast<double>(j) / (p - 1));
  const Matrix x = bt_test::gaussian(n, p, gen) * scale.asDiagonal();
  const Matrix w = bt_test::gaussian(p, voxels, gen);
  Matrix y = x * w;
  std::vector<double> noise(voxels);
  for (Eigen::Index v = 0; v < voxels; ++v) {
    noise[static_cast<std::size_t>(v)] = std::pow(10.0, -1.0 + 2.5 * static_cast<double>(v) / (voxels - 1));
    y.col(v) += noise[static_cast<std::size_t>(v)] * bt_test::gaussian(n, 1, gen);
  }
  RidgeConfig cfg;
  cfg.alpha_grid = logspace_grid(1e-1, 1e5, 13);
  const Eigen::Index lens[] = {80, 80, 80, 80, 80};
  const auto sel = select_alphas(x, y, lens, cfg);
  const std::vector<double> alphas(sel.alpha_per_voxel.data(), sel.alpha_per_voxel.data() + voxels);
  const double rs = spearman(noise, alphas);
  MESSAGE("spearman(noise, alpha) = " << rs);
  CHECK(rs >= 0.7);
}

TEST_CASE("exact linear test targets give rho of one") {
  std::mt19937_64 gen(5);
  const Matrix x = bt_test::gaussian(150, 6, gen);
  const Matrix y = x * bt_test::gaussian(6, 12, gen) + 0.5 * bt_test::gaussian(150, 12, gen);
  const Eigen::Index lens[] = {50, 50, 50};
  EncodingResult model = fit_encoding(x, y, lens, RidgeConfig{});
  const Matrix x_test = bt_test::gaussian(40, 6, gen);
  const Matrix y_test = model.predict(x_test);
  const Vector rho = evaluate_encoding(model, x_test, y_test);
  CHECK((rho.array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(evaluate_encoding(model, x_test, y_test.leftCols(3)), InputError);
  CHECK_THROWS_AS(evaluate_encoding(model, x_test.topRows(5), y_test), InputError);
}

TEST_CASE("shuffled noise targets give rho near zero") {
  std::mt19937_64 gen(6);
  const Matrix x = bt_test::gaussian(300, 10, gen);
  const Matrix y = x * bt_test::gaussian(10, 500, gen) + bt_test::gaussian(300, 500, gen);
  const Eigen::Index lens[] = {100, 100, 100};
  EncodingResult model = fit_encoding(x, y, lens, RidgeConfig{});
  const Matrix x_test = bt_test::gaussian(200, 10, gen);
  Matrix noise = bt_test::gaussian(200, 500, gen);
  std::vector<Eigen::Index> order(200);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), gen);
  const Matrix shuffled = noise(order, Eigen::all);
  const Vector rho = evaluate_encoding(model, x_test, shuffled);
  CHECK(std::abs(rho.mean()) <= 0.02);
}

TEST_CASE("held-out rho follows the analytic attenuation") {
  std::mt19937_64 gen(7);
  const Eigen::Index p = 8, voxels = 1000;
  for (double s : {0.5, 1.0, 2.0}) {
    const Matrix w = bt_test::gaussian(p, voxels, gen);
    auto make = [&](Eigen::Index n, Matrix& x, Matrix& y) {
      x = bt_test::gaussian(n, p, gen);
      Matrix sig = x * w;
      for (Eigen::Index v = 0; v < voxels; ++v) {
        const double sd = std::sqrt((sig.col(v).array() - sig.col(v).mean()).square().mean());
        sig.col(v) /= sd;
      }
      y = sig + bt_test::gaussian(n, voxels, gen) / std::sqrt(s);
    };
    Matrix x, y, xt, yt;
    make(1500, x, y);
    make(500, xt, yt);
    const Eigen::Index lens[] = {500, 500, 500};
    EncodingResult model = fit_encoding(x, y, lens, RidgeConfig{});
    const double mean_rho = evaluate_encoding(model, xt, yt).mean();
    CAPTURE(s);
    CHECK(mean_rho == doctest::Approx(std::sqrt(s / (1 + s))).epsilon(0.05 / std::sqrt(s / (1 + s))));
  }
}

TEST_CASE("normalized alignment arithmetic") {
  Vector rho(2), nc(2);
  rho << 0.2, 0.3;
  nc << 0.4, 0.6;
  const RoiMask both{"both", {0, 1}};
  CHECK(normalized_alignment(rho, nc_map(nc), both).b == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(normalized_alignment(nc, nc_map(nc), both).b == doctest::Approx(1.0).epsilon(1e-15));

  // Voxels below threshold are excluded; none left is an ROI error.
  CHECK(normalized_alignment(rho, nc_map(nc, 0.5), both).voxels == std::vector<std::size_t>{1});
  CHECK_THROWS_AS(normalized_alignment(rho, nc_map(nc, 0.9), both), RoiError);
  CHECK_THROWS_AS(normalized_alignment(rho, nc_map(nc), RoiMask{"x", {2}}), RoiError);
  CHECK_THROWS_AS(normalized_alignment(Vector::Ones(3), nc_map(nc), both), InputError);
}

TEST_CASE("normalized alignment loop oracle and voxel-order invariance") {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(-0.2, 0.9), unc(0.05, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    Vector rho(100), nc(100);
    for (int v = 0; v < 100; ++v) {
      rho[v] = u(gen);
      nc[v] = unc(gen);
    }
    std::vector<std::size_t> all(100);
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), gen);
    std::vector<std::size_t> pick(all.begin(), all.begin() + 30);
    std::sort(pick.begin(), pick.end());
    const auto map = nc_map(nc, 0.3);
    double sum = 0.0;
    int count = 0;
    for (std::size_t v : pick)
      if (nc[static_cast<Eigen::Index>(v)] > 0.3) {
        sum += rho[static_cast<Eigen::Index>(v)] / nc[static_cast<Eigen::Index>(v)];
        ++count;
      }
    if (count == 0) continue;
    const double b = normalized_alignment(rho, map, RoiMask{"r", pick}).b;
    CHECK(std::abs(b - sum / count) < 1e-12);

    // Relabel voxels through a permutation; B is unchanged.
    std::vector<std::size_t> perm(100);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    Vector rho2(100), nc2(100);
    for (std::size_t v = 0; v < 100; ++v) {
      rho2[static_cast<Eigen::Index>(perm[v])] = rho[static_cast<Eigen::Index>(v)];
      nc2[static_cast<Eigen::Index>(perm[v])] = nc[static_cast<Eigen::Index>(v)];
    }
    std::vector<std::size_t> pick2;
    for (std::size_t v : pick) pick2.push_back(perm[v]);
    std::sort(pick2.begin(), pick2.end());
    CHECK(std::abs(normalized_alignment(rho2, nc_map(nc2, 0.3), RoiMask{"r", pick2}).b - b) < 1e-12);
  }
}

TEST_CASE("ridge config validation") {
  RidgeConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.alpha_grid = {};
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg.alpha_grid = {10, 1};
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg.alpha_grid = {1, 10};
  cfg.n_folds = 1;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  const auto g = logspace_grid(1.0, 1e4, 10);
  CHECK(g.size() == 10);
  CHECK(g.front() == doctest::Approx(1.0));
  CHECK(g.back() == doctest::Approx(1e4));
}
