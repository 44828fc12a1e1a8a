#include "doctest.h"
#include "errors.hpp"
#include "ridge.hpp"
#include "test_util.hpp"

using namespace braintools;
using namespace braintools::ridge;

namespace {

Matrix dense_ridge(const Matrix& x, const Matrix& y, double alpha) {
  const Matrix a = x.transpose() * x + alpha * Matrix::Identity(x.cols(), x.cols());
  return a.fullPivLu().solve(x.transpose() * y);
}

}  // namespace

TEST_CASE("identity design") {
  Vector y(4);
  y << 1, -2, 3, 0.5;
  const Matrix w = ridge_fit(Matrix::Identity(4, 4), y, 1e-12);
  CHECK(bt_test::max_abs_diff(w, y) < 1e-10);
  CHECK(ridge_fit(Matrix::Identity(1, 1), Matrix::Ones(1, 1), 1.0)(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("matches a dense normal-equation solve") {
  std::mt19937_64 gen(7);
  const Matrix x = bt_test::gaussian(40, 7, gen);
  const Matrix y = bt_test::gaussian(40, 3, gen);
  const Matrix w = ridge_fit(x, y, 10.0);
  const Matrix want = dense_ridge(x, y, 10.0);
  CHECK((w - want).norm() / want.norm() < 1e-8);
}

TEST_CASE("normal equations hold on random systems") {
  std::mt19937_64 gen(8);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix x = bt_test::gaussian(200, 50, gen);
    const Matrix y = bt_test::gaussian(200, 4, gen);
    const double alpha = std::pow(10.0, rep % 5 - 1);
    const Matrix w = ridge_fit(x, y, alpha);
    const Matrix xty = x.transpose() * y;
    const Matrix resid = (x.transpose() * x + alpha * Matrix::Identity(50, 50)) * w - xty;
    CHECK(resid.cwiseAbs().maxCoeff() < 1e-8 * xty.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("shared factorization equals per-alpha solves") {
  std::mt19937_64 gen(9);
  const Matrix x = bt_test::gaussian(60, 80, gen);  // wide: rank-deficient Gram
  const Matrix y = bt_test::gaussian(60, 5, gen);
  const RidgeFactor f(x);
  CHECK(f.rank() == 60);
  const Matrix uty = f.project(y);
  const Matrix x_new = bt_test::gaussian(9, 80, gen);
  const Matrix xv = f.right_project(x_new);
  for (double alpha : {1e-2, 1.0, 1e2, 1e4}) {
    const Matrix want = dense_ridge(x, y, alpha);
    const Matrix w = f.weights_from_projection(uty, alpha);
    CHECK((w - want).norm() / want.norm() < 1e-8);
    const Matrix pred = f.predict(xv, uty, alpha);
    CHECK((pred - x_new * want).norm() / (x_new * want).norm() < 1e-8);
  }
}

TEST_CASE("weight norm shrinks as alpha grows") {
  std::mt19937_64 gen(10);
  for (int rep = 0; rep < 100; ++rep) {
    const Matrix x = bt_test::gaussian(30, 8, gen);
    const Matrix y = bt_test::gaussian(30, 2, gen);
    const RidgeFactor f(x);
    const Matrix uty = f.project(y);
    double previous = std::numeric_limits<double>::infinity();
    for (double alpha = 1e-3; alpha < 1e5; alpha *= 3.0) {
      const double n = f.weights_from_projection(uty, alpha).norm();
      CHECK(n <= previous);
      previous = n;
    }
  }
}

TEST_CASE("ridge errors") {
  CHECK_THROWS_AS(RidgeFactor(Matrix::Zero(5, 3)), DegenerateError);
  CHECK_THROWS_AS(ridge_fit(Matrix::Ones(5, 2), Matrix::Ones(4, 1), 1.0), InputError);
  CHECK_THROWS_AS(ridge_fit(Matrix::Ones(5, 2), Matrix::Ones(5, 1), 0.0), InputError);
  Matrix bad = Matrix::Ones(3, 2);
  bad(1, 1) = std::nan("");
  CHECK_THROWS_AS(RidgeFactor{bad}, DataError);
}
