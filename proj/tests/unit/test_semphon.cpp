#include <cmath>

#include "doctest.h"
#include "errors.hpp"
#include "semphon.hpp"
#include "test_util.hpp"

using namespace braintools;
using namespace braintools::semphon;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

std::vector<WordTriple> random_triples(std::mt19937_64& gen, int n, int dim, int layers = 1) {
  std::vector<WordTriple> out;
  for (int i = 0; i < n; ++i) {
    const Matrix m = bt_test::gaussian(dim, 3, gen);
    out.push_back({m.col(0), m.col(1), m.col(2), "w" + std::to_string(i), i % layers});
  }
  return out;
}

}  // namespace

TEST_CASE("cosine distance") {
  const Vector u = vec({1, 2, 3});
  CHECK(cosine_distance(u, u) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(cosine_distance(vec({1, 0}), vec({0, 5})) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_distance(u, -u) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK_THROWS_AS(cosine_distance(u, Vector::Zero(3)), InputError);
  CHECK(euclidean_distance(vec({0, 0}), vec({3, 4})) == doctest::Approx(5.0));
  CHECK_THROWS_AS(distance(u, vec({1, 2}), Metric::Euclidean), InputError);
}

TEST_CASE("preference of a single triple") {
  // Cosine distances 0.5 (semantic) and 0.3 (phonetic) from the first axis.
  const double cs = 0.5, cp = 0.7;
  const WordTriple t{vec({1, 0}), vec({cs, std::sqrt(1 - cs * cs)}), vec({cp, std::sqrt(1 - cp * cp)}), "w", 0};
  const std::vector<WordTriple> one{t};
  CHECK(preference_d(one) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("equal neighbours give zero") {
  std::mt19937_64 gen(1);
  auto triples = random_triples(gen, 20, 6);
  for (auto& t : triples) t.phonetic_vec = t.semantic_vec;
  CHECK(preference_d(triples) == 0.0);
  CHECK(preference_d(triples, Metric::Euclidean) == 0.0);
}

TEST_CASE("loop oracle, sign and rotation invariance") {
  std::mt19937_64 gen(2);
  const auto triples = random_triples(gen, 100, 8);
  double sum = 0.0;
  for (const auto& t : triples) {
    auto cosd = [](const Vector& a, const Vector& b) {
      double dot = 0, na = 0, nb = 0;
      for (Eigen::Index i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
      }
      return 1.0 - dot / std::sqrt(na * nb);
    };
    sum += cosd(t.word_vec, t.semantic_vec) - cosd(t.word_vec, t.phonetic_vec);
  }
  const double d = preference_d(triples);
  CHECK(std::abs(d - sum / 100.0) < 1e-12);

  // A common orthogonal rotation leaves d unchanged.
  const Eigen::HouseholderQR<Matrix> qr(bt_test::gaussian(8, 8, gen));
  const Matrix q = qr.householderQ();
  auto rotated = triples;
  for (auto& t : rotated) {
    t.word_vec = q * t.word_vec;
    t.semantic_vec = q * t.semantic_vec;
    t.phonetic_vec = q * t.phonetic_vec;
  }
  CHECK(std::abs(preference_d(rotated) - d) < 1e-12);

  // Semantic neighbours pulled towards the word make d negative.
  auto closer = triples;
  for (auto& t : closer) t.semantic_vec = t.word_vec + 0.05 * t.semantic_vec;
  CHECK(preference_d(closer) < 0.0);
}

TEST_CASE("per-layer preference") {
  std::mt19937_64 gen(3);
  const auto triples = random_triples(gen, 30, 4, 3);
  const auto by_layer = preference_by_layer(triples);
  REQUIRE(by_layer.size() == 3);
  for (const auto& [layer, pref] : by_layer) {
    std::vector<WordTriple> subset;
    for (const auto& t : triples)
      if (t.layer == layer) subset.push_back(t);
    CHECK(pref.n_triples == 10);
    CHECK(pref.d == doctest::Approx(preference_d(subset)).epsilon(1e-14));
  }
}

TEST_CASE("preference errors") {
  CHECK_THROWS_AS(preference_d(std::vector<WordTriple>{}), InputError);
  const std::vector<WordTriple> mismatch{{vec({1, 0}), vec({1, 0, 0}), vec({0, 1}), "w", 0}};
  CHECK_THROWS_AS(preference_d(mismatch), InputError);
  CHECK(parse_metric("euclidean") == Metric::Euclidean);
  CHECK_THROWS_AS(parse_metric("manhattan"), InputError);
}
