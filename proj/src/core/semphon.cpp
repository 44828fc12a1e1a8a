#include "semphon.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"

namespace braintools::semphon {

Metric parse_metric(const std::string& s) {
  if (s == "cosine") return Metric::Cosine;
  if (s == "euclidean") return Metric::Euclidean;
  throw InputError("unknown distance metric '" + s + "'");
}

double cosine_distance(const Vector& u, const Vector& v) {
  if (u.size() != v.size()) throw InputError("cosine_distance: dimension mismatch");
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) throw InputError("cosine_distance: zero vector");
  return std::clamp(1.0 - u.dot(v) / (nu * nv), 0.0, 2.0);
}

double euclidean_distance(const Vector& u, const Vector& v) {
  if (u.size() != v.size()) throw InputError("euclidean_distance: dimension mismatch");
  return (u - v).norm();
}

double distance(const Vector& u, const Vector& v, Metric metric) {
  return metric == Metric::Cosine ? cosine_distance(u, v) : euclidean_distance(u, v);
}

namespace {

double triple_delta(const WordTriple& t, Metric metric) {
  if (!t.word_vec.allFinite() || !t.semantic_vec.allFinite() || !t.phonetic_vec.allFinite())
    throw InputError("word triple '" + t.word + "' has non-finite entries");
  return distance(t.word_vec, t.semantic_vec, metric) - distance(t.word_vec, t.phonetic_vec, metric);
}

}  // namespace

double preference_d(std::span<const WordTriple> triples, Metric metric) {
  if (triples.empty()) throw InputError("preference_d: no word triples");
  double sum = 0.0;
  for (const auto& t : triples) sum += triple_delta(t, metric);
  return sum / static_cast<double>(triples.size());
}

std::map<int, LayerPreference> preference_by_layer(std::span<const WordTriple> triples, Metric metric) {
  if (triples.empty()) throw InputError("preference_by_layer: no word triples");
  std::map<int, LayerPreference> out;
  for (const auto& t : triples) {
    auto& lp = out[t.layer];
    lp.d += triple_delta(t, metric);
    ++lp.n_triples;
  }
  for (auto& [layer, lp] : out) lp.d /= static_cast<double>(lp.n_triples);
  return out;
}

}  // namespace braintools::semphon
