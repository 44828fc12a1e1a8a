#pragma once

// Semantic-phonetic preference: mean over word triples of
// dist(word, semantic neighbour) - dist(word, phonetic neighbour).
// Negative values mean semantic neighbours sit closer than phonetic ones.

#include <map>
#include <span>
#include <string>

#include "types.hpp"

namespace braintools::semphon {

enum class Metric { Cosine, Euclidean };

Metric parse_metric(const std::string& s);

struct WordTriple {
  Vector word_vec;
  Vector semantic_vec;
  Vector phonetic_vec;
  std::string word;
  int layer = 0;
};

// 1 - u.v / (|u||v|), in [0, 2]. Zero vectors -> InputError.
double cosine_distance(const Vector& u, const Vector& v);
double euclidean_distance(const Vector& u, const Vector& v);
double distance(const Vector& u, const Vector& v, Metric metric);

double preference_d(std::span<const WordTriple> triples, Metric metric = Metric::Cosine);

struct LayerPreference {
  double d = 0.0;
  std::size_t n_triples = 0;
};

std::map<int, LayerPreference> preference_by_layer(std::span<const WordTriple> triples, Metric metric = Metric::Cosine);

}  // namespace braintools::semphon
