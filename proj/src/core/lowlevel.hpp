#pragma once

// Low-level stimulus features, their linear removal from model
// representations, and the resulting alignment impact.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "encoding.hpp"
#include "types.hpp"

namespace braintools::lowlevel {

enum class FeatureKind { PowerSpectrum, Diphone, Triphone, Articulation, Custom };

std::string to_string(FeatureKind kind);
FeatureKind parse_kind(const std::string& s);

inline constexpr int kPowerSpectrumBands = 448;
inline constexpr double kBandLowHz = 25.0;
inline constexpr double kBandWidthHz = 33.5;
inline constexpr int kDiphoneCount = 858;
inline constexpr int kArticulationDims = 22;

struct LowLevelFeature {
  FeatureKind kind = FeatureKind::Custom;
  FeatureSeries series;

  // Width / value-domain checks per kind (448 non-negative bands, 858 binary
  // diphones, 22 articulation dims, binary triphones).
  void validate() const;
};

// Band power of each TR-length segment of a mono waveform: Hann-windowed
// |FFT|^2 summed over 448 contiguous 33.5 Hz bands starting at 25 Hz.
LowLevelFeature power_spectrum_features(std::span<const double> waveform, double sample_rate_hz, double tr_s);

struct PhoneInterval {
  std::string phone;
  double start_s = 0.0;
  double end_s = 0.0;
};

struct PhoneVocabulary {
  std::vector<std::string> ngrams;  // phones joined with '-'
  bool oov_column = false;          // extra trailing column for unseen n-grams
};

std::string ngram_key(std::span<const PhoneInterval> phones);

// Observed n-grams of an alignment, sorted and unique.
std::vector<std::string> observed_ngrams(std::span<const PhoneInterval> alignment, int order);

// Binary presence of each n-gram of adjacent phones whose span [first start,
// last end] intersects TR segment [j*tr, (j+1)*tr). Identical duplicate
// entries are dropped; unsorted input -> InputError.
LowLevelFeature phone_onehot_features(std::span<const PhoneInterval> alignment, int order,
                                      const PhoneVocabulary& vocabulary, double tr_s, Eigen::Index n_trs);

struct Residuals {
  Matrix train;
  Matrix test;
  Vector alpha_per_dim;
};

// Residual variance fraction below which a representation column counts as
// fully explained by the low-level features.
inline constexpr double kExplainedTolerance = 1e-10;

// Ridge map F: low-level -> representations, fit with an intercept on train
// rows only (alpha by CV over `story_lengths` folds, or 5 contiguous folds),
// then subtracted from both splits. Columns whose residual keeps less than
// kExplainedTolerance of their train variance are set to zero.
Residuals residualize(const Matrix& reps_train, const Matrix& reps_test, const Matrix& low_train,
                      const Matrix& low_test, const std::vector<double>& alpha_grid,
                      std::span<const Eigen::Index> story_lengths = {});

std::vector<double> default_residual_grid();

// R = 100 (B_o - B_r) / B_o; nullopt when |B_o| < 1e-9.
std::optional<double> low_level_impact(double b_original, double b_residual);

struct ImpactEntry {
  double b_original = 0.0;
  double b_residual = 0.0;
  std::optional<double> r;
};

struct ImpactReport {
  std::map<std::string, ImpactEntry> per_roi;
  FeatureKind feature_kind = FeatureKind::Custom;
  std::string feature_name;
  std::string model_id;
};

}  // namespace braintools::lowlevel
