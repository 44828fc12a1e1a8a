#include "lowlevel.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <unordered_map>
#include <unsupported/Eigen/FFT>

#include "errors.hpp"

namespace braintools::lowlevel {

std::string to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::PowerSpectrum: return "power_spectrum";
    case FeatureKind::Diphone: return "diphone";
    case FeatureKind::Triphone: return "triphone";
    case FeatureKind::Articulation: return "articulation";
    case FeatureKind::Custom: return "custom";
  }
  return "custom";
}

FeatureKind parse_kind(const std::string& s) {
  if (s == "power_spectrum") return FeatureKind::PowerSpectrum;
  if (s == "diphone") return FeatureKind::Diphone;
  if (s == "triphone") return FeatureKind::Triphone;
  if (s == "articulation") return FeatureKind::Articulation;
  return FeatureKind::Custom;
}

void LowLevelFeature::validate() const {
  series.validate();
  const auto dims = series.n_dims();
  const auto& d = series.data;
  auto binary = [&] { return ((d.array() == 0.0) || (d.array() == 1.0)).all(); };
  switch (kind) {
    case FeatureKind::PowerSpectrum:
      if (dims != kPowerSpectrumBands)
        throw InputError("power spectrum features need " + std::to_string(kPowerSpectrumBands) + " bands, got " +
                         std::to_string(dims));
      if ((d.array() < 0.0).any()) throw InputError("power spectrum features must be non-negative");
      break;
    case FeatureKind::Diphone:
      if (dims != kDiphoneCount)
        throw InputError("diphone features need " + std::to_string(kDiphoneCount) + " columns, got " +
                         std::to_string(dims));
      if (!binary()) throw InputError("diphone features must be 0/1");
      break;
    case FeatureKind::Triphone:
      if (!binary()) throw InputError("triphone features must be 0/1");
      break;
    case FeatureKind::Articulation:
      if (dims != kArticulationDims)
        throw InputError("articulation features need " + std::to_string(kArticulationDims) + " columns, got " +
                         std::to_string(dims));
      break;
    case FeatureKind::Custom: break;
  }
}

LowLevelFeature power_spectrum_features(std::span<const double> waveform, double sample_rate_hz, double tr_s) {
  const double top_hz = kBandLowHz + kPowerSpectrumBands * kBandWidthHz;
  if (sample_rate_hz < 30000.0)
    throw InputError("power spectrum needs a sample rate >= 30 kHz to reach " + std::to_string(top_hz) + " Hz, got " +
                     std::to_string(sample_rate_hz));
  if (!(tr_s > 0.0)) throw InputError("power spectrum: TR must be positive");
  const auto seg = static_cast<std::size_t>(std::llround(tr_s * sample_rate_hz));
  const std::size_t n_rows = waveform.size() / seg;
  if (n_rows == 0) throw InputError("power spectrum: waveform shorter than one TR");

  std::vector<double> window(seg);
  for (std::size_t i = 0; i < seg; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(seg));

  // Band of every FFT bin below Nyquist, -1 outside [25 Hz, top).
  const double bin_hz = sample_rate_hz / static_cast<double>(seg);
  std::vector<int> band_of(seg / 2 + 1, -1);
  for (std::size_t k = 0; k < band_of.size(); ++k) {
    const double f = static_cast<double>(k) * bin_hz;
    if (f < kBandLowHz) continue;
    const auto b = static_cast<int>(std::floor((f - kBandLowHz) / kBandWidthHz));
    if (b < kPowerSpectrumBands) band_of[k] = b;
  }

  LowLevelFeature out;
  out.kind = FeatureKind::PowerSpectrum;
  out.series.data = Matrix::Zero(static_cast<Eigen::Index>(n_rows), kPowerSpectrumBands);
  out.series.sample_rate_hz = 1.0 / tr_s;
  out.series.t0_s = 0.0;
  out.series.name = "power_spectrum";

  Eigen::FFT<double> fft;
  std::vector<double> frame(seg);
  std::vector<std::complex<double>> spectrum;
  for (std::size_t r = 0; r < n_rows; ++r) {
    for (std::size_t i = 0; i < seg; ++i) frame[i] = waveform[r * seg + i] * window[i];
    fft.fwd(spectrum, frame);
    for (std::size_t k = 0; k < band_of.size(); ++k) {
      if (band_of[k] < 0) continue;
      out.series.data(static_cast<Eigen::Index>(r), band_of[k]) += std::norm(spectrum[k]) / static_cast<double>(seg);
    }
  }
  return out;
}

std::string ngram_key(std::span<const PhoneInterval> phones) {
  std::string key;
  for (std::size_t i = 0; i < phones.size(); ++i) {
    if (i > 0) key += '-';
    key += phones[i].phone;
  }
  return key;
}

namespace {

std::vector<PhoneInterval> clean_alignment(std::span<const PhoneInterval> alignment) {
  std::vector<PhoneInterval> out;
  for (std::size_t i = 0; i < alignment.size(); ++i) {
    const auto& p = alignment[i];
    if (!(p.end_s >= p.start_s)) throw InputError("phone '" + p.phone + "' ends before it starts");
    if (i > 0 && p.start_s < alignment[i - 1].start_s) throw InputError("phone alignment is not sorted by start time");
    if (!out.empty() && out.back().phone == p.phone && out.back().start_s == p.start_s && out.back().end_s == p.end_s)
      continue;
    out.push_back(p);
  }
  return out;
}

}  // namespace

std::vector<std::string> observed_ngrams(std::span<const PhoneInterval> alignment, int order) {
  if (order < 1) throw InputError("n-gram order must be >= 1");
  const auto phones = clean_alignment(alignment);
  std::vector<std::string> keys;
  const auto n = static_cast<std::size_t>(order);
  for (std::size_t i = 0; i + n <= phones.size(); ++i) keys.push_back(ngram_key(std::span(phones).subspan(i, n)));
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return keys;
}

LowLevelFeature phone_onehot_features(std::span<const PhoneInterval> alignment, int order,
                                      const PhoneVocabulary& vocabulary, double tr_s, Eigen::Index n_trs) {
  if (order != 2 && order != 3) throw InputError("phone n-gram order must be 2 or 3");
  if (!(tr_s > 0.0)) throw InputError("phone features: TR must be positive");
  if (n_trs < 1) throw InputError("phone features: need at least one TR");
  const auto phones = clean_alignment(alignment);

  std::unordered_map<std::string, Eigen::Index> column;
  for (std::size_t i = 0; i < vocabulary.ngrams.size(); ++i)
    if (!column.emplace(vocabulary.ngrams[i], static_cast<Eigen::Index>(i)).second)
      throw InputError("duplicate vocabulary entry '" + vocabulary.ngrams[i] + "'");
  const auto width = static_cast<Eigen::Index>(vocabulary.ngrams.size()) + (vocabulary.oov_column ? 1 : 0);
  if (width == 0) throw InputError("phone features: empty vocabulary");

  LowLevelFeature out;
  out.series.data = Matrix::Zero(n_trs, width);
  out.series.sample_rate_hz = 1.0 / tr_s;
  out.series.name = order == 2 ? "diphone" : "triphone";

  const auto n = static_cast<std::size_t>(order);
  for (std::size_t i = 0; i + n <= phones.size(); ++i) {
    const auto gram = std::span(phones).subspan(i, n);
    const std::string key = ngram_key(gram);
    Eigen::Index col;
    if (auto it = column.find(key); it != column.end()) {
      col = it->second;
    } else if (vocabulary.oov_column) {
      col = width - 1;
    } else {
      throw InputError("n-gram '" + key + "' is not in the vocabulary and no OOV column is configured");
    }
    const double start = gram.front().start_s;
    const double end = gram.back().end_s;
    // Segments j with start < (j+1)*tr and end > j*tr.
    const auto j_first = static_cast<Eigen::Index>(std::max(0.0, std::floor(start / tr_s)));
    for (Eigen::Index j = j_first; j < n_trs; ++j) {
      const double seg_lo = static_cast<double>(j) * tr_s;
      const double seg_hi = static_cast<double>(j + 1) * tr_s;
      if (seg_lo >= end) break;
      if (start < seg_hi && end > seg_lo) out.series.data(j, col) = 1.0;
    }
  }

  if (order == 3) {
    out.kind = FeatureKind::Triphone;
  } else if (width == kDiphoneCount) {
    out.kind = FeatureKind::Diphone;
  } else {
    out.kind = FeatureKind::Custom;
  }
  return out;
}

std::vector<double> default_residual_grid() { return encoding::logspace_grid(1e-4, 1e4, 9); }

Residuals residualize(const Matrix& reps_train, const Matrix& reps_test, const Matrix& low_train,
                      const Matrix& low_test, const std::vector<double>& alpha_grid,
                      std::span<const Eigen::Index> story_lengths) {
  if (reps_train.cols() != reps_test.cols())
    throw InputError("residualize: train/test representation widths differ");
  if (low_train.cols() != low_test.cols()) throw InputError("residualize: train/test low-level widths differ");
  if (reps_train.rows() != low_train.rows() || reps_test.rows() != low_test.rows())
    throw InputError("residualize: representation and low-level rows are not aligned");

  Residuals out;
  const Vector low_mean = low_train.colwise().mean();
  const bool no_variation = ((low_train.rowwise() - low_mean.transpose()).array() == 0.0).all();
  if (no_variation) {
    // Only the intercept is identifiable.
    const Vector rep_mean = reps_train.colwise().mean();
    out.train = reps_train.rowwise() - rep_mean.transpose();
    out.test = reps_test.rowwise() - rep_mean.transpose();
    out.alpha_per_dim = Vector::Constant(reps_train.cols(), alpha_grid.empty() ? 0.0 : alpha_grid.back());
    return out;
  }

  encoding::RidgeConfig cfg;
  cfg.alpha_grid = alpha_grid;
  cfg.n_folds = story_lengths.size() >= 2 ? 0 : 5;
  cfg.standardize = true;
  const auto model = encoding::fit_encoding(low_train, reps_train, story_lengths, cfg);
  out.train = reps_train - model.predict(low_train);
  out.test = reps_test - model.predict(low_test);
  out.alpha_per_dim = model.alpha_per_voxel;

  // A column the low-level features explain up to ridge shrinkage is zeroed;
  // otherwise z-scoring downstream would blow the remnant back up to unit
  // variance and restore the removed signal.
  const Vector rep_mean = reps_train.colwise().mean();
  const Vector res_mean = out.train.colwise().mean();
  for (Eigen::Index c = 0; c < out.train.cols(); ++c) {
    const double before = (reps_train.col(c).array() - rep_mean[c]).square().sum();
    const double after = (out.train.col(c).array() - res_mean[c]).square().sum();
    if (after <= kExplainedTolerance * before) {
      out.train.col(c).setZero();
      out.test.col(c).setZero();
    }
  }
  return out;
}

std::optional<double> low_level_impact(double b_original, double b_residual) {
  if (std::abs(b_original) < 1e-9) return std::nullopt;
  return 100.0 * (b_original - b_residual) / b_original;
}

}  // namespace braintools::lowlevel
