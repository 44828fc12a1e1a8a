#include "pairing.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "errors.hpp"
#include "parallel.hpp"

namespace braintools::pairing {

void PairingConfig::validate() const {
  if (!(window_s > 0.0) || !(stride_s > 0.0) || !(tr_s > 0.0))
    throw InputError("pairing: window, stride and TR must be positive");
  if (stride_s > window_s) throw InputError("pairing: stride must not exceed the window length");
  if (lanczos_lobes < 1) throw InputError("pairing: lanczos_lobes must be >= 1");
  if (fir_delays.empty()) throw InputError("pairing: FIR delay list is empty");
  for (std::size_t i = 0; i < fir_delays.size(); ++i) {
    if (fir_delays[i] < 1) throw InputError("pairing: FIR delays must be positive");
    if (i > 0 && fir_delays[i] <= fir_delays[i - 1]) throw InputError("pairing: FIR delays must be strictly increasing");
  }
}

std::vector<double> window_times(double audio_duration_s, const PairingConfig& cfg) {
  if (!(cfg.window_s > 0.0) || !(cfg.stride_s > 0.0)) throw InputError("window_times: window and stride must be positive");
  if (audio_duration_s < cfg.window_s) {
    std::ostringstream msg;
    msg << "audio duration " << audio_duration_s << " s is shorter than the window (" << cfg.window_s << " s)";
    throw InputError(msg.str());
  }
  // Relative slack absorbs representation error in (duration - T) / W.
  const double steps = (audio_duration_s - cfg.window_s) / cfg.stride_s;
  const auto count = static_cast<std::size_t>(std::floor(steps + 1e-9 * std::max(1.0, steps))) + 1;
  std::vector<double> times(count);
  for (std::size_t k = 0; k < count; ++k) times[k] = cfg.window_s + static_cast<double>(k) * cfg.stride_s;
  return times;
}

double lanczos_kernel(double x, int lobes) {
  const double a = static_cast<double>(lobes);
  if (x == 0.0) return 1.0;
  if (std::abs(x) >= a) return 0.0;
  const double px = std::numbers::pi * x;
  return a * std::sin(px) * std::sin(px / a) / (px * px);
}

Matrix lanczos_downsample(const FeatureSeries& series, std::span<const double> target_times_s,
                          const PairingConfig& cfg) {
  series.validate();
  if (cfg.lanczos_lobes < 1) throw InputError("lanczos_downsample: lobes must be >= 1");
  const double cutoff = cfg.cutoff_hz();
  const double support_s = static_cast<double>(cfg.lanczos_lobes) / cutoff;
  const Eigen::Index n = series.n_samples();
  Matrix out(static_cast<Eigen::Index>(target_times_s.size()), series.n_dims());

  parallel_for(target_times_s.size(), [&](std::size_t j) {
    const double target = target_times_s[j];
    const double lo = (target - support_s - series.t0_s) * series.sample_rate_hz;
    const double hi = (target + support_s - series.t0_s) * series.sample_rate_hz;
    const auto first = static_cast<Eigen::Index>(std::max(0.0, std::ceil(lo)));
    const auto last = static_cast<Eigen::Index>(std::min(static_cast<double>(n - 1), std::floor(hi)));
    double weight_sum = 0.0;
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(series.n_dims());
    for (Eigen::Index i = first; i <= last; ++i) {
      const double w = lanczos_kernel(cutoff * (series.time(i) - target), cfg.lanczos_lobes);
      if (w == 0.0) continue;
      weight_sum += w;
      acc.noalias() += w * series.data.row(i);
    }
    if (first > last || std::abs(weight_sum) < 1e-9) {
      std::ostringstream msg;
      msg << "no feature samples within " << support_s << " s of target time " << target << " s (series '"
          << series.name << "' covers " << series.t0_s << ".." << series.end_time() << " s)";
      throw CoverageError(msg.str());
    }
    out.row(static_cast<Eigen::Index>(j)) = acc / weight_sum;
  });
  return out;
}

Matrix fir_expand(const Matrix& x_tr, std::span<const int> delays) {
  if (delays.empty()) throw InputError("fir_expand: empty delay list");
  for (std::size_t i = 0; i < delays.size(); ++i) {
    if (delays[i] < 1) throw InputError("fir_expand: delays must be positive");
    if (i > 0 && delays[i] <= delays[i - 1]) throw InputError("fir_expand: delays must be strictly increasing");
  }
  const Eigen::Index n = x_tr.rows();
  const Eigen::Index d = x_tr.cols();
  if (delays.back() >= n)
    throw InputError("fir_expand: max delay " + std::to_string(delays.back()) + " >= number of TRs " + std::to_string(n));
  Matrix out = Matrix::Zero(n, d * static_cast<Eigen::Index>(delays.size()));
  for (std::size_t b = 0; b < delays.size(); ++b) {
    const Eigen::Index k = delays[b];
    out.block(k, static_cast<Eigen::Index>(b) * d, n - k, d) = x_tr.topRows(n - k);
  }
  return out;
}

std::vector<double> tr_centers(Eigen::Index n_trs, double tr_s) {
  std::vector<double> t(static_cast<std::size_t>(n_trs));
  for (Eigen::Index j = 0; j < n_trs; ++j) t[static_cast<std::size_t>(j)] = (static_cast<double>(j) + 0.5) * tr_s;
  return t;
}

PairedDataset build_paired(const FeatureSeries& series, const FmriRun& run, const PairingConfig& cfg) {
  cfg.validate();
  series.validate();
  run.validate();
  if (std::abs(run.tr_s - cfg.tr_s) > 1e-9)
    throw InputError("build_paired: run TR " + std::to_string(run.tr_s) + " differs from pairing TR " +
                     std::to_string(cfg.tr_s));
  const double needed = static_cast<double>(run.n_trs()) * cfg.tr_s - cfg.tr_s;
  if (series.end_time() < needed) {
    std::ostringstream msg;
    msg << "features '" << series.name << "' end at " << series.end_time() << " s but run '" << run.story_id
        << "' needs " << needed << " s (" << run.n_trs() << " TRs)";
    throw InputError(msg.str());
  }
  const auto targets = tr_centers(run.n_trs(), cfg.tr_s);
  PairedDataset p;
  p.downsampled = lanczos_downsample(series, targets, cfg);
  p.X = fir_expand(p.downsampled, cfg.fir_delays);
  p.Y = run.data;
  p.tr_times_s = Eigen::Map<const Vector>(targets.data(), static_cast<Eigen::Index>(targets.size()));
  return p;
}

}  // namespace braintools::pairing
