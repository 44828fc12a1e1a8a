#pragma once

// Stimulus-rate features -> TR-aligned, FIR-expanded design matrix.

#include <span>
#include <vector>

#include "types.hpp"

namespace braintools::pairing {

struct PairingConfig {
  double window_s = 16.0;  // sliding window length
  double stride_s = 0.1;   // window hop
  double tr_s = kDefaultTr;
  int lanczos_lobes = 3;
  std::vector<int> fir_delays{1, 2, 3, 4, 5};  // in TRs

  void validate() const;
  // Anti-aliasing cutoff: the Nyquist frequency of the TR grid.
  double cutoff_hz() const { return 1.0 / (2.0 * tr_s); }
};

struct PairedDataset {
  Matrix X;            // n_trs x (n_dims * n_delays), blocks ordered by delay
  Matrix Y;            // n_trs x n_voxels
  Vector tr_times_s;   // TR centres
  Matrix downsampled;  // n_trs x n_dims, before FIR expansion
};

// Right edges t_k = T + k*W of every window that fits in the audio.
std::vector<double> window_times(double audio_duration_s, const PairingConfig& cfg);

// Lanczos kernel sinc(x) * sinc(x / a) on |x| < a, zero elsewhere.
double lanczos_kernel(double x, int lobes);

// Row j = sum_i w_ij * series[i] / sum_i w_ij with
// w_ij = lanczos_kernel(cutoff * (t_i - target_j)). Throws CoverageError when
// a target has no sample inside the kernel support.
Matrix lanczos_downsample(const FeatureSeries& series, std::span<const double> target_times_s,
                          const PairingConfig& cfg);

// Block d holds the input shifted down by delays[d] rows, zero-filled.
Matrix fir_expand(const Matrix& x_tr, std::span<const int> delays);

std::vector<double> tr_centers(Eigen::Index n_trs, double tr_s);

PairedDataset build_paired(const FeatureSeries& series, const FmriRun& run, const PairingConfig& cfg);

}  // namespace braintools::pairing
