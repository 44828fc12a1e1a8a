#pragma once

#include <memory>
#include <span>
#include <vector>

#include "types.hpp"

namespace braintools::ceiling {

inline constexpr double kDefaultThreshold = 0.4;

struct NoiseCeilingMap {
  Vector nc;  // per voxel, in [0, 1]
  double threshold = kDefaultThreshold;
  VoxelMask keep_mask;  // nc > threshold

  std::size_t n_kept() const { return count_true(keep_mask); }
};

// Strategy seam for alternative ceiling estimators. Implementations map R
// repeats (each n_trs x n_voxels) to a per-voxel ceiling in correlation units.
class CeilingEstimator {
 public:
  virtual ~CeilingEstimator() = default;
  virtual Vector estimate(std::span<const Matrix* const> repeats) const = 0;
};

// Signal-power / total-power ceiling:
//   SP = (Var(sum_r y_r) - sum_r Var(y_r)) / (R (R - 1))
//   TP = mean_r Var(y_r)
//   NC = sqrt(clip(SP, 0, TP) / TP), NC = 0 when TP = 0.
class SignalPowerCeiling final : public CeilingEstimator {
 public:
  Vector estimate(std::span<const Matrix* const> repeats) const override;
};

VoxelMask threshold_mask(const Vector& nc, double threshold);

// Requires >= 2 repeats of equal shape from the same participant and story.
NoiseCeilingMap estimate_noise_ceiling(std::span<const FmriRun> repeats, double threshold = kDefaultThreshold,
                                       const CeilingEstimator& estimator = SignalPowerCeiling{});

struct MaskedMatrix {
  Matrix data;
  std::vector<std::size_t> voxel_index;  // column -> original voxel
};

// Keeps the selected columns in their original order. All-false -> InputError.
MaskedMatrix apply_mask(const Matrix& data, const VoxelMask& mask);
inline MaskedMatrix apply_mask(const FmriRun& run, const VoxelMask& mask) { return apply_mask(run.data, mask); }

}  // namespace braintools::ceiling
