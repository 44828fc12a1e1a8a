#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace braintools {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kDefaultTr = 2.0045;

// Stimulus-locked representation stream: one row per sample.
struct FeatureSeries {
  Matrix data;
  double sample_rate_hz = 10.0;
  double t0_s = 0.0;
  std::string name;

  Eigen::Index n_samples() const { return data.rows(); }
  Eigen::Index n_dims() const { return data.cols(); }
  double time(Eigen::Index i) const { return t0_s + static_cast<double>(i) / sample_rate_hz; }
  // End of the covered interval: t0 + n / rate.
  double end_time() const { return t0_s + static_cast<double>(data.rows()) / sample_rate_hz; }

  void validate() const;
};

struct FmriRun {
  Matrix data;  // n_trs x n_voxels
  double tr_s = kDefaultTr;
  std::string story_id;
  std::string participant_id;
  int repeat_index = 0;

  Eigen::Index n_trs() const { return data.rows(); }
  Eigen::Index n_voxels() const { return data.cols(); }

  void validate() const;
};

struct RoiMask {
  std::string label;
  std::vector<std::size_t> voxel_indices;  // strictly increasing

  // Throws RoiError when indices are unsorted, duplicated or out of range.
  void validate(std::size_t n_voxels) const;
};

// Boolean keep-mask helpers used across modules.
using VoxelMask = std::vector<bool>;

std::size_t count_true(const VoxelMask& mask);
std::vector<std::size_t> mask_indices(const VoxelMask& mask);

}  // namespace braintools
