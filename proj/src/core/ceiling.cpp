#include "ceiling.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"
#include "parallel.hpp"

namespace braintools::ceiling {
namespace {

// Unbiased sample variance of one column.
double column_variance(const Matrix& m, Eigen::Index col) {
  const auto c = m.col(col);
  const double mean = c.mean();
  return (c.array() - mean).square().sum() / static_cast<double>(m.rows() - 1);
}

}  // namespace

Vector SignalPowerCeiling::estimate(std::span<const Matrix* const> repeats) const {
  const auto n_rep = static_cast<double>(repeats.size());
  const Eigen::Index n_vox = repeats.front()->cols();
  const Eigen::Index n = repeats.front()->rows();
  Vector nc(n_vox);
  parallel_for(static_cast<std::size_t>(n_vox), [&](std::size_t vi) {
    const auto v = static_cast<Eigen::Index>(vi);
    Vector sum = Vector::Zero(n);
    double sum_var = 0.0;
    for (const Matrix* r : repeats) {
      sum += r->col(v);
      sum_var += column_variance(*r, v);
    }
    const double mean = sum.mean();
    const double var_of_sum = (sum.array() - mean).square().sum() / static_cast<double>(n - 1);
    const double total_power = sum_var / n_rep;
    if (!(total_power > 0.0)) {
      nc[v] = 0.0;
      return;
    }
    const double signal_power = (var_of_sum - sum_var) / (n_rep * (n_rep - 1.0));
    nc[v] = std::sqrt(std::clamp(signal_power, 0.0, total_power) / total_power);
  });
  return nc;
}

VoxelMask threshold_mask(const Vector& nc, double threshold) {
  VoxelMask mask(static_cast<std::size_t>(nc.size()));
  for (Eigen::Index v = 0; v < nc.size(); ++v) mask[static_cast<std::size_t>(v)] = nc[v] > threshold;
  return mask;
}

NoiseCeilingMap estimate_noise_ceiling(std::span<const FmriRun> repeats, double threshold,
                                       const CeilingEstimator& estimator) {
  if (repeats.size() < 2) throw InputError("noise ceiling needs at least 2 repeats, got " + std::to_string(repeats.size()));
  const auto& first = repeats.front();
  if (first.n_trs() < 2) throw InputError("noise ceiling needs at least 2 TRs per repeat");
  std::vector<const Matrix*> data;
  for (const auto& r : repeats) {
    r.validate();
    if (r.n_trs() != first.n_trs() || r.n_voxels() != first.n_voxels())
      throw InputError("repeat shapes differ: " + std::to_string(r.n_trs()) + "x" + std::to_string(r.n_voxels()) +
                       " vs " + std::to_string(first.n_trs()) + "x" + std::to_string(first.n_voxels()));
    if (r.participant_id != first.participant_id || r.story_id != first.story_id)
      throw InputError("repeats must come from the same participant and story");
    data.push_back(&r.data);
  }
  NoiseCeilingMap map;
  map.nc = estimator.estimate(data);
  map.nc = map.nc.cwiseMax(0.0).cwiseMin(1.0);
  map.threshold = threshold;
  map.keep_mask = threshold_mask(map.nc, threshold);
  return map;
}

MaskedMatrix apply_mask(const Matrix& data, const VoxelMask& mask) {
  if (mask.size() != static_cast<std::size_t>(data.cols()))
    throw InputError("mask length " + std::to_string(mask.size()) + " does not match " + std::to_string(data.cols()) +
                     " voxels");
  MaskedMatrix out;
  out.voxel_index = mask_indices(mask);
  if (out.voxel_index.empty()) throw InputError("mask selects no voxels");
  out.data.resize(data.rows(), static_cast<Eigen::Index>(out.voxel_index.size()));
  for (std::size_t c = 0; c < out.voxel_index.size(); ++c)
    out.data.col(static_cast<Eigen::Index>(c)) = data.col(static_cast<Eigen::Index>(out.voxel_index[c]));
  return out;
}

}  // namespace braintools::ceiling
