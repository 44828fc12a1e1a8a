#pragma once

// Voxel-wise ridge encoding models: per-voxel regularization chosen by
// cross-validated Pearson r, held-out scoring and ROI-level normalized
// alignment.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ceiling.hpp"
#include "types.hpp"

namespace braintools::encoding {

std::vector<double> logspace_grid(double lo, double hi, int n);

struct RidgeConfig {
  std::vector<double> alpha_grid = logspace_grid(1.0, 1e4, 10);
  int n_folds = 0;  // 0: leave-one-story-out; k >= 2: k contiguous blocks
  bool standardize = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EncodingResult {
  Matrix weights;  // n_features x n_voxels, in standardized feature units
  Vector alpha_per_voxel;
  Vector rho;  // filled by evaluate_encoding
  Vector feature_mean;
  Vector feature_std;
  Vector target_mean;

  Matrix predict(const Matrix& x) const;
};

// Sample Pearson correlation. Returns 0 (and sets *constant) when either input
// is constant. Throws InputError on length mismatch or length < 3.
double pearson_r(std::span<const double> a, std::span<const double> b, bool* constant = nullptr);
double pearson_r(const Vector& a, const Vector& b, bool* constant = nullptr);

// Column-wise Pearson r between two equally shaped matrices; constant columns
// give 0 and are counted in *n_constant.
Vector pearson_columns(const Matrix& a, const Matrix& b, std::size_t* n_constant = nullptr);

// Row counts of consecutive folds, from story boundaries or contiguous blocks.
std::vector<Eigen::Index> make_folds(std::span<const Eigen::Index> story_lengths, Eigen::Index n_rows, int n_folds);

struct AlphaSelection {
  Vector alpha_per_voxel;
  Matrix cv_scores;  // n_alphas x n_voxels, mean held-out r across folds
};

// Per voxel, the grid alpha with the best mean cross-validated Pearson r;
// ties go to the larger alpha. A single training story falls back to
// `n_folds` (default 5) contiguous blocks with a warning.
AlphaSelection select_alphas(const Matrix& x_train, const Matrix& y_train, std::span<const Eigen::Index> story_lengths,
                             const RidgeConfig& cfg);

EncodingResult fit_encoding(const Matrix& x_train, const Matrix& y_train, std::span<const Eigen::Index> story_lengths,
                            const RidgeConfig& cfg);

// rho_v = pearson_r(prediction_v, Y_test[:, v]); stored in model.rho.
Vector evaluate_encoding(EncodingResult& model, const Matrix& x_test, const Matrix& y_test);

struct AlignmentResult {
  double b = 0.0;
  std::vector<std::size_t> voxels;  // kept ROI voxels used
};

// B = mean over kept ROI voxels of rho_v / NC_v. `rho` is indexed like the
// ceiling map. Empty intersection -> RoiError.
AlignmentResult normalized_alignment(const Vector& rho, const ceiling::NoiseCeilingMap& nc_map, const RoiMask& roi);

struct AlignmentReport {
  std::map<std::string, AlignmentResult> per_roi;
  Vector per_voxel_rho;
  Vector nc_used;
};

}  // namespace braintools::encoding
