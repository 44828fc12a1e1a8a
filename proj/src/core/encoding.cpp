#include "encoding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "errors.hpp"
#include "log.hpp"
#include "parallel.hpp"
#include "ridge.hpp"

namespace braintools::encoding {

std::vector<double> logspace_grid(double lo, double hi, int n) {
  if (n < 1 || !(lo > 0.0) || !(hi >= lo)) throw InputError("logspace_grid: need 0 < lo <= hi and n >= 1");
  std::vector<double> grid(static_cast<std::size_t>(n));
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int i = 0; i < n; ++i)
    grid[static_cast<std::size_t>(i)] = n == 1 ? lo : std::pow(10.0, a + (b - a) * i / static_cast<double>(n - 1));
  return grid;
}

void RidgeConfig::validate() const {
  if (alpha_grid.empty()) throw InputError("ridge: alpha grid is empty");
  for (std::size_t i = 0; i < alpha_grid.size(); ++i) {
    if (!(alpha_grid[i] > 0.0) || !std::isfinite(alpha_grid[i])) throw InputError("ridge: alphas must be positive");
    if (i > 0 && alpha_grid[i] <= alpha_grid[i - 1]) throw InputError("ridge: alpha grid must be strictly increasing");
  }
  if (n_folds == 1 || n_folds < 0) throw InputError("ridge: n_folds must be 0 (per story) or >= 2");
}

Matrix EncodingResult::predict(const Matrix& x) const {
  if (x.cols() != weights.rows())
    throw InputError("encoding: design has " + std::to_string(x.cols()) + " columns, model expects " +
                     std::to_string(weights.rows()));
  const Matrix xs = ((x.rowwise() - feature_mean.transpose()).array().rowwise() / feature_std.transpose().array()).matrix();
  return (xs * weights).rowwise() + target_mean.transpose();
}

double pearson_r(std::span<const double> a, std::span<const double> b, bool* constant) {
  if (a.size() != b.size())
    throw InputError("pearson_r: length mismatch (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  if (a.size() < 3) throw InputError("pearson_r: need at least 3 samples");
  const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  if (*amin == *amax || *bmin == *bmax) {
    if (constant) *constant = true;
    return 0.0;
  }
  if (constant) *constant = false;
  const auto n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  const double r = sab / std::sqrt(saa * sbb);
  return std::clamp(r, -1.0, 1.0);
}

double pearson_r(const Vector& a, const Vector& b, bool* constant) {
  return pearson_r(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())),
                   std::span<const double>(b.data(), static_cast<std::size_t>(b.size())), constant);
}

Vector pearson_columns(const Matrix& a, const Matrix& b, std::size_t* n_constant) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw InputError("pearson_columns: shape mismatch");
  Vector r(a.cols());
  std::vector<char> flags(static_cast<std::size_t>(a.cols()), 0);
  parallel_for(static_cast<std::size_t>(a.cols()), [&](std::size_t c) {
    const auto col = static_cast<Eigen::Index>(c);
    bool constant = false;
    r[col] = pearson_r(std::span<const double>(a.col(col).data(), static_cast<std::size_t>(a.rows())),
                       std::span<const double>(b.col(col).data(), static_cast<std::size_t>(b.rows())), &constant);
    flags[c] = constant ? 1 : 0;
  });
  if (n_constant) *n_constant = static_cast<std::size_t>(std::count(flags.begin(), flags.end(), 1));
  return r;
}

std::vector<Eigen::Index> make_folds(std::span<const Eigen::Index> story_lengths, Eigen::Index n_rows, int n_folds) {
  std::vector<Eigen::Index> folds;
  if (n_folds == 0 && story_lengths.size() >= 2) {
    folds.assign(story_lengths.begin(), story_lengths.end());
  } else {
    if (n_folds == 0) {
      n_folds = 5;
      log::warn("alpha selection: fewer than 2 training stories, falling back to 5 contiguous folds");
    }
    if (n_rows < 2 * n_folds) throw InputError("alpha selection: too few rows for " + std::to_string(n_folds) + " folds");
    for (int f = 0; f < n_folds; ++f) {
      const Eigen::Index begin = n_rows * f / n_folds;
      const Eigen::Index end = n_rows * (f + 1) / n_folds;
      folds.push_back(end - begin);
    }
  }
  if (std::accumulate(folds.begin(), folds.end(), Eigen::Index{0}) != n_rows)
    throw InputError("alpha selection: story lengths do not sum to the number of training rows");
  return folds;
}

AlphaSelection select_alphas(const Matrix& x_train, const Matrix& y_train, std::span<const Eigen::Index> story_lengths,
                             const RidgeConfig& cfg) {
  cfg.validate();
  if (x_train.rows() != y_train.rows()) throw InputError("select_alphas: X and Y row counts differ");
  const auto folds = make_folds(story_lengths, x_train.rows(), cfg.n_folds);
  const auto n_alphas = static_cast<Eigen::Index>(cfg.alpha_grid.size());
  Matrix scores = Matrix::Zero(n_alphas, y_train.cols());

  Eigen::Index offset = 0;
  for (const Eigen::Index len : folds) {
    const Eigen::Index n_tr = x_train.rows() - len;
    if (len < 3 || n_tr < 1) throw InputError("select_alphas: each fold needs at least 3 held-out rows");
    Matrix x_tr(n_tr, x_train.cols()), y_tr(n_tr, y_train.cols());
    x_tr << x_train.topRows(offset), x_train.bottomRows(x_train.rows() - offset - len);
    y_tr << y_train.topRows(offset), y_train.bottomRows(y_train.rows() - offset - len);
    const Vector x_mean = x_tr.colwise().mean();
    const Vector y_mean = y_tr.colwise().mean();
    x_tr.rowwise() -= x_mean.transpose();
    y_tr.rowwise() -= y_mean.transpose();
    const Matrix x_te = x_train.middleRows(offset, len).rowwise() - x_mean.transpose();
    const Matrix y_te = y_train.middleRows(offset, len);

    const ridge::RidgeFactor factor(x_tr);
    const Matrix uty = factor.project(y_tr);
    const Matrix xv = factor.right_project(x_te);
    for (Eigen::Index a = 0; a < n_alphas; ++a) {
      const Matrix pred = factor.predict(xv, uty, cfg.alpha_grid[static_cast<std::size_t>(a)]);
      scores.row(a) += pearson_columns(pred, y_te).transpose();
    }
    offset += len;
  }
  scores /= static_cast<double>(folds.size());

  AlphaSelection out;
  out.cv_scores = scores;
  out.alpha_per_voxel.resize(y_train.cols());
  for (Eigen::Index v = 0; v < y_train.cols(); ++v) {
    Eigen::Index best = 0;
    for (Eigen::Index a = 1; a < n_alphas; ++a)
      if (scores(a, v) >= scores(best, v)) best = a;
    out.alpha_per_voxel[v] = cfg.alpha_grid[static_cast<std::size_t>(best)];
  }
  return out;
}

EncodingResult fit_encoding(const Matrix& x_train, const Matrix& y_train, std::span<const Eigen::Index> story_lengths,
                            const RidgeConfig& cfg) {
  cfg.validate();
  if (x_train.rows() != y_train.rows()) throw InputError("fit_encoding: X and Y row counts differ");
  if (!x_train.allFinite() || !y_train.allFinite()) throw DataError("fit_encoding: non-finite training data");
  EncodingResult model;
  const auto n = static_cast<double>(x_train.rows());
  if (cfg.standardize) {
    model.feature_mean = x_train.colwise().mean();
    model.feature_std = ((x_train.rowwise() - model.feature_mean.transpose()).array().square().colwise().sum() /
                         std::max(1.0, n - 1.0))
                            .sqrt();
    for (Eigen::Index c = 0; c < model.feature_std.size(); ++c)
      if (!(model.feature_std[c] > 0.0)) model.feature_std[c] = 1.0;
  } else {
    model.feature_mean = Vector::Zero(x_train.cols());
    model.feature_std = Vector::Ones(x_train.cols());
  }
  model.target_mean = y_train.colwise().mean();
  const Matrix xs =
      ((x_train.rowwise() - model.feature_mean.transpose()).array().rowwise() / model.feature_std.transpose().array())
          .matrix();
  const Matrix yc = y_train.rowwise() - model.target_mean.transpose();

  model.alpha_per_voxel = select_alphas(xs, yc, story_lengths, cfg).alpha_per_voxel;

  const ridge::RidgeFactor factor(xs);
  const Matrix uty = factor.project(yc);
  model.weights.resize(xs.cols(), yc.cols());
  for (const double alpha : cfg.alpha_grid) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index v = 0; v < yc.cols(); ++v)
      if (model.alpha_per_voxel[v] == alpha) cols.push_back(v);
    if (cols.empty()) continue;
    Matrix sub(uty.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) sub.col(static_cast<Eigen::Index>(i)) = uty.col(cols[i]);
    const Matrix w = factor.weights_from_projection(sub, alpha);
    for (std::size_t i = 0; i < cols.size(); ++i) model.weights.col(cols[i]) = w.col(static_cast<Eigen::Index>(i));
  }
  return model;
}

Vector evaluate_encoding(EncodingResult& model, const Matrix& x_test, const Matrix& y_test) {
  if (x_test.rows() != y_test.rows()) throw InputError("evaluate_encoding: X and Y row counts differ");
  if (y_test.cols() != model.weights.cols())
    throw InputError("evaluate_encoding: " + std::to_string(y_test.cols()) + " test voxels, model has " +
                     std::to_string(model.weights.cols()));
  const Matrix pred = model.predict(x_test);
  std::size_t n_constant = 0;
  model.rho = pearson_columns(pred, y_test, &n_constant);
  if (n_constant > 0)
    log::warn(std::to_string(n_constant) + " voxel(s) had a constant prediction or response; their rho is set to 0");
  return model.rho;
}

AlignmentResult normalized_alignment(const Vector& rho, const ceiling::NoiseCeilingMap& nc_map, const RoiMask& roi) {
  if (rho.size() != nc_map.nc.size())
    throw InputError("normalized_alignment: rho has " + std::to_string(rho.size()) + " voxels, ceiling map has " +
                     std::to_string(nc_map.nc.size()));
  roi.validate(static_cast<std::size_t>(nc_map.nc.size()));
  AlignmentResult out;
  double sum = 0.0;
  for (const std::size_t v : roi.voxel_indices) {
    if (!nc_map.keep_mask[v]) continue;
    const auto i = static_cast<Eigen::Index>(v);
    sum += rho[i] / nc_map.nc[i];
    out.voxels.push_back(v);
  }
  if (out.voxels.empty()) throw RoiError("ROI '" + roi.label + "' has no voxels above the noise-ceiling threshold");
  out.b = sum / static_cast<double>(out.voxels.size());
  return out;
}

}  // namespace braintools::encoding
