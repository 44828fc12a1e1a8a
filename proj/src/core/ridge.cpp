#include "ridge.hpp"

#include <cmath>

#include "errors.hpp"

namespace braintools::ridge {

RidgeFactor::RidgeFactor(const Matrix& x) {
  if (x.rows() == 0 || x.cols() == 0) throw DegenerateError("ridge: empty design matrix");
  if (!x.allFinite()) throw DataError("ridge: design matrix contains non-finite values");
  Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double smax = s.size() > 0 ? s.maxCoeff() : 0.0;
  if (!(smax > 0.0)) throw DegenerateError("ridge: design matrix has rank 0");
  // Drop exactly-null directions; they contribute nothing for any alpha.
  Eigen::Index keep = 0;
  while (keep < s.size() && s[keep] > smax * 1e-15) ++keep;
  u_ = svd.matrixU().leftCols(keep);
  s_ = s.head(keep);
  v_ = svd.matrixV().leftCols(keep);
}

Vector RidgeFactor::shrink(double alpha) const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InputError("ridge: alpha must be positive and finite");
  return s_.array() / (s_.array().square() + alpha);
}

Matrix RidgeFactor::project(const Matrix& y) const {
  if (y.rows() != u_.rows()) throw InputError("ridge: target rows do not match design rows");
  return u_.transpose() * y;
}

Matrix RidgeFactor::weights_from_projection(const Matrix& uty, double alpha) const {
  return v_ * (shrink(alpha).asDiagonal() * uty);
}

Matrix RidgeFactor::predict(const Matrix& xv, const Matrix& uty, double alpha) const {
  return xv * (shrink(alpha).asDiagonal() * uty);
}

Matrix ridge_fit(const Matrix& x, const Matrix& y, double alpha) {
  if (x.rows() != y.rows()) throw InputError("ridge_fit: X and Y row counts differ");
  if (!(alpha > 0.0)) throw InputError("ridge_fit: alpha must be positive");
  return RidgeFactor(x).solve(y, alpha);
}

}  // namespace braintools::ridge
