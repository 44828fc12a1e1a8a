#pragma once

// Ridge regression through a single thin SVD of the design, shared by every
// regularization weight and every target column.

#include <span>

#include "types.hpp"

namespace braintools::ridge {

class RidgeFactor {
 public:
  // Throws DegenerateError when the design has rank 0.
  explicit RidgeFactor(const Matrix& x);

  // U^T Y, reusable across alphas.
  Matrix project(const Matrix& y) const;

  // W = V diag(s / (s^2 + alpha)) U^T Y given the projection U^T Y.
  Matrix weights_from_projection(const Matrix& uty, double alpha) const;
  Matrix solve(const Matrix& y, double alpha) const { return weights_from_projection(project(y), alpha); }

  // Predictions for a new design X_new: (X_new V) diag(s / (s^2 + alpha)) U^T Y.
  // `xv` is X_new * V, see right_project().
  Matrix predict(const Matrix& xv, const Matrix& uty, double alpha) const;
  Matrix right_project(const Matrix& x_new) const { return x_new * v_; }

  const Vector& singular_values() const { return s_; }
  Eigen::Index rank() const { return s_.size(); }

 private:
  Vector shrink(double alpha) const;

  Matrix u_;
  Vector s_;
  Matrix v_;
};

// argmin_W ||XW - Y||^2 + alpha ||W||^2 for alpha > 0.
Matrix ridge_fit(const Matrix& x, const Matrix& y, double alpha);

}  // namespace braintools::ridge
