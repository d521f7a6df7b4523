#pragma once

#include "crtb/types.hpp"

namespace crtb {

// Dense or sparse twoblock latent-component model fitted by sequential SVD
// deflation of the cross-covariance. Two independent loops extract X-side and
// Y-side components; k_x / k_y are the effective counts after any early stop.
struct TwoblockModel {
  Matrix W;  // p x k_x, X weights (unit columns)
  Matrix P;  // p x k_x, X regression loadings
  Matrix T;  // n x k_x, X deflation scores
  Matrix V;  // q x k_y, Y weights (unit columns)
  Matrix Q;  // q x k_y, Y regression loadings
  Matrix U;  // n x k_y, Y deflation scores
  Matrix Bs; // p x q, coefficients on the fitted (standardized) scale
  double eta_x = 0.0;
  double eta_y = 0.0;
  Index k_x = 0;
  Index k_y = 0;
  Index requested_k_x = 0;
  Index requested_k_y = 0;
};

// Soft-threshold a unit weight vector at eta times its max magnitude, then
// renormalize to unit length. eta == 0 returns the input unchanged so the
// sparse path degrades to the dense path bit-for-bit.
Vector soft_threshold(const Vector& w, double eta);

// Fit on centered blocks (centering is the caller's responsibility). Either
// loop stops early when the deflated cross-covariance falls below 1e-12
// times its initial leading singular value; a zero association at the first
// component raises NoAssociationError.
TwoblockModel fit_twoblock(const Matrix& xc, const Matrix& yc, Index k_x,
                           Index k_y, double eta_x, double eta_y);

// Coefficient matrix W (T' Xc W)^-1 T' Yc V V': the least-squares regression
// of Yc on the X scores, expressed in the original predictor coordinates and
// projected onto the span of the Y weights.
Matrix coefficients(const TwoblockModel& model, const Matrix& xc,
                    const Matrix& yc);

// Fitted-scale predictions Xc * Bs.
Matrix predict_std(const TwoblockModel& model, const Matrix& xc);

}  // namespace crtb
