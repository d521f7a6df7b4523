#pragma once

#include "crtb/types.hpp"

namespace crtb {

// Sample median, lower-midpoint convention: for even n the average of the two
// central order statistics.
double median(const Vector& v);

// Median absolute deviation about the median, scaled by 1.4826 for normal
// consistency. Returns 0 for constant vectors.
double mad(const Vector& v);

// Lower weighted median: smallest v_i (in sorted order) whose cumulative
// weight reaches half the total weight.
double weighted_median(const Vector& v, const Vector& w);

// Truncated tau-type scale seeded by the MAD: robust against a minority of
// wild values yet close to the standard deviation at the normal model.
// Errors when mad(v) == 0.
double tau2_scale(const Vector& v);

// Standard normal quantile, absolute error below 1e-8 on (0,1).
double normal_quantile(double p);

// Chi-square quantile for df >= 1, relative error below 1e-8.
double chi2_quantile(double p, int df);

struct SvdTriple {
  Vector u;
  double s = 0.0;
  Vector v;
};

// Leading singular triple of a dense matrix with a deterministic sign choice:
// the largest-magnitude entry of u is positive (first such entry on ties).
// Errors on an all-zero matrix.
SvdTriple svd_leading(const Matrix& m);

}  // namespace crtb
