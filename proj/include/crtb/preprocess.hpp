#pragma once

#include "crtb/types.hpp"

namespace crtb {

// Column-wise standardization model. Scales are strictly positive: a zero
// scale estimate falls back to the sample standard deviation, and a constant
// column falls back to 1 and is recorded in degenerate_columns.
struct ScalingModel {
  Vector centers;
  Vector scales;
  LocationKind location = LocationKind::median;
  RobustScaleKind scale_kind = RobustScaleKind::mad;
  std::vector<Index> degenerate_columns;

  Index cols() const { return centers.size(); }
};

ScalingModel fit_scaler(const Matrix& x, LocationKind location,
                        RobustScaleKind scale_kind);

// Same estimates computed per column from the mask-1 cells only, so flagged
// cells cannot bias the location or inflate the scale. A column with fewer
// than two clean cells falls back to the full-column estimate. With an
// all-clean mask the result is identical to the unmasked overload.
ScalingModel fit_scaler(const Matrix& x, const CellMask& clean,
                        LocationKind location, RobustScaleKind scale_kind);

// (x - center) / scale per column.
Matrix transform(const Matrix& x, const ScalingModel& model);

// Exact inverse of transform up to floating point roundoff.
Matrix inverse_transform(const Matrix& xs, const ScalingModel& model);

// Column-wise outlying-cell filter on an already standardized block: cell
// (i,j) is flagged when |xs_ij| / (1.4826 * med_i |xs_ij|) exceeds the
// two-sided normal quantile for coverage alpha. Columns whose median absolute
// value is zero flag nothing and are reported through zero_mad_columns.
CellMask prefilter(const Matrix& xs, double alpha,
                   std::vector<Index>* zero_mad_columns = nullptr);

}  // namespace crtb
