#include "crtb/preprocess.hpp"

#include "crtb/numkernel.hpp"

#include <cmath>

namespace crtb {

namespace {

double sample_std(const Vector& col) {
  const Index n = col.size();
  const double mean = col.mean();
  const double ss = (col.array() - mean).square().sum();
  return std::sqrt(ss / static_cast<double>(n - 1));
}

void fit_column(const Vector& col, Index j, LocationKind location,
                RobustScaleKind scale_kind, ScalingModel& model) {
  model.centers[j] = location == LocationKind::mean ? col.mean() : median(col);

  double scale = 0.0;
  switch (scale_kind) {
    case RobustScaleKind::std_dev:
      scale = sample_std(col);
      break;
    case RobustScaleKind::mad:
      scale = mad(col);
      break;
    case RobustScaleKind::tau2:
      // tau2 is undefined for zero MAD; treat that as a zero estimate so
      // the fallback chain below applies.
      scale = mad(col) > 0.0 ? tau2_scale(col) : 0.0;
      break;
  }
  if (scale <= 0.0) scale = sample_std(col);
  if (scale <= 0.0) {
    scale = 1.0;
    model.degenerate_columns.push_back(j);
  }
  model.scales[j] = scale;
}

}  // namespace

ScalingModel fit_scaler(const Matrix& x, LocationKind location,
                        RobustScaleKind scale_kind) {
  require(x.rows() >= 2, "fit_scaler: need at least 2 rows");
  require(x.cols() >= 1, "fit_scaler: need at least 1 column");
  require_finite(x, "fit_scaler");

  ScalingModel model;
  model.location = location;
  model.scale_kind = scale_kind;
  model.centers.resize(x.cols());
  model.scales.resize(x.cols());

  for (Index j = 0; j < x.cols(); ++j)
    fit_column(x.col(j), j, location, scale_kind, model);
  return model;
}

ScalingModel fit_scaler(const Matrix& x, const CellMask& clean,
                        LocationKind location, RobustScaleKind scale_kind) {
  require(x.rows() >= 2, "fit_scaler: need at least 2 rows");
  require(x.cols() >= 1, "fit_scaler: need at least 1 column");
  require(clean.rows() == x.rows() && clean.cols() == x.cols(),
          "fit_scaler: mask shape mismatch");
  require_finite(x, "fit_scaler");

  ScalingModel model;
  model.location = location;
  model.scale_kind = scale_kind;
  model.centers.resize(x.cols());
  model.scales.resize(x.cols());

  Vector kept(x.rows());
  for (Index j = 0; j < x.cols(); ++j) {
    Index m = 0;
    for (Index i = 0; i < x.rows(); ++i)
      if (clean.clean(i, j)) kept[m++] = x(i, j);
    // A column with almost every cell flagged has no usable clean basis;
    // estimate it from all cells instead.
    const Vector col = m >= 2 ? kept.head(m).eval() : x.col(j).eval();
    fit_column(col, j, location, scale_kind, model);
  }
  return model;
}

Matrix transform(const Matrix& x, const ScalingModel& model) {
  require(x.cols() == model.cols(), "transform: column count mismatch");
  require_finite(x, "transform");
  return (x.rowwise() - model.centers.transpose()).array().rowwise() /
         model.scales.transpose().array();
}

Matrix inverse_transform(const Matrix& xs, const ScalingModel& model) {
  require(xs.cols() == model.cols(),
          "inverse_transform: column count mismatch");
  require_finite(xs, "inverse_transform");
  return (xs.array().rowwise() * model.scales.transpose().array()).matrix()
             .rowwise() +
         model.centers.transpose();
}

CellMask prefilter(const Matrix& xs, double alpha,
                   std::vector<Index>* zero_mad_columns) {
  require(xs.rows() >= 1 && xs.cols() >= 1, "prefilter: empty block");
  require(alpha > 0.0 && alpha < 1.0, "prefilter: alpha must lie in (0,1)");
  require_finite(xs, "prefilter");

  const double cut = normal_quantile(0.5 * (1.0 + alpha));
  CellMask mask = CellMask::all_clean(xs.rows(), xs.cols());
  if (zero_mad_columns) zero_mad_columns->clear();

  for (Index j = 0; j < xs.cols(); ++j) {
    const Vector abs_col = xs.col(j).cwiseAbs();
    const double m_hat = median(abs_col);
    if (m_hat <= 0.0) {
      // A zero median absolute value leaves the column scale undefined;
      // flag nothing rather than flag everything.
      if (zero_mad_columns) zero_mad_columns->push_back(j);
      continue;
    }
    const double denom = kMadConsistency * m_hat;
    for (Index i = 0; i < xs.rows(); ++i)
      if (std::abs(xs(i, j)) / denom > cut) mask.entries(i, j) = 0;
  }
  return mask;
}

}  // namespace crtb
