#include "crtb/robustweights.hpp"

#include "crtb/numkernel.hpp"

#include <cmath>
#include <limits>

namespace crtb {

HampelCutoffs hampel_cutoffs(const PsiSpec& spec, int df) {
  spec.validate();
  require(df >= 1, "hampel_cutoffs: df must be >= 1");
  const double ref = chi2_quantile(0.5, df);
  HampelCutoffs c;
  c.a = std::sqrt(chi2_quantile(spec.probs[0], df) / ref);
  c.b = std::sqrt(chi2_quantile(spec.probs[1], df) / ref);
  c.r = std::sqrt(chi2_quantile(spec.probs[2], df) / ref);
  return c;
}

double psi_weight(double d, const HampelCutoffs& cutoffs, PsiFamily family) {
  require(d >= 0.0, "psi_weight: distance must be nonnegative");
  switch (family) {
    case PsiFamily::unit:
      return 1.0;
    case PsiFamily::huber:
      return d <= cutoffs.a ? 1.0 : cutoffs.a / d;
    case PsiFamily::fair: {
      const double denom = 1.0 + d / cutoffs.a;
      return 1.0 / (denom * denom);
    }
    case PsiFamily::hampel:
      break;
  }
  const double a = cutoffs.a;
  const double b = cutoffs.b;
  const double r = cutoffs.r;
  if (d <= a) return 1.0;
  if (d <= b) return a / d;
  if (d <= r) return a * (r - d) / (d * (r - b));
  return 0.0;
}

Vector starting_weights(const Matrix& zs, const CellMask& mask,
                        const PsiSpec& spec, int k,
                        std::vector<Index>* all_flagged_rows) {
  require(zs.rows() >= 1 && zs.cols() >= 1, "starting_weights: empty block");
  require(mask.rows() == zs.rows() && mask.cols() == zs.cols(),
          "starting_weights: mask shape mismatch");
  require_finite(zs, "starting_weights");
  mask.validate();
  if (all_flagged_rows) all_flagged_rows->clear();

  Vector dist(zs.rows());
  Index evidence_rows = 0;
  for (Index i = 0; i < zs.rows(); ++i) {
    double acc = 0.0;
    Index m = 0;
    for (Index j = 0; j < zs.cols(); ++j) {
      if (!mask.clean(i, j)) continue;
      acc += zs(i, j) * zs(i, j);
      ++m;
    }
    if (m == 0) {
      dist[i] = 0.0;  // no clean cells: neutral distance, weight 1
      if (all_flagged_rows) all_flagged_rows->push_back(i);
    } else {
      dist[i] = std::sqrt(acc / static_cast<double>(m));
      ++evidence_rows;
    }
  }
  if (evidence_rows == 0)
    throw DegenerateDataError(
        "starting_weights: every row is fully flagged, no clean cells left");

  const double med = median(dist);
  const HampelCutoffs cutoffs = hampel_cutoffs(spec, k);
  Vector w(zs.rows());
  for (Index i = 0; i < zs.rows(); ++i) {
    double nd;
    if (med > 0.0)
      nd = dist[i] / med;
    else
      nd = dist[i] == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    w[i] = psi_weight(nd, cutoffs, spec.family);
  }
  return w;
}

Vector case_weights(const Matrix& t_ref, const Matrix& t_cont,
                    const PsiSpec& spec, const Vector& prior) {
  require(t_ref.rows() == t_cont.rows() && t_ref.cols() == t_cont.cols(),
          "case_weights: score shape mismatch");
  require(t_ref.rows() >= 2 && t_ref.cols() >= 1,
          "case_weights: need at least 2 rows and 1 component");
  require(prior.size() == t_ref.rows(), "case_weights: prior length mismatch");
  require_finite(t_ref, "case_weights reference scores");
  require_finite(t_cont, "case_weights contaminated scores");
  require_finite(prior, "case_weights prior");

  // The reference scaler family is fixed to median/MAD regardless of the
  // global preprocessing choice: the scores feeding it may contain exactly
  // the outliers the weights must resist.
  const ScalingModel scaler =
      fit_scaler(t_ref, LocationKind::median, RobustScaleKind::mad);
  const Matrix zc = transform(t_cont, scaler);
  const Matrix zr = transform(t_ref, scaler);

  const Vector d_cont = zc.rowwise().norm();
  const Vector d_ref = zr.rowwise().norm();

  // The prior iteration's weights anchor the normalizing median in the rows
  // that looked clean so far. With more than half the rows contaminated a
  // plain median would be dragged into the outlier cloud and the cutoffs
  // would stretch to accommodate it.
  const double wmed = weighted_median(d_ref, prior);
  if (wmed <= 0.0)
    throw DegenerateDataError(
        "case_weights: weighted median of reference distances is zero");

  const HampelCutoffs cutoffs =
      hampel_cutoffs(spec, static_cast<int>(t_ref.cols()));
  Vector w(d_cont.size());
  for (Index i = 0; i < d_cont.size(); ++i)
    w[i] = psi_weight(d_cont[i] / wmed, cutoffs, spec.family);
  return w;
}

}  // namespace crtb
