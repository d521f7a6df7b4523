#include "crtb/crtb.hpp"

#include "crtb/numkernel.hpp"

#include <cmath>

namespace crtb {

namespace {

Matrix zero_flagged(const Matrix& zs, const CellMask& mask) {
  Matrix out = zs;
  for (Index j = 0; j < out.cols(); ++j)
    for (Index i = 0; i < out.rows(); ++i)
      if (!mask.clean(i, j)) out(i, j) = 0.0;
  return out;
}

Matrix row_scale_sqrt(const Matrix& m, const Vector& w) {
  return w.array().sqrt().matrix().asDiagonal() * m;
}

void note_degenerate_columns(const ScalingModel& s, const char* block,
                             std::vector<std::string>& warnings) {
  for (Index j : s.degenerate_columns)
    warnings.push_back(std::string(block) + " column " + std::to_string(j) +
                       " is constant; scale fell back to 1");
}

void note_zero_mad_columns(const std::vector<Index>& cols, const char* block,
                           std::vector<std::string>& warnings) {
  for (Index j : cols)
    warnings.push_back(std::string(block) + " column " + std::to_string(j) +
                       " has zero median absolute value; prefilter flags "
                       "nothing there");
}

CellMask resolve_floor(const std::optional<CellMask>& external, Index rows,
                       Index cols, const char* block) {
  if (!external) return CellMask::all_clean(rows, cols);
  require(external->rows() == rows && external->cols() == cols,
          std::string("fit_crtb: external ") + block +
              " mask shape does not match the data");
  external->validate();
  return *external;
}

}  // namespace

void CrtbConfig::validate() const {
  require(k_x >= 1 && k_y >= 1, "CrtbConfig: component counts must be >= 1");
  require(eta_x >= 0.0 && eta_x < 1.0, "CrtbConfig: eta_x must lie in [0,1)");
  require(eta_y >= 0.0 && eta_y < 1.0, "CrtbConfig: eta_y must lie in [0,1)");
  require(alpha_cell > 0.0 && alpha_cell < 1.0,
          "CrtbConfig: alpha_cell must lie in (0,1)");
  require(tol > 0.0, "CrtbConfig: tol must be positive");
  require(max_iter >= 1, "CrtbConfig: max_iter must be >= 1");
  require(weight_iters >= 1, "CrtbConfig: weight_iters must be >= 1");
  psi.validate();
}

CrtbFit fit_crtb(const Matrix& x, const Matrix& y, const CrtbConfig& config) {
  config.validate();
  require(x.rows() == y.rows(), "fit_crtb: row count mismatch");
  require(x.rows() >= std::max(config.k_x, config.k_y) + 2,
          "fit_crtb: need at least max(k_x, k_y) + 2 rows");
  require_finite(x, "fit_crtb X");
  require_finite(y, "fit_crtb Y");

  CrtbFit fit;
  fit.config = config;

  // Standardization alternates scaler fits with gross-cell flagging until
  // the flag set stabilizes. Plain column medians and scales are biased when
  // heavy one-sided contamination occupies a sizable fraction of a column
  // (20% of rows shifted moves the median about a third of a sigma, and the
  // MAD can double), and that bias propagates into every downstream
  // direction estimate. Under the biased rough scaling the gross cells may
  // sit barely past the cut, so a single refit can leave some behind; each
  // pass sharpens the scalers and the next pass catches the rest. On clean
  // data the flag set stabilizes immediately. The exclusion cut is
  // deliberately wider than alpha_cell: the refit only has to remove gross
  // structural outliers, and trimming legitimate tails would shrink the
  // scales and cost clean-data efficiency. External masks get one refit
  // instead: the caller's detector says which cells the scalers may trust.
  if (config.initializer == Initializer::prefilter) {
    const double refit_alpha = std::max(config.alpha_cell, 0.999);
    const ScalingModel rough_x = fit_scaler(x, config.location, config.scale);
    const ScalingModel rough_y = fit_scaler(y, config.location, config.scale);
    CellMask gross_x = prefilter(transform(x, rough_x), refit_alpha);
    CellMask gross_y = prefilter(transform(y, rough_y), refit_alpha);
    for (int pass = 0;; ++pass) {
      fit.scaler_x = fit_scaler(x, gross_x, config.location, config.scale);
      fit.scaler_y = fit_scaler(y, gross_y, config.location, config.scale);
      if (pass == 4) break;
      const CellMask next_x =
          prefilter(transform(x, fit.scaler_x), refit_alpha);
      const CellMask next_y =
          prefilter(transform(y, fit.scaler_y), refit_alpha);
      const bool stable =
          (next_x.entries.array() == gross_x.entries.array()).all() &&
          (next_y.entries.array() == gross_y.entries.array()).all();
      if (stable) break;
      gross_x = next_x;
      gross_y = next_y;
    }
  } else {
    fit.floor_x =
        resolve_floor(config.external_floor_x, x.rows(), x.cols(), "X");
    fit.floor_y =
        resolve_floor(config.external_floor_y, y.rows(), y.cols(), "Y");
    fit.scaler_x = fit_scaler(x, fit.floor_x, config.location, config.scale);
    fit.scaler_y = fit_scaler(y, fit.floor_y, config.location, config.scale);
  }
  note_degenerate_columns(fit.scaler_x, "X", fit.warnings);
  note_degenerate_columns(fit.scaler_y, "Y", fit.warnings);
  const Matrix xs = transform(x, fit.scaler_x);
  const Matrix ys = transform(y, fit.scaler_y);

  if (config.initializer == Initializer::prefilter) {
    std::vector<Index> zero_cols;
    fit.floor_x = prefilter(xs, config.alpha_cell, &zero_cols);
    note_zero_mad_columns(zero_cols, "X", fit.warnings);
    fit.floor_y = prefilter(ys, config.alpha_cell, &zero_cols);
    note_zero_mad_columns(zero_cols, "Y", fit.warnings);
  }

  Matrix x_init = zero_flagged(xs, fit.floor_x);
  Matrix y_init = zero_flagged(ys, fit.floor_y);

  std::vector<Index> blind_rows;
  fit.wx = starting_weights(xs, fit.floor_x, config.psi,
                            static_cast<int>(config.k_x), &blind_rows);
  for (Index i : blind_rows)
    fit.warnings.push_back("X row " + std::to_string(i) +
                           " has no clean cells; starting weight set to 1");
  fit.wy = starting_weights(ys, fit.floor_y, config.psi,
                            static_cast<int>(config.k_y), &blind_rows);
  for (Index i : blind_rows)
    fit.warnings.push_back("Y row " + std::to_string(i) +
                           " has no clean cells; starting weight set to 1");

  Matrix xw = row_scale_sqrt(x_init, fit.wx);
  Matrix yw = row_scale_sqrt(y_init, fit.wy);

  Matrix bs_prev;
  for (int t = 1; t <= config.max_iter; ++t) {
    fit.model = fit_twoblock(xw, yw, config.k_x, config.k_y, config.eta_x,
                             config.eta_y);
    fit.n_iter = t;
    fit.trace.push_back(fit.model.Bs.squaredNorm());

    // Dual score sets: the living imputed block anchors the reference, the
    // raw standardized block exposes the contamination. Updates stop after
    // weight_iters so the remaining imputation iteration can contract.
    if (t <= config.weight_iters) {
      const Matrix t_ref = x_init * fit.model.W;
      const Matrix t_cont = xs * fit.model.W;
      const Matrix u_ref = y_init * fit.model.V;
      const Matrix u_cont = ys * fit.model.V;
      fit.wx = case_weights(t_ref, t_cont, config.psi, fit.wx);
      fit.wy = case_weights(u_ref, u_cont, config.psi, fit.wy);
    }

    x_init = impute_cells(x_init, fit.floor_x, fit.model.W, fit.model.P);
    y_init = impute_cells(y_init, fit.floor_y, fit.model.V, fit.model.Q);
    xw = row_scale_sqrt(x_init, fit.wx);
    yw = row_scale_sqrt(y_init, fit.wy);

    if (t >= 2 && has_converged(bs_prev, fit.model.Bs, config.tol)) {
      fit.converged = true;
      break;
    }
    bs_prev = fit.model.Bs;
  }
  if (!fit.converged)
    fit.warnings.push_back("no convergence within " +
                           std::to_string(config.max_iter) + " iterations");

  fit.xs_imputed = std::move(x_init);
  fit.ys_imputed = std::move(y_init);
  fit.B = rescale_coefficients(fit.model.Bs, fit.scaler_x, fit.scaler_y);
  fit.intercept = fit_intercept(y, x, fit.B, config.location);
  return fit;
}

Matrix impute_cells(const Matrix& zs_init, const CellMask& mask,
                    const Matrix& w, const Matrix& p) {
  require(mask.rows() == zs_init.rows() && mask.cols() == zs_init.cols(),
          "impute_cells: mask shape mismatch");
  require(w.rows() == zs_init.cols() && p.rows() == zs_init.cols() &&
              w.cols() == p.cols(),
          "impute_cells: weight/loading shape mismatch");
  require_finite(zs_init, "impute_cells");

  Matrix out = zs_init;
  Eigen::RowVectorXd clean_row(zs_init.cols());
  for (Index i = 0; i < zs_init.rows(); ++i) {
    bool any_flagged = false;
    for (Index j = 0; j < zs_init.cols(); ++j) {
      if (!mask.clean(i, j)) {
        any_flagged = true;
        break;
      }
    }
    if (!any_flagged) continue;

    for (Index j = 0; j < zs_init.cols(); ++j)
      clean_row[j] = mask.clean(i, j) ? zs_init(i, j) : 0.0;
    const Eigen::RowVectorXd scores = clean_row * w;
    const Eigen::RowVectorXd recon = scores * p.transpose();
    for (Index j = 0; j < zs_init.cols(); ++j)
      if (!mask.clean(i, j)) out(i, j) = recon[j];
  }
  return out;
}

bool has_converged(const Matrix& bs_prev, const Matrix& bs_curr, double tol) {
  require(bs_prev.rows() == bs_curr.rows() && bs_prev.cols() == bs_curr.cols(),
          "has_converged: shape mismatch");
  require(tol > 0.0, "has_converged: tol must be positive");
  const double prev = bs_prev.squaredNorm();
  if (prev == 0.0)
    throw DegenerateDataError(
        "has_converged: previous coefficient norm is zero");
  return std::abs(bs_curr.squaredNorm() - prev) / prev < tol;
}

Matrix rescale_coefficients(const Matrix& bs, const ScalingModel& scaler_x,
                            const ScalingModel& scaler_y) {
  require(bs.rows() == scaler_x.cols() && bs.cols() == scaler_y.cols(),
          "rescale_coefficients: shape mismatch");
  return (bs.array().colwise() / scaler_x.scales.array()).rowwise() *
         scaler_y.scales.transpose().array();
}

Vector fit_intercept(const Matrix& y, const Matrix& x, const Matrix& b,
                     LocationKind location) {
  require(x.rows() == y.rows(), "fit_intercept: row count mismatch");
  require(x.cols() == b.rows() && y.cols() == b.cols(),
          "fit_intercept: coefficient shape mismatch");
  const Matrix resid = y - x * b;
  Vector out(y.cols());
  for (Index j = 0; j < y.cols(); ++j)
    out[j] = location == LocationKind::mean ? resid.col(j).mean()
                                            : median(resid.col(j));
  return out;
}

Matrix predict(const CrtbFit& fit, const Matrix& x) {
  require(x.cols() == fit.B.rows(), "predict: column count mismatch");
  require_finite(x, "predict");
  return (x * fit.B).rowwise() + fit.intercept.transpose();
}

Matrix clean_cells(const CrtbFit& fit, const Matrix& x, double alpha) {
  require(x.cols() == fit.scaler_x.centers.size(),
          "clean_cells: column count mismatch");
  require_finite(x, "clean_cells");
  const Matrix xs = transform(x, fit.scaler_x);
  const CellMask mask = prefilter(xs, alpha);
  return inverse_transform(impute_cells(xs, mask, fit.model.W, fit.model.P),
                           fit.scaler_x);
}

CellWeightReport cell_weight_report(const CrtbFit& fit) {
  require(fit.wx.size() == fit.floor_x.rows() &&
              fit.wy.size() == fit.floor_y.rows(),
          "cell_weight_report: fit is incomplete");
  CellWeightReport report;
  report.weights_x =
      fit.wx.asDiagonal() * fit.floor_x.entries.cast<double>().matrix();
  report.weights_y =
      fit.wy.asDiagonal() * fit.floor_y.entries.cast<double>().matrix();
  report.flagged_x =
      (report.weights_x.array() < 0.5).cast<int>().matrix();
  report.flagged_y =
      (report.weights_y.array() < 0.5).cast<int>().matrix();
  return report;
}

}  // namespace crtb
