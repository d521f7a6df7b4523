#pragma once

#include "crtb/preprocess.hpp"
#include "crtb/robustweights.hpp"
#include "crtb/twoblock.hpp"
#include "crtb/types.hpp"

#include <optional>
#include <string>

namespace crtb {

enum class Initializer { prefilter, external_mask };

struct CrtbConfig {
  Index k_x = 1;
  Index k_y = 1;
  double eta_x = 0.0;
  double eta_y = 0.0;
  LocationKind location = LocationKind::median;
  RobustScaleKind scale = RobustScaleKind::mad;
  double alpha_cell = 0.99;
  PsiSpec psi{};
  double tol = 1e-4;
  int max_iter = 25;
  // Case weights are re-estimated during the first weight_iters iterations
  // and then held fixed. The redescending update recalibrates its reference
  // scaler from the moving scores, which on finite samples keeps exciting
  // small fit changes indefinitely; freezing the weights after a couple of
  // updates lets the imputation iteration contract to the tolerance. Two
  // updates are enough to isolate gross rows in both contamination regimes,
  // and every further update drifts the weighted-median anchor lower on
  // clean data (downweighted top-quartile rows shrink the normalizer, which
  // trims more rows, which shrinks it further), costing efficiency.
  int weight_iters = 2;
  Initializer initializer = Initializer::prefilter;
  // Consulted only when initializer == external_mask; an absent mask means
  // all cells are treated as clean.
  std::optional<CellMask> external_floor_x;
  std::optional<CellMask> external_floor_y;

  void validate() const;
};

struct CrtbFit {
  TwoblockModel model;       // fitted on the weighted standardized blocks
  ScalingModel scaler_x;
  ScalingModel scaler_y;
  CellMask floor_x;          // cell floor masks, fixed across iterations
  CellMask floor_y;
  Vector wx;                 // final case weights per block
  Vector wy;
  Matrix xs_imputed;         // standardized blocks with flagged cells imputed
  Matrix ys_imputed;
  Matrix B;                  // original-scale coefficients, p x q
  Vector intercept;          // q
  int n_iter = 0;
  bool converged = false;
  std::vector<double> trace; // squared Frobenius norm of Bs per iteration
  CrtbConfig config;
  std::vector<std::string> warnings;
};

// Iteratively reweighted cellwise-robust twoblock fit on raw (unstandardized)
// blocks. Column scalers are refit on the cells the wide-cut prefilter (or
// the external mask) leaves clean, re-flagging until the flag set stabilizes,
// so one-sided contamination cannot shift the centers or inflate the scales.
// Non-convergence within max_iter is reported through the converged flag,
// not an error.
CrtbFit fit_crtb(const Matrix& x, const Matrix& y, const CrtbConfig& config);

// Model-based update of flagged cells: per row, flagged entries are replaced
// by the rank-k reconstruction t P' of the row's clean part (flagged cells
// zeroed before projection). Clean cells pass through bit-identically.
Matrix impute_cells(const Matrix& zs_init, const CellMask& mask,
                    const Matrix& w, const Matrix& p);

// Relative change of the squared Frobenius norm below tol. A zero previous
// norm leaves the criterion undefined and raises DegenerateDataError.
bool has_converged(const Matrix& bs_prev, const Matrix& bs_curr, double tol);

// Undo the column standardization: B_jl = (scale_y_l / scale_x_j) * Bs_jl.
Matrix rescale_coefficients(const Matrix& bs, const ScalingModel& scaler_x,
                            const ScalingModel& scaler_y);

// Per-column center (mean or median) of the residuals Y - X * B.
Vector fit_intercept(const Matrix& y, const Matrix& x, const Matrix& b,
                     LocationKind location);

// Original-scale predictions X * B + intercept.
Matrix predict(const CrtbFit& fit, const Matrix& x);

// Original-scale copy of a new predictor block with outlying cells replaced
// by their model reconstruction. The block is standardized with the training
// scalers, cells are flagged by the same filter the fit used, and flagged
// cells are imputed from the fitted loadings before mapping back. Predicting
// from the cleaned block keeps isolated gross cells in new rows from
// propagating into every fitted response.
Matrix clean_cells(const CrtbFit& fit, const Matrix& x, double alpha);

// Per-cell weights (case weight times clean indicator) and the derived
// flagged-cell indicators (weight below 0.5).
struct CellWeightReport {
  Matrix weights_x;   // n x p
  Matrix weights_y;   // n x q
  IntMatrix flagged_x;
  IntMatrix flagged_y;
};

CellWeightReport cell_weight_report(const CrtbFit& fit);

// Serialization to a self-describing JSON artifact. Doubles round-trip
// exactly, so a loaded fit reproduces predictions bit-for-bit. Score and
// imputed-block matrices are not part of the artifact; a loaded fit supports
// predict and cell_weight_report.
void save_fit(const CrtbFit& fit, const std::string& path,
              const std::vector<std::string>& x_names = {},
              const std::vector<std::string>& y_names = {});

struct LoadedFit {
  CrtbFit fit;
  std::vector<std::string> x_names;
  std::vector<std::string> y_names;
};

LoadedFit load_fit(const std::string& path);

}  // namespace crtb
