#pragma once

#include "crtb/crtb.hpp"
#include "crtb/types.hpp"

#include <cstdint>

namespace crtb {

// Variance-weighted mean squared prediction error across response columns.
// mean_ratio: mean_j of MSE_j / var_j. normalized: sum_j w_j * MSE_j with
// w_j proportional to 1 / var_j and summing to 1.
enum class WmseMode { mean_ratio, normalized };

double wmse(const Matrix& y, const Matrix& y_hat, const Vector& col_vars,
            WmseMode mode);

// Normalized wmse over the cells that survive a per-column residual filter:
// cells whose residual lies more than the two-sided alpha cut (in MAD units)
// away from the column's residual median are excluded, and each column
// contributes the average of its surviving squared residuals. A column with
// zero residual MAD has no usable scale and falls back to the plain average.
double wmse_filtered(const Matrix& y, const Matrix& y_hat,
                     const Vector& col_vars, double alpha);

// The four estimators compared throughout: plain twoblock baselines with
// mean/std preprocessing and no downweighting, and the robust fits.
enum class MethodKind { tb_dense, tb_sparse, crtb_dense, crtb_sparse };

bool is_sparse(MethodKind m);
bool is_robust(MethodKind m);
const char* method_name(MethodKind m);
MethodKind method_from_name(const std::string& name);

// Resolve a config for a method: tb_* variants force mean centering, std
// scaling, unit psi and no floor masks; crtb_* variants keep the base
// preprocessing/psi choices. Dense variants force eta to 0.
CrtbConfig config_for_method(MethodKind method, const CrtbConfig& base);

CrtbFit fit_method(const Matrix& x, const Matrix& y, MethodKind method,
                   const CrtbConfig& base);

// Held-out scores for cross-validation. The plain modes average squared
// residuals over every held-out cell, so a handful of contaminated cells
// can dominate the fold score and the grid choice degenerates to noise.
// wmse_filtered excludes held-out cells whose residual sits more than the
// alpha-quantile (0.99, matching the cell filter) away from the column's
// residual median in MAD units, then applies the normalized wmse weights
// to the surviving cells. On clean data that trims about 1% of cells and
// the score tracks wmse_normalized closely.
enum class CvMetric { mse, wmse_mean_ratio, wmse_normalized, wmse_filtered };

struct CvGrid {
  std::vector<double> etas{0.3, 0.5, 0.7};
  std::vector<Index> k_xs;  // empty: use the base config value
  std::vector<Index> k_ys;
  int folds = 3;
  // Independent fold partitions averaged per grid cell. A single partition's
  // fold scores are often too noisy to separate neighboring grid values;
  // averaging a few partitions stabilizes the choice without changing what
  // one partition measures.
  int repeats = 1;
  std::uint64_t seed = 0;
  CvMetric metric = CvMetric::wmse_filtered;
};

struct CvCell {
  double eta = 0.0;
  Index k_x = 0;
  Index k_y = 0;
  double mean = 0.0;
  double sd = 0.0;
  int failures = 0;
};

struct CvResult {
  double best_eta = 0.0;
  Index best_k_x = 0;
  Index best_k_y = 0;
  std::vector<CvCell> table;
  std::vector<int> fold_of_row;
};

// Seeded k-fold cross-validation over (eta, k_x, k_y) cells. Fold sizes
// differ by at most one; a failed fit scores +inf for its fold and is
// counted. Ties prefer larger eta, then smaller k_x, then smaller k_y. For
// dense methods the eta grid collapses to {0}.
CvResult kfold_cv(const Matrix& x, const Matrix& y, const CvGrid& grid,
                  MethodKind method, const CrtbConfig& base);

}  // namespace crtb
