#pragma once

#include "crtb/modelselect.hpp"
#include "crtb/twoblock.hpp"
#include "crtb/types.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <string>

namespace crtb {

// Latent-factor generator: X = [T Ps' + E, noise], Y = T C + F, with T and C
// standard normal, Ps an orthonormal p_signal x k frame, and independent
// Gaussian noise of scale sigma_e / sigma_f. The population coefficient
// matrix has rows Ps C / (1 + sigma_e^2) for signal predictors and 0 for
// noise predictors.
struct DgpParams {
  Index n = 100;
  Index k = 3;
  Index q = 4;
  Index p_signal = 20;
  Index p_noise = 10;
  double sigma_e = 0.5;
  double sigma_f = 0.5;
  std::uint64_t seed = 0;

  Index p() const { return p_signal + p_noise; }
};

struct Dgp {
  Matrix x;         // n x (p_signal + p_noise)
  Matrix y;         // n x q
  Matrix b_true;    // p x q
  Matrix p_signal;  // p_signal x k, orthonormal columns
  Matrix c;         // k x q
};

Dgp generate_dgp(const DgpParams& params);

enum class ContaminationRegime { cellwise, rowwise };

struct ContaminationSpec {
  ContaminationRegime regime = ContaminationRegime::cellwise;
  // cellwise: fraction of rows hit and expected fraction of signal cells
  // contaminated within each hit row.
  double row_rate = 0.70;
  double cell_pct = 0.0;
  // rowwise: fraction of rows shifted in every signal X and every Y column.
  double row_pct = 0.0;
  double delta = 10.0;
  std::uint64_t seed = 0;
};

// Truth matrices mark contaminated cells with 1. cell_pct == 0 (or
// row_pct == 0 for the rowwise overload) returns the data untouched with an
// all-zero truth.
struct Contaminated {
  Matrix x;
  Matrix y;
  IntMatrix truth_x;  // n x p
  IntMatrix truth_y;  // n x q
};

Contaminated contaminate_cellwise(const Matrix& x, const Matrix& y,
                                  const ContaminationSpec& spec,
                                  Index p_signal);

struct ContaminatedRows {
  Matrix x;
  Matrix y;
  Eigen::VectorXi truth_rows;  // n, 1 = contaminated row
};

ContaminatedRows contaminate_rowwise(const Matrix& x, const Matrix& y,
                                     const ContaminationSpec& spec,
                                     Index p_signal);

// ||b_hat - b_true||_F^2 / (p * q).
double mse_b(const Matrix& b_hat, const Matrix& b_true);

struct PrfMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

PrfMetrics prf_from_counts(Index tp, Index fp, Index fn);

// Variable selection quality of a sparse X-weight matrix: a predictor is
// selected when any entry of its W row is nonzero; the first p_signal
// indices are the true signal set. No variable selected yields (0,0,0) and
// sets none_selected.
PrfMetrics selection_f1(const TwoblockModel& model, Index p_signal,
                        Index p_noise, bool* none_selected = nullptr);

// Confusion arithmetic between binary flag and truth matrices of equal shape.
PrfMetrics detection_metrics(const IntMatrix& flagged, const IntMatrix& truth);

struct MethodRecord {
  int replicate = 0;
  MethodKind method = MethodKind::tb_dense;
  double contamination_pct = 0.0;
  bool failed = false;
  std::string error;
  double mse = std::numeric_limits<double>::quiet_NaN();
  std::optional<PrfMetrics> selection;
  std::optional<PrfMetrics> detection_x;
  std::optional<PrfMetrics> detection_y;
  std::optional<double> eta_chosen;
  int n_iter = 0;
  bool converged = false;
};

struct ScenarioConfig {
  DgpParams dgp;
  ContaminationSpec contamination;
  std::vector<MethodKind> methods{MethodKind::tb_dense, MethodKind::crtb_dense,
                                  MethodKind::tb_sparse,
                                  MethodKind::crtb_sparse};
  int replicates = 50;
  std::uint64_t seed = 0;
  int workers = 1;  // 0: one per hardware thread
  // tb_sparse runs at this fixed eta; crtb_sparse selects eta by k-fold CV.
  double tb_sparse_eta = 0.5;
  std::vector<double> cv_etas{0.3, 0.5, 0.7};
  int cv_folds = 3;
  // Fold partitions averaged per eta. One partition of 3 folds is too noisy
  // to separate neighboring grid values under heavy contamination.
  int cv_repeats = 5;
  // Base estimator settings shared by every method (k defaults to dgp.k).
  PsiSpec psi{};
  double alpha_cell = 0.99;
  double tol = 1e-4;
  int max_iter = 25;
  int weight_iters = 2;
};

struct ScenarioResult {
  ScenarioConfig config;
  std::vector<MethodRecord> records;  // replicates x methods, replicate-major
};

// Runs the full protocol: per replicate, generate, contaminate, fit every
// method, and score against the known truth. Every random stream derives
// from the master seed and the replicate index, so results are reproducible
// for any worker count.
ScenarioResult run_scenario(const ScenarioConfig& config);

struct SweepPoint {
  double pct = 0.0;
  ScenarioResult result;
};

// Contamination-strength sweep: reruns the scenario at each percentage
// (cell_pct or row_pct depending on the regime), deriving one seed per grid
// point from the master seed.
std::vector<SweepPoint> run_sweep(const ScenarioConfig& base,
                                  const std::vector<double>& pcts);

// Aggregate rows (method, metric, count, mean, sd, median) over the finite
// values of each metric in the records.
struct SummaryRow {
  std::string method;
  std::string metric;
  Index count = 0;
  double mean = 0.0;
  double sd = 0.0;
  double median = 0.0;
};

std::vector<SummaryRow> summarize(const ScenarioResult& result);

}  // namespace crtb
