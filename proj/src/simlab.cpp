#include "crtb/simlab.hpp"

#include "crtb/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace crtb {

namespace {

// Draw order per replicate: T, then the Gaussian frame behind P_signal, then
// C, then E, noise block, F. Changing this order changes every published
// stream, so it is fixed.
enum SeedStream : std::uint64_t {
  kDgpStream = 1,
  kContaminationStream = 2,
  kCvStream = 3,
};

Index ceil_count(double rate, Index n) {
  return static_cast<Index>(
      std::ceil(rate * static_cast<double>(n) - 1e-12));
}

int truncated_poisson(Rng& rng, double mean, Index limit) {
  const int draw = rng.poisson(mean);
  return static_cast<int>(
      std::clamp<Index>(static_cast<Index>(draw), 1, limit));
}

std::vector<Index> sorted_rows(Rng& rng, Index n, Index count) {
  std::vector<Index> rows = rng.sample_without_replacement(n, count);
  std::sort(rows.begin(), rows.end());
  return rows;
}

}  // namespace

Dgp generate_dgp(const DgpParams& params) {
  require(params.n >= 2, "generate_dgp: n must be >= 2");
  require(params.k >= 1 && params.k <= params.p_signal &&
              params.k <= params.q,
          "generate_dgp: need 1 <= k <= min(p_signal, q)");
  require(params.p_signal >= 1, "generate_dgp: p_signal must be >= 1");
  require(params.p_noise >= 0, "generate_dgp: p_noise must be >= 0");
  require(params.sigma_e >= 0.0 && params.sigma_f >= 0.0,
          "generate_dgp: noise scales must be nonnegative");

  Rng rng(params.seed);
  const Matrix t = rng.normal_matrix(params.n, params.k);
  const Matrix frame = rng.normal_matrix(params.p_signal, params.k);
  const Matrix c = rng.normal_matrix(params.k, params.q);
  const Matrix e = params.sigma_e * rng.normal_matrix(params.n, params.p_signal);
  const Matrix noise =
      params.sigma_e * rng.normal_matrix(params.n, params.p_noise);
  const Matrix f = params.sigma_f * rng.normal_matrix(params.n, params.q);

  // Orthonormal frame from the thin QR of a Gaussian matrix; column signs
  // fixed so the factorization is canonical.
  Eigen::HouseholderQR<Matrix> qr(frame);
  Matrix ps = qr.householderQ() * Matrix::Identity(params.p_signal, params.k);
  const Matrix r =
      qr.matrixQR().topLeftCorner(params.k, params.k).triangularView<Eigen::Upper>();
  for (Index j = 0; j < params.k; ++j)
    if (r(j, j) < 0.0) ps.col(j) = -ps.col(j);

  Dgp out;
  out.p_signal = std::move(ps);
  out.c = c;
  out.x.resize(params.n, params.p());
  out.x.leftCols(params.p_signal) = t * out.p_signal.transpose() + e;
  out.x.rightCols(params.p_noise) = noise;
  out.y = t * c + f;
  out.b_true = Matrix::Zero(params.p(), params.q);
  out.b_true.topRows(params.p_signal) =
      out.p_signal * c / (1.0 + params.sigma_e * params.sigma_e);
  return out;
}

Contaminated contaminate_cellwise(const Matrix& x, const Matrix& y,
                                  const ContaminationSpec& spec,
                                  Index p_signal) {
  require(x.rows() == y.rows(), "contaminate_cellwise: row count mismatch");
  require(p_signal >= 1 && p_signal <= x.cols(),
          "contaminate_cellwise: p_signal out of range");
  require(spec.row_rate >= 0.0 && spec.row_rate <= 1.0,
          "contaminate_cellwise: row_rate out of range");
  require(spec.cell_pct >= 0.0 && spec.cell_pct <= 1.0,
          "contaminate_cellwise: cell_pct out of range");

  Contaminated out;
  out.x = x;
  out.y = y;
  out.truth_x = IntMatrix::Zero(x.rows(), x.cols());
  out.truth_y = IntMatrix::Zero(y.rows(), y.cols());
  if (spec.cell_pct == 0.0 || spec.row_rate == 0.0) return out;

  Rng rng(spec.seed);
  const Index hit = ceil_count(spec.row_rate, x.rows());
  const std::vector<Index> rows = sorted_rows(rng, x.rows(), hit);

  for (Index i : rows) {
    const int nx = truncated_poisson(
        rng, spec.cell_pct * static_cast<double>(p_signal), p_signal);
    for (Index j : rng.sample_without_replacement(p_signal, nx)) {
      out.x(i, j) += spec.delta;
      out.truth_x(i, j) = 1;
    }
    const int ny = truncated_poisson(
        rng, spec.cell_pct * static_cast<double>(y.cols()), y.cols());
    for (Index j : rng.sample_without_replacement(y.cols(), ny)) {
      out.y(i, j) += spec.delta;
      out.truth_y(i, j) = 1;
    }
  }
  return out;
}

ContaminatedRows contaminate_rowwise(const Matrix& x, const Matrix& y,
                                     const ContaminationSpec& spec,
                                     Index p_signal) {
  require(x.rows() == y.rows(), "contaminate_rowwise: row count mismatch");
  require(p_signal >= 1 && p_signal <= x.cols(),
          "contaminate_rowwise: p_signal out of range");
  require(spec.row_pct >= 0.0 && spec.row_pct <= 1.0,
          "contaminate_rowwise: row_pct out of range");

  ContaminatedRows out;
  out.x = x;
  out.y = y;
  out.truth_rows = Eigen::VectorXi::Zero(x.rows());
  if (spec.row_pct == 0.0) return out;

  Rng rng(spec.seed);
  const Index hit = ceil_count(spec.row_pct, x.rows());
  for (Index i : sorted_rows(rng, x.rows(), hit)) {
    out.x.row(i).head(p_signal).array() += spec.delta;
    out.y.row(i).array() += spec.delta;
    out.truth_rows[i] = 1;
  }
  return out;
}

double mse_b(const Matrix& b_hat, const Matrix& b_true) {
  require(b_hat.rows() == b_true.rows() && b_hat.cols() == b_true.cols(),
          "mse_b: shape mismatch");
  require(b_hat.size() > 0, "mse_b: empty matrices");
  return (b_hat - b_true).squaredNorm() /
         static_cast<double>(b_hat.size());
}

PrfMetrics prf_from_counts(Index tp, Index fp, Index fn) {
  PrfMetrics m;
  m.precision = (tp + fp) > 0
                    ? static_cast<double>(tp) / static_cast<double>(tp + fp)
                    : 0.0;
  m.recall = (tp + fn) > 0
                 ? static_cast<double>(tp) / static_cast<double>(tp + fn)
                 : 0.0;
  m.f1 = (m.precision + m.recall) > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

PrfMetrics selection_f1(const TwoblockModel& model, Index p_signal,
                        Index p_noise, bool* none_selected) {
  require(model.W.rows() == p_signal + p_noise,
          "selection_f1: predictor count mismatch");
  if (none_selected) *none_selected = false;

  Index tp = 0, fp = 0, fn = 0, selected = 0;
  for (Index j = 0; j < model.W.rows(); ++j) {
    const bool sel = (model.W.row(j).array() != 0.0).any();
    const bool signal = j < p_signal;
    selected += sel ? 1 : 0;
    if (sel && signal)
      ++tp;
    else if (sel && !signal)
      ++fp;
    else if (!sel && signal)
      ++fn;
  }
  if (selected == 0) {
    if (none_selected) *none_selected = true;
    return PrfMetrics{};
  }
  return prf_from_counts(tp, fp, fn);
}

PrfMetrics detection_metrics(const IntMatrix& flagged, const IntMatrix& truth) {
  require(flagged.rows() == truth.rows() && flagged.cols() == truth.cols(),
          "detection_metrics: shape mismatch");
  Index tp = 0, fp = 0, fn = 0;
  for (Index j = 0; j < flagged.cols(); ++j) {
    for (Index i = 0; i < flagged.rows(); ++i) {
      require(flagged(i, j) == 0 || flagged(i, j) == 1,
              "detection_metrics: flags must be 0 or 1");
      require(truth(i, j) == 0 || truth(i, j) == 1,
              "detection_metrics: truth must be 0 or 1");
      if (flagged(i, j) == 1 && truth(i, j) == 1)
        ++tp;
      else if (flagged(i, j) == 1)
        ++fp;
      else if (truth(i, j) == 1)
        ++fn;
    }
  }
  return prf_from_counts(tp, fp, fn);
}

namespace {

IntMatrix floor_flags(const CellMask& mask) {
  return (1 - mask.entries.array()).matrix();
}

// Row-level flags for the rowwise regime: a row counts as detected when any
// of its cells ends with weight below 0.5 (case weight times clean flag).
IntMatrix row_flags(const Matrix& cell_weights) {
  IntMatrix out(cell_weights.rows(), 1);
  for (Index i = 0; i < cell_weights.rows(); ++i)
    out(i, 0) = (cell_weights.row(i).array() < 0.5).any() ? 1 : 0;
  return out;
}

MethodRecord run_one_method(const ScenarioConfig& config, int replicate,
                            MethodKind method, const Matrix& x,
                            const Matrix& y, const Dgp& truth,
                            const IntMatrix* truth_x, const IntMatrix* truth_y,
                            const Eigen::VectorXi* truth_rows,
                            std::uint64_t rep_seed) {
  MethodRecord rec;
  rec.replicate = replicate;
  rec.method = method;
  rec.contamination_pct = config.contamination.regime ==
                                  ContaminationRegime::cellwise
                              ? config.contamination.cell_pct
                              : config.contamination.row_pct;

  CrtbConfig base;
  base.k_x = config.dgp.k;
  base.k_y = config.dgp.k;
  base.psi = config.psi;
  base.alpha_cell = config.alpha_cell;
  base.tol = config.tol;
  base.max_iter = config.max_iter;
  base.weight_iters = config.weight_iters;

  try {
    if (method == MethodKind::tb_sparse) base.eta_x = config.tb_sparse_eta;
    if (method == MethodKind::crtb_sparse) {
      CvGrid grid;
      grid.etas = config.cv_etas;
      grid.folds = config.cv_folds;
      grid.repeats = config.cv_repeats;
      grid.seed = derive_seed(rep_seed, kCvStream);
      const CvResult cv = kfold_cv(x, y, grid, method, base);
      base.eta_x = cv.best_eta;
      rec.eta_chosen = cv.best_eta;
    }

    const CrtbFit fit = fit_method(x, y, method, base);
    rec.mse = mse_b(fit.B, truth.b_true);
    rec.n_iter = fit.n_iter;
    rec.converged = fit.converged;

    if (is_sparse(method)) {
      rec.selection = selection_f1(fit.model, config.dgp.p_signal,
                                   config.dgp.p_noise);
      if (method == MethodKind::tb_sparse)
        rec.eta_chosen = config.tb_sparse_eta;
    }

    if (is_robust(method)) {
      if (truth_x && truth_y) {
        rec.detection_x =
            detection_metrics(floor_flags(fit.floor_x), *truth_x);
        rec.detection_y =
            detection_metrics(floor_flags(fit.floor_y), *truth_y);
      } else if (truth_rows) {
        const CellWeightReport report = cell_weight_report(fit);
        IntMatrix truth_col(truth_rows->size(), 1);
        for (Index i = 0; i < truth_rows->size(); ++i)
          truth_col(i, 0) = (*truth_rows)[i];
        rec.detection_x =
            detection_metrics(row_flags(report.weights_x), truth_col);
        rec.detection_y =
            detection_metrics(row_flags(report.weights_y), truth_col);
      }
    }
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.error = e.what();
  }
  return rec;
}

void run_replicate(const ScenarioConfig& config, int replicate,
                   std::vector<MethodRecord>& records) {
  const std::uint64_t rep_seed =
      derive_seed(config.seed, static_cast<std::uint64_t>(replicate));
  DgpParams dgp_params = config.dgp;
  dgp_params.seed = derive_seed(rep_seed, kDgpStream);
  const Dgp truth = generate_dgp(dgp_params);

  ContaminationSpec cspec = config.contamination;
  cspec.seed = derive_seed(rep_seed, kContaminationStream);

  Matrix x = truth.x;
  Matrix y = truth.y;
  IntMatrix truth_x, truth_y;
  Eigen::VectorXi truth_rows;
  bool have_cells = false, have_rows = false;
  if (cspec.regime == ContaminationRegime::cellwise) {
    if (cspec.cell_pct > 0.0) {
      Contaminated cont =
          contaminate_cellwise(x, y, cspec, config.dgp.p_signal);
      x = std::move(cont.x);
      y = std::move(cont.y);
      truth_x = std::move(cont.truth_x);
      truth_y = std::move(cont.truth_y);
      have_cells = true;
    }
  } else if (cspec.row_pct > 0.0) {
    ContaminatedRows cont =
        contaminate_rowwise(x, y, cspec, config.dgp.p_signal);
    x = std::move(cont.x);
    y = std::move(cont.y);
    truth_rows = std::move(cont.truth_rows);
    have_rows = true;
  }

  for (size_t m = 0; m < config.methods.size(); ++m) {
    records[static_cast<size_t>(replicate) * config.methods.size() + m] =
        run_one_method(config, replicate, config.methods[m], x, y, truth,
                       have_cells ? &truth_x : nullptr,
                       have_cells ? &truth_y : nullptr,
                       have_rows ? &truth_rows : nullptr, rep_seed);
  }
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& config) {
  require(config.replicates >= 1, "run_scenario: need at least 1 replicate");
  require(!config.methods.empty(), "run_scenario: empty method list");

  ScenarioResult result;
  result.config = config;
  result.records.resize(static_cast<size_t>(config.replicates) *
                        config.methods.size());

  int workers = config.workers;
  if (workers <= 0)
    workers = static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, config.replicates));

  if (workers == 1) {
    for (int r = 0; r < config.replicates; ++r)
      run_replicate(config, r, result.records);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int wkr = 0; wkr < workers; ++wkr) {
      pool.emplace_back([&] {
        for (int r = next.fetch_add(1); r < config.replicates;
             r = next.fetch_add(1))
          run_replicate(config, r, result.records);
      });
    }
    for (auto& th : pool) th.join();
  }
  return result;
}

std::vector<SweepPoint> run_sweep(const ScenarioConfig& base,
                                  const std::vector<double>& pcts) {
  require(!pcts.empty(), "run_sweep: empty grid");
  std::vector<SweepPoint> points;
  points.reserve(pcts.size());
  for (size_t i = 0; i < pcts.size(); ++i) {
    ScenarioConfig config = base;
    if (config.contamination.regime == ContaminationRegime::cellwise)
      config.contamination.cell_pct = pcts[i];
    else
      config.contamination.row_pct = pcts[i];
    config.seed = derive_seed(base.seed, 1000 + i);
    SweepPoint point;
    point.pct = pcts[i];
    point.result = run_scenario(config);
    points.push_back(std::move(point));
  }
  return points;
}

namespace {

struct Accum {
  std::vector<double> values;

  void add(double v) {
    if (std::isfinite(v)) values.push_back(v);
  }

  SummaryRow row(const std::string& method, const std::string& metric) const {
    SummaryRow out;
    out.method = method;
    out.metric = metric;
    out.count = static_cast<Index>(values.size());
    if (values.empty()) {
      out.mean = out.sd = out.median =
          std::numeric_limits<double>::quiet_NaN();
      return out;
    }
    double sum = 0.0;
    for (double v : values) sum += v;
    out.mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.sd = values.size() > 1
                 ? std::sqrt(ss / static_cast<double>(values.size() - 1))
                 : 0.0;
    Vector v(static_cast<Index>(values.size()));
    for (size_t i = 0; i < values.size(); ++i)
      v[static_cast<Index>(i)] = values[i];
    out.median = median(v);
    return out;
  }
};

}  // namespace

std::vector<SummaryRow> summarize(const ScenarioResult& result) {
  std::vector<SummaryRow> rows;
  for (MethodKind method : result.config.methods) {
    Accum mse, sel_f1, det_f1_x, det_f1_y, iters;
    Index converged = 0, ok = 0;
    for (const MethodRecord& rec : result.records) {
      if (rec.method != method || rec.failed) continue;
      ++ok;
      mse.add(rec.mse);
      if (rec.selection) sel_f1.add(rec.selection->f1);
      if (rec.detection_x) det_f1_x.add(rec.detection_x->f1);
      if (rec.detection_y) det_f1_y.add(rec.detection_y->f1);
      iters.add(rec.n_iter);
      converged += rec.converged ? 1 : 0;
    }
    const std::string name = method_name(method);
    rows.push_back(mse.row(name, "mse_b"));
    if (!sel_f1.values.empty()) rows.push_back(sel_f1.row(name, "sel_f1"));
    if (!det_f1_x.values.empty())
      rows.push_back(det_f1_x.row(name, "det_f1_x"));
    if (!det_f1_y.values.empty())
      rows.push_back(det_f1_y.row(name, "det_f1_y"));
    rows.push_back(iters.row(name, "n_iter"));
    SummaryRow conv;
    conv.method = name;
    conv.metric = "converged_rate";
    conv.count = ok;
    conv.mean = ok > 0 ? static_cast<double>(converged) /
                             static_cast<double>(ok)
                       : std::numeric_limits<double>::quiet_NaN();
    conv.sd = 0.0;
    conv.median = conv.mean;
    rows.push_back(conv);
  }
  return rows;
}

}  // namespace crtb
