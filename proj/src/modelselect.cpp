#include "crtb/modelselect.hpp"

#include "crtb/numkernel.hpp"
#include "crtb/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace crtb {

double wmse(const Matrix& y, const Matrix& y_hat, const Vector& col_vars,
            WmseMode mode) {
  require(y.rows() == y_hat.rows() && y.cols() == y_hat.cols(),
          "wmse: shape mismatch");
  require(col_vars.size() == y.cols(), "wmse: variance length mismatch");
  require(y.rows() >= 1 && y.cols() >= 1, "wmse: empty input");
  require_finite(y, "wmse Y");
  require_finite(y_hat, "wmse predictions");
  for (Index j = 0; j < col_vars.size(); ++j)
    require(std::isfinite(col_vars[j]) && col_vars[j] > 0.0,
            "wmse: column variances must be positive and finite");

  Vector col_mse(y.cols());
  for (Index j = 0; j < y.cols(); ++j)
    col_mse[j] = (y.col(j) - y_hat.col(j)).squaredNorm() /
                 static_cast<double>(y.rows());

  if (mode == WmseMode::mean_ratio)
    return (col_mse.array() / col_vars.array()).mean();

  const Vector inv = col_vars.cwiseInverse();
  return col_mse.dot(inv) / inv.sum();
}

double wmse_filtered(const Matrix& y, const Matrix& y_hat,
                     const Vector& col_vars, double alpha) {
  require(y.rows() == y_hat.rows() && y.cols() == y_hat.cols(),
          "wmse_filtered: shape mismatch");
  require(col_vars.size() == y.cols(),
          "wmse_filtered: variance length mismatch");
  require(y.rows() >= 1 && y.cols() >= 1, "wmse_filtered: empty input");
  require(alpha > 0.0 && alpha < 1.0,
          "wmse_filtered: alpha must be in (0, 1)");
  require_finite(y, "wmse_filtered Y");
  require_finite(y_hat, "wmse_filtered predictions");
  for (Index j = 0; j < col_vars.size(); ++j)
    require(std::isfinite(col_vars[j]) && col_vars[j] > 0.0,
            "wmse_filtered: column variances must be positive and finite");

  const double cut = normal_quantile(0.5 * (1.0 + alpha));
  Vector col_mse(y.cols());
  for (Index j = 0; j < y.cols(); ++j) {
    const Vector r = y.col(j) - y_hat.col(j);
    const double center = median(r);
    const double scale = mad(r);
    double sum = 0.0;
    Index kept = 0;
    if (scale > 0.0) {
      for (Index i = 0; i < r.size(); ++i) {
        if (std::abs(r[i] - center) <= cut * scale) {
          sum += r[i] * r[i];
          ++kept;
        }
      }
    }
    col_mse[j] = kept > 0 ? sum / static_cast<double>(kept)
                          : r.squaredNorm() / static_cast<double>(r.size());
  }

  const Vector inv = col_vars.cwiseInverse();
  return col_mse.dot(inv) / inv.sum();
}

bool is_sparse(MethodKind m) {
  return m == MethodKind::tb_sparse || m == MethodKind::crtb_sparse;
}

bool is_robust(MethodKind m) {
  return m == MethodKind::crtb_dense || m == MethodKind::crtb_sparse;
}

const char* method_name(MethodKind m) {
  switch (m) {
    case MethodKind::tb_dense:
      return "tb";
    case MethodKind::tb_sparse:
      return "tb-sparse";
    case MethodKind::crtb_dense:
      return "crtb";
    case MethodKind::crtb_sparse:
      return "crtb-sparse";
  }
  return "tb";
}

MethodKind method_from_name(const std::string& name) {
  if (name == "tb") return MethodKind::tb_dense;
  if (name == "tb-sparse") return MethodKind::tb_sparse;
  if (name == "crtb") return MethodKind::crtb_dense;
  if (name == "crtb-sparse") return MethodKind::crtb_sparse;
  throw InvalidInputError("unknown method '" + name +
                          "' (expected tb, tb-sparse, crtb, crtb-sparse)");
}

CrtbConfig config_for_method(MethodKind method, const CrtbConfig& base) {
  CrtbConfig cfg = base;
  if (!is_robust(method)) {
    cfg.location = LocationKind::mean;
    cfg.scale = RobustScaleKind::std_dev;
    cfg.psi.family = PsiFamily::unit;
    cfg.initializer = Initializer::external_mask;
    cfg.external_floor_x.reset();
    cfg.external_floor_y.reset();
  }
  if (!is_sparse(method)) {
    cfg.eta_x = 0.0;
    cfg.eta_y = 0.0;
  }
  return cfg;
}

CrtbFit fit_method(const Matrix& x, const Matrix& y, MethodKind method,
                   const CrtbConfig& base) {
  return fit_crtb(x, y, config_for_method(method, base));
}

namespace {

Matrix take_rows(const Matrix& m, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

double held_out_metric(const Matrix& y_test, const Matrix& y_hat,
                       const Matrix& y_train, CvMetric metric,
                       double filter_alpha) {
  if (metric == CvMetric::mse)
    return (y_test - y_hat).squaredNorm() /
           static_cast<double>(y_test.size());

  // Column variances come from the training fold only, so the held-out rows
  // never influence their own weighting.
  Vector vars(y_train.cols());
  for (Index j = 0; j < y_train.cols(); ++j) {
    const double mean = y_train.col(j).mean();
    vars[j] = (y_train.col(j).array() - mean).square().sum() /
              static_cast<double>(y_train.rows() - 1);
  }
  if (metric == CvMetric::wmse_filtered)
    return wmse_filtered(y_test, y_hat, vars, filter_alpha);
  const WmseMode mode = metric == CvMetric::wmse_mean_ratio
                            ? WmseMode::mean_ratio
                            : WmseMode::normalized;
  return wmse(y_test, y_hat, vars, mode);
}

}  // namespace

CvResult kfold_cv(const Matrix& x, const Matrix& y, const CvGrid& grid,
                  MethodKind method, const CrtbConfig& base) {
  require(x.rows() == y.rows(), "kfold_cv: row count mismatch");
  require(grid.folds >= 2, "kfold_cv: need at least 2 folds");
  require(grid.repeats >= 1, "kfold_cv: need at least 1 partition");
  require(x.rows() >= 2 * grid.folds,
          "kfold_cv: need at least 2 rows per fold");
  require(!grid.etas.empty() || !is_sparse(method),
          "kfold_cv: empty eta grid");

  std::vector<double> etas = is_sparse(method) ? grid.etas
                                               : std::vector<double>{0.0};
  std::vector<Index> kxs = grid.k_xs.empty() ? std::vector<Index>{base.k_x}
                                             : grid.k_xs;
  std::vector<Index> kys = grid.k_ys.empty() ? std::vector<Index>{base.k_y}
                                             : grid.k_ys;

  // Seeded shuffle, then round-robin assignment: fold sizes differ by <= 1.
  // Every partition after the first gets its own derived shuffle seed; the
  // reported fold assignment is the first partition's.
  const Index n = x.rows();
  CvResult result;
  struct Partition {
    std::vector<std::vector<Index>> train_rows, test_rows;
  };
  std::vector<Partition> partitions(static_cast<size_t>(grid.repeats));
  for (int t = 0; t < grid.repeats; ++t) {
    std::vector<Index> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng(t == 0 ? grid.seed
                   : derive_seed(grid.seed, static_cast<std::uint64_t>(t)));
    rng.shuffle(order);
    std::vector<int> fold_of_row(static_cast<size_t>(n));
    for (size_t i = 0; i < order.size(); ++i)
      fold_of_row[static_cast<size_t>(order[i])] =
          static_cast<int>(i % static_cast<size_t>(grid.folds));
    if (t == 0) result.fold_of_row = fold_of_row;

    Partition& part = partitions[static_cast<size_t>(t)];
    part.train_rows.resize(static_cast<size_t>(grid.folds));
    part.test_rows.resize(static_cast<size_t>(grid.folds));
    for (Index i = 0; i < n; ++i) {
      const auto f = static_cast<size_t>(fold_of_row[static_cast<size_t>(i)]);
      for (size_t g = 0; g < static_cast<size_t>(grid.folds); ++g)
        (g == f ? part.test_rows : part.train_rows)[g].push_back(i);
    }
  }

  const double inf = std::numeric_limits<double>::infinity();
  for (double eta : etas) {
    for (Index kx : kxs) {
      for (Index ky : kys) {
        CvCell cell;
        cell.eta = eta;
        cell.k_x = kx;
        cell.k_y = ky;
        std::vector<double> scores;
        for (const Partition& part : partitions) {
          for (int f = 0; f < grid.folds; ++f) {
            const auto& tr = part.train_rows[static_cast<size_t>(f)];
            const auto& te = part.test_rows[static_cast<size_t>(f)];
            const Matrix x_tr = take_rows(x, tr);
            const Matrix y_tr = take_rows(y, tr);
            const Matrix x_te = take_rows(x, te);
            const Matrix y_te = take_rows(y, te);
            double score = inf;
            try {
              CrtbConfig cfg = base;
              cfg.k_x = kx;
              cfg.k_y = ky;
              if (is_sparse(method)) cfg.eta_x = eta;
              const CrtbFit fit = fit_method(x_tr, y_tr, method, cfg);
              // Robust fits predict from the cleaned held-out block; a gross
              // cell in a held-out row would otherwise blow up its prediction
              // for every candidate that kept the column, and the grid choice
              // would reward dropping signal columns instead of fitting well.
              const Matrix x_eval =
                  is_robust(method) ? clean_cells(fit, x_te, cfg.alpha_cell)
                                    : x_te;
              score = held_out_metric(y_te, predict(fit, x_eval), y_tr,
                                      grid.metric, cfg.alpha_cell);
            } catch (const std::exception&) {
              ++cell.failures;
            }
            scores.push_back(score);
          }
        }
        const double mean =
            std::accumulate(scores.begin(), scores.end(), 0.0) /
            static_cast<double>(scores.size());
        cell.mean = mean;
        if (std::isfinite(mean) && scores.size() > 1) {
          double ss = 0.0;
          for (double s : scores) ss += (s - mean) * (s - mean);
          cell.sd = std::sqrt(ss / static_cast<double>(scores.size() - 1));
        } else {
          cell.sd = std::isfinite(mean) ? 0.0 : inf;
        }
        result.table.push_back(cell);
      }
    }
  }

  // Ties prefer larger eta (sparser), then smaller component counts.
  const CvCell* best = nullptr;
  for (const CvCell& cell : result.table) {
    if (!best) {
      best = &cell;
      continue;
    }
    if (cell.mean < best->mean ||
        (cell.mean == best->mean &&
         (cell.eta > best->eta ||
          (cell.eta == best->eta &&
           (cell.k_x < best->k_x ||
            (cell.k_x == best->k_x && cell.k_y < best->k_y))))))
      best = &cell;
  }
  result.best_eta = best->eta;
  result.best_k_x = best->k_x;
  result.best_k_y = best->k_y;
  return result;
}

}  // namespace crtb
