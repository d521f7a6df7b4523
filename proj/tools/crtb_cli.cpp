// Command-line front end: fit, predict, flag, cv, simulate.
//
// Every command writes its artifacts under --out-dir and exits 0 only when
// everything requested was fully written; on failure the partially written
// files are removed.

#include "crtb/crtb.hpp"
#include "crtb/io.hpp"
#include "crtb/modelselect.hpp"
#include "crtb/rng.hpp"
#include "crtb/simlab.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Tracks files created by the current command so a failure can remove them.
class OutputGuard {
 public:
  ~OutputGuard() {
    if (!armed_) return;
    for (const auto& path : paths_) {
      std::error_code ec;
      fs::remove(path, ec);
    }
  }

  std::string track(const fs::path& path) {
    paths_.push_back(path);
    return path.string();
  }

  void commit() { armed_ = false; }

 private:
  std::vector<fs::path> paths_;
  bool armed_ = true;
};

struct CommonOpts {
  std::string method = "crtb";
  long kx = 1;
  long ky = 1;
  double eta_x = 0.0;
  double eta_y = 0.0;
  std::string centering;
  std::string scaling;
  double alpha_cell = 0.99;
  std::string psi = "hampel";
  std::vector<double> alphas{0.75, 0.90, 0.95};
  double tol = 1e-4;
  long max_iter = 25;
  long weight_iters = 2;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

void add_common_flags(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--method", opts.method,
                  "Estimator: tb, tb-sparse, crtb, crtb-sparse")
      ->check(CLI::IsMember({"tb", "tb-sparse", "crtb", "crtb-sparse"}));
  cmd->add_option("--kx", opts.kx, "X-block components");
  cmd->add_option("--ky", opts.ky, "Y-block components");
  cmd->add_option("--eta-x", opts.eta_x, "X sparsity threshold in [0,1)");
  cmd->add_option("--eta-y", opts.eta_y, "Y sparsity threshold in [0,1)");
  cmd->add_option("--centering", opts.centering, "mean or median")
      ->check(CLI::IsMember({"mean", "median"}));
  cmd->add_option("--scaling", opts.scaling, "std, mad or tau2")
      ->check(CLI::IsMember({"std", "mad", "tau2"}));
  cmd->add_option("--alpha-cell", opts.alpha_cell,
                  "Cell filter coverage in (0,1)");
  cmd->add_option("--psi", opts.psi, "Weight family: hampel, huber, fair")
      ->check(CLI::IsMember({"hampel", "huber", "fair"}));
  cmd->add_option("--alphas", opts.alphas,
                  "Weight cutoff probabilities a1,a2,a3")
      ->delimiter(',')
      ->expected(3);
  cmd->add_option("--tol", opts.tol, "Convergence tolerance");
  cmd->add_option("--max-iter", opts.max_iter, "Iteration cap");
  cmd->add_option("--weight-iters", opts.weight_iters,
                  "Iterations that re-estimate case weights");
  cmd->add_option("--seed", opts.seed, "Master seed");
  cmd->add_option("--out-dir", opts.out_dir, "Output directory");
}

crtb::LocationKind location_from(const std::string& s) {
  return s == "mean" ? crtb::LocationKind::mean : crtb::LocationKind::median;
}

crtb::RobustScaleKind scale_from(const std::string& s) {
  if (s == "std") return crtb::RobustScaleKind::std_dev;
  if (s == "tau2") return crtb::RobustScaleKind::tau2;
  return crtb::RobustScaleKind::mad;
}

crtb::PsiFamily psi_from(const std::string& s) {
  if (s == "huber") return crtb::PsiFamily::huber;
  if (s == "fair") return crtb::PsiFamily::fair;
  return crtb::PsiFamily::hampel;
}

// Resolves flags into a config. Explicitly passed centering/scaling/psi win;
// otherwise the method decides (tb: mean/std/no downweighting, crtb:
// median/mad/hampel).
crtb::CrtbConfig build_config(const CommonOpts& opts, crtb::MethodKind method,
                              bool centering_set, bool scaling_set,
                              bool psi_set) {
  crtb::CrtbConfig cfg;
  cfg.k_x = opts.kx;
  cfg.k_y = opts.ky;
  cfg.eta_x = crtb::is_sparse(method) ? opts.eta_x : 0.0;
  cfg.eta_y = crtb::is_sparse(method) ? opts.eta_y : 0.0;
  cfg.alpha_cell = opts.alpha_cell;
  cfg.tol = opts.tol;
  cfg.max_iter = static_cast<int>(opts.max_iter);
  cfg.weight_iters = static_cast<int>(opts.weight_iters);
  cfg.psi.probs = {opts.alphas[0], opts.alphas[1], opts.alphas[2]};

  if (crtb::is_robust(method)) {
    cfg.location = centering_set ? location_from(opts.centering)
                                 : crtb::LocationKind::median;
    cfg.scale = scaling_set ? scale_from(opts.scaling)
                            : crtb::RobustScaleKind::mad;
    cfg.psi.family = psi_from(opts.psi);
    cfg.initializer = crtb::Initializer::prefilter;
  } else {
    cfg.location = centering_set ? location_from(opts.centering)
                                 : crtb::LocationKind::mean;
    cfg.scale = scaling_set ? scale_from(opts.scaling)
                            : crtb::RobustScaleKind::std_dev;
    cfg.psi.family =
        psi_set ? psi_from(opts.psi) : crtb::PsiFamily::unit;
    cfg.initializer = crtb::Initializer::external_mask;
  }
  return cfg;
}

crtb::CellMask mask_from_table(const std::string& path) {
  const crtb::Table t = crtb::read_table(path);
  crtb::IntMatrix entries(t.values.rows(), t.values.cols());
  for (crtb::Index j = 0; j < t.values.cols(); ++j) {
    for (crtb::Index i = 0; i < t.values.rows(); ++i) {
      const double v = t.values(i, j);
      if (v != 0.0 && v != 1.0)
        throw crtb::InvalidInputError("mask file '" + path +
                                      "' must contain only 0 and 1");
      entries(i, j) = static_cast<int>(v);
    }
  }
  return crtb::CellMask(std::move(entries));
}

crtb::IntMatrix int_matrix_from_table(const std::string& path) {
  return mask_from_table(path).entries;
}

void check_row_match(const crtb::Table& x, const crtb::Table& y) {
  if (x.values.rows() != y.values.rows())
    throw crtb::InvalidInputError(
        "X has " + std::to_string(x.values.rows()) + " rows but Y has " +
        std::to_string(y.values.rows()) + " rows");
}

std::string prf_line(const char* label, const crtb::PrfMetrics& m) {
  return std::string(label) + ": precision " +
         crtb::format_double(m.precision) + ", recall " +
         crtb::format_double(m.recall) + ", f1 " + crtb::format_double(m.f1);
}

void write_fit_report(const std::string& path, const crtb::CrtbFit& fit,
                      crtb::Index n, crtb::Index p, crtb::Index q,
                      const std::optional<crtb::PrfMetrics>& det_x,
                      const std::optional<crtb::PrfMetrics>& det_y) {
  std::ofstream out(path);
  if (!out)
    throw crtb::InvalidInputError("cannot open '" + path + "' for writing");
  out << "rows: " << n << "\npredictors: " << p << "\nresponses: " << q
      << "\ncomponents: " << fit.model.k_x << " (X), " << fit.model.k_y
      << " (Y)\n";
  out << "eta_x: " << crtb::format_double(fit.config.eta_x)
      << "\neta_y: " << crtb::format_double(fit.config.eta_y) << "\n";
  out << "centering: "
      << (fit.config.location == crtb::LocationKind::mean ? "mean" : "median")
      << "\n";
  out << "iterations: " << fit.n_iter << "\nconverged: "
      << (fit.converged ? "yes" : "no") << "\n";
  out << "flagged cells X: " << fit.floor_x.flagged_count() << " ("
      << crtb::format_double(fit.floor_x.flagged_fraction()) << ")\n";
  out << "flagged cells Y: " << fit.floor_y.flagged_count() << " ("
      << crtb::format_double(fit.floor_y.flagged_fraction()) << ")\n";
  const auto low_x = (fit.wx.array() < 0.5).count();
  const auto low_y = (fit.wy.array() < 0.5).count();
  out << "case weights below 0.5: " << low_x << " (X), " << low_y
      << " (Y)\n";
  if (det_x) out << prf_line("cell detection X", *det_x) << "\n";
  if (det_y) out << prf_line("cell detection Y", *det_y) << "\n";
  for (const auto& w : fit.warnings) out << "warning: " << w << "\n";
  if (!out)
    throw crtb::InvalidInputError("write to '" + path + "' failed");
}

int cmd_fit(const CommonOpts& opts, const std::string& x_path,
            const std::string& y_path, const std::string& mask_x_path,
            const std::string& mask_y_path, const std::string& truth_x_path,
            const std::string& truth_y_path, bool write_flags,
            bool centering_set, bool scaling_set, bool psi_set) {
  const crtb::Table xt = crtb::read_table(x_path);
  const crtb::Table yt = crtb::read_table(y_path);
  check_row_match(xt, yt);

  const crtb::MethodKind method = crtb::method_from_name(opts.method);
  crtb::CrtbConfig cfg =
      build_config(opts, method, centering_set, scaling_set, psi_set);
  if (!mask_x_path.empty() || !mask_y_path.empty()) {
    cfg.initializer = crtb::Initializer::external_mask;
    if (!mask_x_path.empty())
      cfg.external_floor_x = mask_from_table(mask_x_path);
    if (!mask_y_path.empty())
      cfg.external_floor_y = mask_from_table(mask_y_path);
  }

  const crtb::CrtbFit fit = crtb::fit_crtb(xt.values, yt.values, cfg);

  std::optional<crtb::PrfMetrics> det_x, det_y;
  if (!truth_x_path.empty()) {
    const crtb::IntMatrix truth = int_matrix_from_table(truth_x_path);
    det_x = crtb::detection_metrics(
        (1 - fit.floor_x.entries.array()).matrix(), truth);
  }
  if (!truth_y_path.empty()) {
    const crtb::IntMatrix truth = int_matrix_from_table(truth_y_path);
    det_y = crtb::detection_metrics(
        (1 - fit.floor_y.entries.array()).matrix(), truth);
  }

  fs::create_directories(opts.out_dir);
  OutputGuard guard;
  crtb::save_fit(fit, guard.track(fs::path(opts.out_dir) / "model.json"),
                 xt.names, yt.names);
  write_fit_report(guard.track(fs::path(opts.out_dir) / "fit_report.txt"),
                   fit, xt.values.rows(), xt.values.cols(), yt.values.cols(),
                   det_x, det_y);
  if (write_flags) {
    const crtb::CellWeightReport report = crtb::cell_weight_report(fit);
    crtb::write_int_table(
        guard.track(fs::path(opts.out_dir) / "flags_x.csv"), xt.names,
        report.flagged_x);
    crtb::write_int_table(
        guard.track(fs::path(opts.out_dir) / "flags_y.csv"), yt.names,
        report.flagged_y);
  }
  guard.commit();
  std::cout << "wrote model.json and fit_report.txt to " << opts.out_dir
            << "\n";
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& x_path,
                const std::string& out_dir) {
  const crtb::LoadedFit loaded = crtb::load_fit(model_path);
  const crtb::Table xt = crtb::read_table(x_path);
  if (xt.values.cols() != loaded.fit.B.rows())
    throw crtb::InvalidInputError(
        "model expects " + std::to_string(loaded.fit.B.rows()) +
        " predictors but X has " + std::to_string(xt.values.cols()) +
        " columns");

  const crtb::Matrix pred = crtb::predict(loaded.fit, xt.values);
  std::vector<std::string> names = loaded.y_names;
  if (static_cast<crtb::Index>(names.size()) != pred.cols()) {
    names.clear();
    for (crtb::Index j = 0; j < pred.cols(); ++j)
      names.push_back("y" + std::to_string(j));
  }

  fs::create_directories(out_dir);
  OutputGuard guard;
  crtb::write_table(guard.track(fs::path(out_dir) / "predictions.csv"),
                    names, pred);
  guard.commit();
  std::cout << "wrote predictions.csv to " << out_dir << "\n";
  return 0;
}

int cmd_flag(const CommonOpts& opts, const std::string& x_path,
             const std::string& y_path, bool centering_set, bool scaling_set) {
  const crtb::LocationKind loc = centering_set ? location_from(opts.centering)
                                               : crtb::LocationKind::median;
  const crtb::RobustScaleKind sc =
      scaling_set ? scale_from(opts.scaling) : crtb::RobustScaleKind::mad;

  fs::create_directories(opts.out_dir);
  OutputGuard guard;
  auto flag_block = [&](const crtb::Table& t, const std::string& out_name) {
    const crtb::ScalingModel scaler = crtb::fit_scaler(t.values, loc, sc);
    const crtb::CellMask mask =
        crtb::prefilter(crtb::transform(t.values, scaler), opts.alpha_cell);
    crtb::write_int_table(guard.track(fs::path(opts.out_dir) / out_name),
                          t.names, mask.entries);
    std::cout << out_name << ": " << mask.flagged_count()
              << " cells flagged of " << mask.entries.size() << "\n";
  };

  flag_block(crtb::read_table(x_path), "x_cellmask.csv");
  if (!y_path.empty()) flag_block(crtb::read_table(y_path), "y_cellmask.csv");
  guard.commit();
  return 0;
}

int cmd_cv(const CommonOpts& opts, const std::string& x_path,
           const std::string& y_path, const std::vector<double>& etas,
           const std::vector<long>& kx_grid, const std::vector<long>& ky_grid,
           int folds, int repeats, const std::string& metric,
           bool centering_set, bool scaling_set, bool psi_set) {
  const crtb::Table xt = crtb::read_table(x_path);
  const crtb::Table yt = crtb::read_table(y_path);
  check_row_match(xt, yt);

  const crtb::MethodKind method = crtb::method_from_name(opts.method);
  const crtb::CrtbConfig base =
      build_config(opts, method, centering_set, scaling_set, psi_set);

  crtb::CvGrid grid;
  if (!etas.empty()) grid.etas = etas;
  for (long k : kx_grid) grid.k_xs.push_back(k);
  for (long k : ky_grid) grid.k_ys.push_back(k);
  grid.folds = folds;
  grid.repeats = repeats;
  grid.seed = opts.seed;
  if (metric == "mse")
    grid.metric = crtb::CvMetric::mse;
  else if (metric == "wmse-mean-ratio")
    grid.metric = crtb::CvMetric::wmse_mean_ratio;
  else if (metric == "wmse-normalized")
    grid.metric = crtb::CvMetric::wmse_normalized;
  else
    grid.metric = crtb::CvMetric::wmse_filtered;

  const crtb::CvResult result =
      crtb::kfold_cv(xt.values, yt.values, grid, method, base);

  fs::create_directories(opts.out_dir);
  OutputGuard guard;
  crtb::Matrix table(static_cast<crtb::Index>(result.table.size()), 6);
  for (size_t i = 0; i < result.table.size(); ++i) {
    const crtb::CvCell& cell = result.table[i];
    const auto r = static_cast<crtb::Index>(i);
    table(r, 0) = cell.eta;
    table(r, 1) = static_cast<double>(cell.k_x);
    table(r, 2) = static_cast<double>(cell.k_y);
    table(r, 3) = cell.mean;
    table(r, 4) = cell.sd;
    table(r, 5) = cell.failures;
  }
  crtb::write_table(guard.track(fs::path(opts.out_dir) / "cv_table.csv"),
                    {"eta", "kx", "ky", "mean", "sd", "failures"}, table);

  json best;
  best["eta"] = result.best_eta;
  best["kx"] = result.best_k_x;
  best["ky"] = result.best_k_y;
  std::ofstream out(
      guard.track(fs::path(opts.out_dir) / "cv_best.json"));
  out << best.dump(1) << "\n";
  if (!out) throw crtb::InvalidInputError("write to cv_best.json failed");
  guard.commit();
  std::cout << "best: eta " << crtb::format_double(result.best_eta) << ", kx "
            << result.best_k_x << ", ky " << result.best_k_y << "\n";
  return 0;
}

// ---- simulate ----

const std::vector<std::string> kPresetNames = {
    "cellwise-p30", "cellwise-p100", "rowwise-p30", "sweep-p100"};

struct SimulationPlan {
  crtb::ScenarioConfig config;
  std::vector<double> pcts;  // sweep grid; single entry for one point
};

SimulationPlan preset_plan(const std::string& name) {
  SimulationPlan plan;
  crtb::ScenarioConfig& cfg = plan.config;
  cfg.dgp = crtb::DgpParams{};  // n=100, k=3, q=4, p_signal=20, p_noise=10
  cfg.replicates = 50;

  if (name == "cellwise-p30" || name == "cellwise-p100") {
    if (name == "cellwise-p100") cfg.dgp.p_noise = 80;
    cfg.contamination.regime = crtb::ContaminationRegime::cellwise;
    plan.pcts = {0.0, 0.05, 0.10, 0.15, 0.20};
  } else if (name == "rowwise-p30") {
    cfg.contamination.regime = crtb::ContaminationRegime::rowwise;
    cfg.methods = {crtb::MethodKind::tb_dense, crtb::MethodKind::crtb_dense};
    plan.pcts = {0.0, 0.05, 0.10, 0.15, 0.20, 0.25};
  } else if (name == "sweep-p100") {
    cfg.dgp.p_noise = 80;
    cfg.contamination.regime = crtb::ContaminationRegime::cellwise;
    cfg.methods = {crtb::MethodKind::tb_dense, crtb::MethodKind::crtb_dense};
    plan.pcts = {0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35};
  } else {
    std::string msg = "unknown preset '" + name + "'; available:";
    for (const auto& p : kPresetNames) msg += " " + p;
    throw crtb::InvalidInputError(msg);
  }
  return plan;
}

crtb::MethodKind method_from_json(const json& j) {
  return crtb::method_from_name(j.get<std::string>());
}

SimulationPlan plan_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw crtb::InvalidInputError("cannot open scenario file '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw crtb::InvalidInputError("scenario file '" + path +
                                  "' is not valid JSON: " + e.what());
  }

  SimulationPlan plan;
  crtb::ScenarioConfig& cfg = plan.config;
  if (doc.contains("dgp")) {
    const json& d = doc["dgp"];
    cfg.dgp.n = d.value("n", cfg.dgp.n);
    cfg.dgp.k = d.value("k", cfg.dgp.k);
    cfg.dgp.q = d.value("q", cfg.dgp.q);
    cfg.dgp.p_signal = d.value("p_signal", cfg.dgp.p_signal);
    cfg.dgp.p_noise = d.value("p_noise", cfg.dgp.p_noise);
    cfg.dgp.sigma_e = d.value("sigma_e", cfg.dgp.sigma_e);
    cfg.dgp.sigma_f = d.value("sigma_f", cfg.dgp.sigma_f);
  }
  if (doc.contains("contamination")) {
    const json& c = doc["contamination"];
    const std::string regime = c.value("regime", "cellwise");
    cfg.contamination.regime = regime == "rowwise"
                                   ? crtb::ContaminationRegime::rowwise
                                   : crtb::ContaminationRegime::cellwise;
    cfg.contamination.row_rate =
        c.value("row_rate", cfg.contamination.row_rate);
    cfg.contamination.cell_pct =
        c.value("cell_pct", cfg.contamination.cell_pct);
    cfg.contamination.row_pct = c.value("row_pct", cfg.contamination.row_pct);
    cfg.contamination.delta = c.value("delta", cfg.contamination.delta);
  }
  if (doc.contains("methods")) {
    cfg.methods.clear();
    for (const auto& m : doc["methods"]) cfg.methods.push_back(method_from_json(m));
  }
  cfg.replicates = doc.value("replicates", cfg.replicates);
  cfg.seed = doc.value("seed", cfg.seed);
  cfg.tb_sparse_eta = doc.value("tb_sparse_eta", cfg.tb_sparse_eta);
  if (doc.contains("cv_etas"))
    cfg.cv_etas = doc["cv_etas"].get<std::vector<double>>();
  cfg.cv_folds = doc.value("cv_folds", cfg.cv_folds);
  cfg.cv_repeats = doc.value("cv_repeats", cfg.cv_repeats);
  cfg.alpha_cell = doc.value("alpha_cell", cfg.alpha_cell);
  cfg.tol = doc.value("tol", cfg.tol);
  cfg.max_iter = doc.value("max_iter", cfg.max_iter);
  cfg.weight_iters = doc.value("weight_iters", cfg.weight_iters);
  if (doc.contains("pcts"))
    plan.pcts = doc["pcts"].get<std::vector<double>>();
  else
    plan.pcts = {cfg.contamination.regime == crtb::ContaminationRegime::cellwise
                     ? cfg.contamination.cell_pct
                     : cfg.contamination.row_pct};
  return plan;
}

const std::vector<std::string> kRecordColumns = {
    "replicate",       "method",       "cell_pct",     "mse_b",
    "sel_precision",   "sel_recall",   "sel_f1",       "det_precision_x",
    "det_recall_x",    "det_f1_x",     "det_precision_y", "det_recall_y",
    "det_f1_y",        "eta_chosen",   "n_iter",       "converged"};

void write_records(const std::string& path,
                   const crtb::ScenarioResult& result) {
  std::ofstream out(path);
  if (!out)
    throw crtb::InvalidInputError("cannot open '" + path + "' for writing");
  for (size_t j = 0; j < kRecordColumns.size(); ++j) {
    if (j > 0) out << ',';
    out << kRecordColumns[j];
  }
  out << '\n';
  auto opt_prf = [](const std::optional<crtb::PrfMetrics>& m,
                    int which) -> std::string {
    if (!m) return "nan";
    const double v = which == 0 ? m->precision : which == 1 ? m->recall : m->f1;
    return crtb::format_double(v);
  };
  for (const crtb::MethodRecord& rec : result.records) {
    out << rec.replicate << ',' << crtb::method_name(rec.method) << ','
        << crtb::format_double(rec.contamination_pct) << ','
        << crtb::format_double(rec.mse) << ',' << opt_prf(rec.selection, 0)
        << ',' << opt_prf(rec.selection, 1) << ',' << opt_prf(rec.selection, 2)
        << ',' << opt_prf(rec.detection_x, 0) << ','
        << opt_prf(rec.detection_x, 1) << ',' << opt_prf(rec.detection_x, 2)
        << ',' << opt_prf(rec.detection_y, 0) << ','
        << opt_prf(rec.detection_y, 1) << ',' << opt_prf(rec.detection_y, 2)
        << ','
        << (rec.eta_chosen ? crtb::format_double(*rec.eta_chosen) : "nan")
        << ',' << rec.n_iter << ',' << (rec.converged ? 1 : 0) << '\n';
  }
  if (!out)
    throw crtb::InvalidInputError("write to '" + path + "' failed");
}

void write_summary(const std::string& path,
                   const std::vector<crtb::SummaryRow>& rows) {
  std::ofstream out(path);
  if (!out)
    throw crtb::InvalidInputError("cannot open '" + path + "' for writing");
  out << "method,metric,count,mean,sd,median\n";
  for (const auto& r : rows)
    out << r.method << ',' << r.metric << ',' << r.count << ','
        << crtb::format_double(r.mean) << ',' << crtb::format_double(r.sd)
        << ',' << crtb::format_double(r.median) << '\n';
  if (!out)
    throw crtb::InvalidInputError("write to '" + path + "' failed");
}

void write_sweep_summary(const std::string& path,
                         const std::vector<crtb::SweepPoint>& points) {
  // Relative increase of the per-method location of mse_b against the
  // method's own value at the smallest grid point.
  std::ofstream out(path);
  if (!out)
    throw crtb::InvalidInputError("cannot open '" + path + "' for writing");
  out << "method,pct,mse_mean,mse_sd,mse_median,rel_mean,rel_median\n";
  std::map<std::string, std::pair<double, double>> baseline;
  for (const auto& point : points) {
    for (const auto& row : crtb::summarize(point.result)) {
      if (row.metric != "mse_b") continue;
      if (!baseline.count(row.method))
        baseline[row.method] = {row.mean, row.median};
      const auto& [mean0, median0] = baseline[row.method];
      out << row.method << ',' << crtb::format_double(point.pct) << ','
          << crtb::format_double(row.mean) << ',' << crtb::format_double(row.sd)
          << ',' << crtb::format_double(row.median) << ','
          << crtb::format_double(row.mean / mean0) << ','
          << crtb::format_double(row.median / median0) << '\n';
    }
  }
  if (!out)
    throw crtb::InvalidInputError("write to '" + path + "' failed");
}

std::string pct_tag(double pct) {
  // 0.05 -> "05", 0.2 -> "20": stable two-digit percent tags for filenames.
  const int value = static_cast<int>(std::lround(pct * 100.0));
  std::string tag = std::to_string(value);
  if (tag.size() < 2) tag = "0" + tag;
  return tag;
}

int cmd_simulate(const std::string& preset, const std::string& scenario_file,
                 long replicates, long workers, std::uint64_t seed,
                 const std::string& out_dir) {
  if (preset.empty() == scenario_file.empty())
    throw crtb::InvalidInputError(
        "simulate: pass exactly one of --preset or --scenario");
  SimulationPlan plan = preset.empty() ? plan_from_file(scenario_file)
                                       : preset_plan(preset);
  if (replicates > 0) plan.config.replicates = static_cast<int>(replicates);
  plan.config.workers = static_cast<int>(workers);
  plan.config.seed = seed;

  fs::create_directories(out_dir);
  OutputGuard guard;
  const std::vector<crtb::SweepPoint> points =
      crtb::run_sweep(plan.config, plan.pcts);
  for (const auto& point : points) {
    const std::string tag = pct_tag(point.pct);
    write_records(
        guard.track(fs::path(out_dir) / ("records_" + tag + ".csv")),
        point.result);
    write_summary(
        guard.track(fs::path(out_dir) / ("summary_" + tag + ".csv")),
        crtb::summarize(point.result));
  }
  write_sweep_summary(guard.track(fs::path(out_dir) / "sweep_summary.csv"),
                      points);
  guard.commit();
  std::cout << "wrote " << points.size()
            << " grid point(s) of results to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Cellwise-robust twoblock regression: fit, predict, flag, cross-"
      "validate, simulate"};
  app.require_subcommand(1);

  CommonOpts opts;

  // fit
  auto* fit = app.add_subcommand("fit", "Fit a model to X and Y tables");
  std::string x_path, y_path, mask_x, mask_y, truth_x, truth_y;
  bool write_flags = false;
  fit->add_option("--x", x_path, "Predictor table")->required();
  fit->add_option("--y", y_path, "Response table")->required();
  fit->add_option("--mask-x", mask_x, "External X cell mask (1 = clean)");
  fit->add_option("--mask-y", mask_y, "External Y cell mask (1 = clean)");
  fit->add_option("--truth-x", truth_x,
                  "Known X contamination cells (1 = contaminated); adds "
                  "detection metrics to the report");
  fit->add_option("--truth-y", truth_y, "Known Y contamination cells");
  fit->add_flag("--write-flags", write_flags,
                "Also write flagged-cell indicator tables");
  add_common_flags(fit, opts);

  // predict
  auto* predict_cmd =
      app.add_subcommand("predict", "Predict responses from a saved model");
  std::string model_path, pred_x, pred_out = ".";
  predict_cmd->add_option("--model", model_path, "model.json path")
      ->required();
  predict_cmd->add_option("--x", pred_x, "Predictor table")->required();
  predict_cmd->add_option("--out-dir", pred_out, "Output directory");

  // flag
  auto* flag_cmd = app.add_subcommand(
      "flag", "Standardize and emit cell masks without fitting");
  std::string flag_x, flag_y;
  flag_cmd->add_option("--x", flag_x, "Predictor table")->required();
  flag_cmd->add_option("--y", flag_y, "Optional response table");
  add_common_flags(flag_cmd, opts);

  // cv
  auto* cv_cmd = app.add_subcommand("cv", "Cross-validate a parameter grid");
  std::string cv_x, cv_y, cv_metric = "wmse-filtered";
  std::vector<double> cv_etas;
  std::vector<long> kx_grid, ky_grid;
  int cv_folds = 3, cv_repeats = 1;
  cv_cmd->add_option("--x", cv_x, "Predictor table")->required();
  cv_cmd->add_option("--y", cv_y, "Response table")->required();
  cv_cmd->add_option("--etas", cv_etas, "Eta grid, e.g. 0.3,0.5,0.7")
      ->delimiter(',');
  cv_cmd->add_option("--kx-grid", kx_grid, "X component grid")->delimiter(',');
  cv_cmd->add_option("--ky-grid", ky_grid, "Y component grid")->delimiter(',');
  cv_cmd->add_option("--folds", cv_folds, "Fold count");
  cv_cmd->add_option("--repeats", cv_repeats,
                     "Fold partitions averaged per grid cell");
  cv_cmd->add_option(
            "--metric", cv_metric,
            "wmse-filtered (default), mse, wmse-mean-ratio or "
            "wmse-normalized")
      ->check(CLI::IsMember(
          {"wmse-filtered", "mse", "wmse-mean-ratio", "wmse-normalized"}));
  add_common_flags(cv_cmd, opts);

  // simulate
  auto* sim_cmd =
      app.add_subcommand("simulate", "Run a simulation preset or scenario");
  std::string preset, scenario_file, sim_out = ".";
  long sim_replicates = 0, sim_workers = 0;
  std::uint64_t sim_seed = 0;
  sim_cmd->add_option("--preset", preset,
                      "cellwise-p30, cellwise-p100, rowwise-p30, sweep-p100");
  sim_cmd->add_option("--scenario", scenario_file, "Scenario JSON file");
  sim_cmd->add_option("--replicates", sim_replicates,
                      "Override replicate count");
  sim_cmd->add_option("--workers", sim_workers,
                      "Worker threads (0 = all cores)");
  sim_cmd->add_option("--seed", sim_seed, "Master seed");
  sim_cmd->add_option("--out-dir", sim_out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed())
      return cmd_fit(opts, x_path, y_path, mask_x, mask_y, truth_x, truth_y,
                     write_flags, fit->count("--centering") > 0,
                     fit->count("--scaling") > 0, fit->count("--psi") > 0);
    if (predict_cmd->parsed())
      return cmd_predict(model_path, pred_x, pred_out);
    if (flag_cmd->parsed())
      return cmd_flag(opts, flag_x, flag_y, flag_cmd->count("--centering") > 0,
                      flag_cmd->count("--scaling") > 0);
    if (cv_cmd->parsed())
      return cmd_cv(opts, cv_x, cv_y, cv_etas, kx_grid, ky_grid, cv_folds,
                    cv_repeats, cv_metric, cv_cmd->count("--centering") > 0,
                    cv_cmd->count("--scaling") > 0,
                    cv_cmd->count("--psi") > 0);
    if (sim_cmd->parsed())
      return cmd_simulate(preset, scenario_file, sim_replicates, sim_workers,
                          sim_seed, sim_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
