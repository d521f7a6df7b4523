#include "crtb/crtb.hpp"

#include <json.hpp>

#include <fstream>

namespace crtb {

namespace {

using nlohmann::json;

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const IntMatrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const Vector& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Matrix matrix_from_json(const json& j) {
  const auto rows = static_cast<Index>(j.size());
  if (rows == 0) return Matrix(0, 0);
  const auto cols = static_cast<Index>(j.at(0).size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = j.at(static_cast<size_t>(i));
    if (static_cast<Index>(row.size()) != cols)
      throw InvalidInputError("load_fit: ragged matrix in artifact");
    for (Index c = 0; c < cols; ++c)
      m(i, c) = row.at(static_cast<size_t>(c)).get<double>();
  }
  return m;
}

IntMatrix int_matrix_from_json(const json& j) {
  const auto rows = static_cast<Index>(j.size());
  if (rows == 0) return IntMatrix(0, 0);
  const auto cols = static_cast<Index>(j.at(0).size());
  IntMatrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = j.at(static_cast<size_t>(i));
    if (static_cast<Index>(row.size()) != cols)
      throw InvalidInputError("load_fit: ragged mask in artifact");
    for (Index c = 0; c < cols; ++c)
      m(i, c) = row.at(static_cast<size_t>(c)).get<int>();
  }
  return m;
}

Vector vector_from_json(const json& j) {
  Vector v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i)
    v[i] = j.at(static_cast<size_t>(i)).get<double>();
  return v;
}

const char* location_name(LocationKind k) {
  return k == LocationKind::mean ? "mean" : "median";
}

LocationKind location_from_name(const std::string& s) {
  if (s == "mean") return LocationKind::mean;
  if (s == "median") return LocationKind::median;
  throw InvalidInputError("load_fit: unknown location kind '" + s + "'");
}

const char* scale_name(RobustScaleKind k) {
  switch (k) {
    case RobustScaleKind::std_dev:
      return "std";
    case RobustScaleKind::mad:
      return "mad";
    case RobustScaleKind::tau2:
      return "tau2";
  }
  return "mad";
}

RobustScaleKind scale_from_name(const std::string& s) {
  if (s == "std") return RobustScaleKind::std_dev;
  if (s == "mad") return RobustScaleKind::mad;
  if (s == "tau2") return RobustScaleKind::tau2;
  throw InvalidInputError("load_fit: unknown scale kind '" + s + "'");
}

const char* psi_name(PsiFamily f) {
  switch (f) {
    case PsiFamily::hampel:
      return "hampel";
    case PsiFamily::huber:
      return "huber";
    case PsiFamily::fair:
      return "fair";
    case PsiFamily::unit:
      return "unit";
  }
  return "hampel";
}

PsiFamily psi_from_name(const std::string& s) {
  if (s == "hampel") return PsiFamily::hampel;
  if (s == "huber") return PsiFamily::huber;
  if (s == "fair") return PsiFamily::fair;
  if (s == "unit") return PsiFamily::unit;
  throw InvalidInputError("load_fit: unknown psi family '" + s + "'");
}

json scaler_to_json(const ScalingModel& s) {
  json j;
  j["centers"] = to_json(s.centers);
  j["scales"] = to_json(s.scales);
  j["location"] = location_name(s.location);
  j["scale_kind"] = scale_name(s.scale_kind);
  j["degenerate_columns"] = s.degenerate_columns;
  return j;
}

ScalingModel scaler_from_json(const json& j) {
  ScalingModel s;
  s.centers = vector_from_json(j.at("centers"));
  s.scales = vector_from_json(j.at("scales"));
  s.location = location_from_name(j.at("location").get<std::string>());
  s.scale_kind = scale_from_name(j.at("scale_kind").get<std::string>());
  for (const auto& c : j.at("degenerate_columns"))
    s.degenerate_columns.push_back(c.get<Index>());
  return s;
}

}  // namespace

void save_fit(const CrtbFit& fit, const std::string& path,
              const std::vector<std::string>& x_names,
              const std::vector<std::string>& y_names) {
  json doc;
  doc["format"] = "crtb-fit";
  doc["version"] = 1;

  json cfg;
  cfg["k_x"] = fit.config.k_x;
  cfg["k_y"] = fit.config.k_y;
  cfg["eta_x"] = fit.config.eta_x;
  cfg["eta_y"] = fit.config.eta_y;
  cfg["location"] = location_name(fit.config.location);
  cfg["scale"] = scale_name(fit.config.scale);
  cfg["alpha_cell"] = fit.config.alpha_cell;
  cfg["psi_family"] = psi_name(fit.config.psi.family);
  cfg["psi_probs"] = fit.config.psi.probs;
  cfg["tol"] = fit.config.tol;
  cfg["max_iter"] = fit.config.max_iter;
  cfg["weight_iters"] = fit.config.weight_iters;
  cfg["initializer"] = fit.config.initializer == Initializer::prefilter
                           ? "prefilter"
                           : "external_mask";
  doc["config"] = std::move(cfg);

  doc["scaler_x"] = scaler_to_json(fit.scaler_x);
  doc["scaler_y"] = scaler_to_json(fit.scaler_y);

  json model;
  model["W"] = to_json(fit.model.W);
  model["P"] = to_json(fit.model.P);
  model["V"] = to_json(fit.model.V);
  model["Q"] = to_json(fit.model.Q);
  model["Bs"] = to_json(fit.model.Bs);
  model["eta_x"] = fit.model.eta_x;
  model["eta_y"] = fit.model.eta_y;
  model["k_x"] = fit.model.k_x;
  model["k_y"] = fit.model.k_y;
  model["requested_k_x"] = fit.model.requested_k_x;
  model["requested_k_y"] = fit.model.requested_k_y;
  doc["model"] = std::move(model);

  doc["floor_x"] = to_json(fit.floor_x.entries);
  doc["floor_y"] = to_json(fit.floor_y.entries);
  doc["wx"] = to_json(fit.wx);
  doc["wy"] = to_json(fit.wy);
  doc["B"] = to_json(fit.B);
  doc["intercept"] = to_json(fit.intercept);
  doc["n_iter"] = fit.n_iter;
  doc["converged"] = fit.converged;
  doc["trace"] = fit.trace;
  doc["warnings"] = fit.warnings;
  doc["x_names"] = x_names;
  doc["y_names"] = y_names;

  std::ofstream out(path);
  if (!out)
    throw InvalidInputError("save_fit: cannot open '" + path +
                            "' for writing");
  out << doc.dump(1) << '\n';
  if (!out) throw InvalidInputError("save_fit: write to '" + path + "' failed");
}

LoadedFit load_fit(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("load_fit: cannot open '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw InvalidInputError("load_fit: '" + path +
                            "' is not valid JSON: " + e.what());
  }
  if (doc.value("format", "") != "crtb-fit")
    throw InvalidInputError("load_fit: '" + path +
                            "' is not a crtb-fit artifact");

  LoadedFit loaded;
  CrtbFit& fit = loaded.fit;

  const json& cfg = doc.at("config");
  fit.config.k_x = cfg.at("k_x").get<Index>();
  fit.config.k_y = cfg.at("k_y").get<Index>();
  fit.config.eta_x = cfg.at("eta_x").get<double>();
  fit.config.eta_y = cfg.at("eta_y").get<double>();
  fit.config.location = location_from_name(cfg.at("location"));
  fit.config.scale = scale_from_name(cfg.at("scale"));
  fit.config.alpha_cell = cfg.at("alpha_cell").get<double>();
  fit.config.psi.family = psi_from_name(cfg.at("psi_family"));
  const auto& probs = cfg.at("psi_probs");
  for (size_t i = 0; i < 3; ++i)
    fit.config.psi.probs[i] = probs.at(i).get<double>();
  fit.config.tol = cfg.at("tol").get<double>();
  fit.config.max_iter = cfg.at("max_iter").get<int>();
  fit.config.weight_iters = cfg.at("weight_iters").get<int>();
  fit.config.initializer = cfg.at("initializer").get<std::string>() ==
                                   "prefilter"
                               ? Initializer::prefilter
                               : Initializer::external_mask;

  fit.scaler_x = scaler_from_json(doc.at("scaler_x"));
  fit.scaler_y = scaler_from_json(doc.at("scaler_y"));

  const json& model = doc.at("model");
  fit.model.W = matrix_from_json(model.at("W"));
  fit.model.P = matrix_from_json(model.at("P"));
  fit.model.V = matrix_from_json(model.at("V"));
  fit.model.Q = matrix_from_json(model.at("Q"));
  fit.model.Bs = matrix_from_json(model.at("Bs"));
  fit.model.eta_x = model.at("eta_x").get<double>();
  fit.model.eta_y = model.at("eta_y").get<double>();
  fit.model.k_x = model.at("k_x").get<Index>();
  fit.model.k_y = model.at("k_y").get<Index>();
  fit.model.requested_k_x = model.at("requested_k_x").get<Index>();
  fit.model.requested_k_y = model.at("requested_k_y").get<Index>();

  fit.floor_x = CellMask(int_matrix_from_json(doc.at("floor_x")));
  fit.floor_y = CellMask(int_matrix_from_json(doc.at("floor_y")));
  fit.wx = vector_from_json(doc.at("wx"));
  fit.wy = vector_from_json(doc.at("wy"));
  fit.B = matrix_from_json(doc.at("B"));
  fit.intercept = vector_from_json(doc.at("intercept"));
  fit.n_iter = doc.at("n_iter").get<int>();
  fit.converged = doc.at("converged").get<bool>();
  fit.trace = doc.at("trace").get<std::vector<double>>();
  fit.warnings = doc.at("warnings").get<std::vector<std::string>>();
  loaded.x_names = doc.at("x_names").get<std::vector<std::string>>();
  loaded.y_names = doc.at("y_names").get<std::vector<std::string>>();
  return loaded;
}

}  // namespace crtb
