#include "crtb/twoblock.hpp"

#include "crtb/numkernel.hpp"

#include <cmath>
#include <vector>

namespace crtb {

namespace {

constexpr double kDeflationStop = 1e-12;  // relative to the first component
constexpr double kScoreFloor = 1e-24;     // squared-norm floor for scores

struct LoopResult {
  Matrix weights;   // d x k
  Matrix loadings;  // d x k
  Matrix scores;    // n x k
  Index k = 0;
};

// One deflation loop: extracts components of `own` against the fixed
// counterpart block `other`. Only `own` is deflated.
LoopResult extract_components(const Matrix& own, const Matrix& other, Index k,
                              double eta, const char* side) {
  const auto n = static_cast<double>(own.rows());
  Matrix deflated = own;
  std::vector<Vector> weights, loadings, scores;
  double first_s = -1.0;

  for (Index h = 0; h < k; ++h) {
    const Matrix cross = deflated.transpose() * other / n;
    if (cross.isZero(0.0)) {
      if (h == 0)
        throw NoAssociationError(std::string("fit_twoblock: ") + side +
                                 " cross-covariance is zero at the first "
                                 "component");
      break;
    }
    const SvdTriple svd = svd_leading(cross);
    if (first_s < 0.0) first_s = svd.s;
    if (svd.s < kDeflationStop * first_s) break;

    const Vector w = soft_threshold(svd.u, eta);
    const Vector t = deflated * w;
    const double tt = t.squaredNorm();
    if (tt < kScoreFloor)
      throw RankDeficiencyError(std::string("fit_twoblock: degenerate ") +
                                side + " score at component " +
                                std::to_string(h + 1));
    const Vector p = deflated.transpose() * t / tt;
    deflated.noalias() -= t * p.transpose();
    weights.push_back(w);
    loadings.push_back(p);
    scores.push_back(t);
  }

  LoopResult out;
  out.k = static_cast<Index>(weights.size());
  out.weights.resize(own.cols(), out.k);
  out.loadings.resize(own.cols(), out.k);
  out.scores.resize(own.rows(), out.k);
  for (Index h = 0; h < out.k; ++h) {
    out.weights.col(h) = weights[static_cast<size_t>(h)];
    out.loadings.col(h) = loadings[static_cast<size_t>(h)];
    out.scores.col(h) = scores[static_cast<size_t>(h)];
  }
  return out;
}

}  // namespace

Vector soft_threshold(const Vector& w, double eta) {
  require(w.size() > 0, "soft_threshold: empty vector");
  require(eta >= 0.0 && eta < 1.0, "soft_threshold: eta must lie in [0,1)");
  require_finite(w, "soft_threshold");
  if (eta == 0.0) return w;

  const double cut = eta * w.cwiseAbs().maxCoeff();
  Vector out(w.size());
  for (Index j = 0; j < w.size(); ++j) {
    const double mag = std::abs(w[j]) - cut;
    out[j] = mag > 0.0 ? (w[j] > 0.0 ? mag : -mag) : 0.0;
  }
  const double norm = out.norm();
  // The max-magnitude entry always survives a threshold below it, so a unit
  // input cannot be zeroed entirely for eta < 1.
  if (norm <= 0.0)
    throw DegenerateDataError("soft_threshold: threshold removed every entry");
  return out / norm;
}

TwoblockModel fit_twoblock(const Matrix& xc, const Matrix& yc, Index k_x,
                           Index k_y, double eta_x, double eta_y) {
  require(xc.rows() == yc.rows(), "fit_twoblock: row count mismatch");
  require(xc.rows() >= 2, "fit_twoblock: need at least 2 rows");
  require(xc.cols() >= 1 && yc.cols() >= 1, "fit_twoblock: empty block");
  require(k_x >= 1 && k_x <= std::min(xc.rows() - 1, xc.cols()),
          "fit_twoblock: k_x out of range");
  require(k_y >= 1 && k_y <= std::min(yc.rows() - 1, yc.cols()),
          "fit_twoblock: k_y out of range");
  require(eta_x >= 0.0 && eta_x < 1.0, "fit_twoblock: eta_x out of range");
  require(eta_y >= 0.0 && eta_y < 1.0, "fit_twoblock: eta_y out of range");
  require_finite(xc, "fit_twoblock X");
  require_finite(yc, "fit_twoblock Y");

  TwoblockModel model;
  model.eta_x = eta_x;
  model.eta_y = eta_y;
  model.requested_k_x = k_x;
  model.requested_k_y = k_y;

  LoopResult xres = extract_components(xc, yc, k_x, eta_x, "X");
  LoopResult yres = extract_components(yc, xc, k_y, eta_y, "Y");
  model.W = std::move(xres.weights);
  model.P = std::move(xres.loadings);
  model.T = std::move(xres.scores);
  model.k_x = xres.k;
  model.V = std::move(yres.weights);
  model.Q = std::move(yres.loadings);
  model.U = std::move(yres.scores);
  model.k_y = yres.k;

  model.Bs = coefficients(model, xc, yc);
  return model;
}

Matrix coefficients(const TwoblockModel& model, const Matrix& xc,
                    const Matrix& yc) {
  require(model.k_x >= 1 && model.k_y >= 1, "coefficients: empty model");
  require(xc.cols() == model.W.rows(), "coefficients: X column mismatch");
  require(yc.cols() == model.V.rows(), "coefficients: Y column mismatch");
  require(xc.rows() == model.T.rows() && yc.rows() == model.T.rows(),
          "coefficients: row count mismatch");

  // G = T' Xc W is the score Gram matrix up to a unit upper-triangular
  // factor; it is invertible exactly when every score is non-degenerate.
  const Matrix g = model.T.transpose() * (xc * model.W);
  Eigen::FullPivLU<Matrix> lu(g);
  if (!lu.isInvertible())
    throw RankDeficiencyError("coefficients: score Gram matrix is singular");
  const Matrix inner = lu.solve(model.T.transpose() * yc);
  return model.W * inner * model.V * model.V.transpose();
}

Matrix predict_std(const TwoblockModel& model, const Matrix& xc) {
  require(xc.cols() == model.Bs.rows(), "predict_std: column mismatch");
  require_finite(xc, "predict_std");
  return xc * model.Bs;
}

}  // namespace crtb
