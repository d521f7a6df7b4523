#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace crtb {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
// Binary cell indicators (masks, truth matrices). Kept integral so equality
// checks are exact.
using IntMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

// Consistency factor making the MAD unbiased for the standard deviation at
// the normal model.
inline constexpr double kMadConsistency = 1.4826;

// Precondition violations: bad shapes, out-of-range parameters, non-finite
// input.
struct InvalidInputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Data degenerate for the requested computation: zero scale, zero matrix,
// zero reference distances, every row fully flagged, ...
struct DegenerateDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Cross-covariance numerically zero at the first component: the blocks carry
// no linear association to model.
struct NoAssociationError : DegenerateDataError {
  using DegenerateDataError::DegenerateDataError;
};

// Score vectors (near) zero or a score Gram matrix not invertible.
struct RankDeficiencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class LocationKind { mean, median };
enum class RobustScaleKind { std_dev, mad, tau2 };
enum class PsiFamily {
  hampel,
  huber,
  fair,
  // Constant weight 1: disables case downweighting. Used by the non-robust
  // baselines and by degeneracy checks.
  unit,
};

// Per-cell indicator matrix, 1 = clean, 0 = flagged.
struct CellMask {
  IntMatrix entries;

  CellMask() = default;
  explicit CellMask(IntMatrix m) : entries(std::move(m)) {}

  static CellMask all_clean(Index rows, Index cols) {
    return CellMask(IntMatrix::Ones(rows, cols));
  }

  Index rows() const { return entries.rows(); }
  Index cols() const { return entries.cols(); }
  bool clean(Index i, Index j) const { return entries(i, j) != 0; }

  Index flagged_count() const {
    return static_cast<Index>(entries.size()) - entries.cast<long>().sum();
  }

  double flagged_fraction() const {
    return entries.size() == 0
               ? 0.0
               : static_cast<double>(flagged_count()) /
                     static_cast<double>(entries.size());
  }

  void validate() const {
    for (Index j = 0; j < entries.cols(); ++j)
      for (Index i = 0; i < entries.rows(); ++i)
        if (entries(i, j) != 0 && entries(i, j) != 1)
          throw InvalidInputError("CellMask: entries must be 0 or 1");
  }
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidInputError(msg);
}

inline void require_finite(const Matrix& m, const std::string& name) {
  if (!m.allFinite())
    throw InvalidInputError(name + ": all entries must be finite");
}

inline void require_finite(const Vector& v, const std::string& name) {
  if (!v.allFinite())
    throw InvalidInputError(name + ": all entries must be finite");
}

}  // namespace crtb
