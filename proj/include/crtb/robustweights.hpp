#pragma once

#include "crtb/preprocess.hpp"
#include "crtb/types.hpp"

#include <array>

namespace crtb {

// Downweighting function family plus its cutoff probabilities. hampel uses
// all three probabilities; huber and fair use only the first; unit ignores
// them and always returns weight 1.
struct PsiSpec {
  PsiFamily family = PsiFamily::hampel;
  std::array<double, 3> probs{0.75, 0.90, 0.95};

  void validate() const {
    require(probs[0] > 0.0 && probs[0] < probs[1] && probs[1] < probs[2] &&
                probs[2] < 1.0,
            "PsiSpec: probabilities must satisfy 0 < p1 < p2 < p3 < 1");
  }
};

// Cutoffs on the median-normalized distance scale: c = sqrt of the ratio of
// chi-square quantiles at the requested and median coverage, so a distance
// equal to the population median maps to 1.
struct HampelCutoffs {
  double a = 0.0;
  double b = 0.0;
  double r = 0.0;
};

HampelCutoffs hampel_cutoffs(const PsiSpec& spec, int df);

// Weight in [0,1] for a nonnegative normalized distance. Nonincreasing in d;
// the hampel branches join continuously at a, b and r.
double psi_weight(double d, const HampelCutoffs& cutoffs, PsiFamily family);

// Initial case weights from per-row root mean square of clean standardized
// cells. Rows whose cells are all flagged carry no evidence and get weight 1
// (reported through all_flagged_rows); all rows fully flagged is an error.
Vector starting_weights(const Matrix& zs, const CellMask& mask,
                        const PsiSpec& spec, int k,
                        std::vector<Index>* all_flagged_rows = nullptr);

// IRLS case weights from dual score matrices: a median/MAD scaler is fitted
// per component on the reference scores, both score sets are standardized by
// it, and each row's distance is normalized by the weighted median of the
// reference distances under the prior weights.
Vector case_weights(const Matrix& t_ref, const Matrix& t_cont,
                    const PsiSpec& spec, const Vector& prior);

}  // namespace crtb
