#pragma once

// Oracles used by the tests. These stay independent of the library's own
// numerical paths: the SVD oracle is plain power iteration, the chi-square
// CDF below is the closed form for even df, and the integration helper is
// composite Simpson.

#include "crtb/rng.hpp"
#include "crtb/types.hpp"

#include <cmath>
#include <functional>

namespace testutil {

struct PowerSvd {
  crtb::Vector u;
  double s = 0.0;
  crtb::Vector v;
};

// Power iteration on M'M, then u = Mv / s. Same sign convention as the
// library (largest-|u| entry positive) so results compare directly.
inline PowerSvd power_svd(const crtb::Matrix& m, int iters = 500) {
  crtb::Vector v = crtb::Vector::Ones(m.cols());
  v.normalize();
  for (int i = 0; i < iters; ++i) {
    v = m.transpose() * (m * v);
    v.normalize();
  }
  PowerSvd out;
  out.s = (m * v).norm();
  out.u = m * v / out.s;
  out.v = v;
  crtb::Index anchor = 0;
  double best = -1.0;
  for (crtb::Index i = 0; i < out.u.size(); ++i) {
    if (std::abs(out.u[i]) > best) {
      best = std::abs(out.u[i]);
      anchor = i;
    }
  }
  if (out.u[anchor] < 0.0) {
    out.u = -out.u;
    out.v = -out.v;
  }
  return out;
}

// Chi-square CDF for even df via the Poisson partial sum:
// P(X <= x) = 1 - exp(-x/2) * sum_{j < df/2} (x/2)^j / j!.
inline double chi2_cdf_even_df(double x, int df) {
  const double half = 0.5 * x;
  double term = 1.0;
  double sum = 0.0;
  for (int j = 0; j < df / 2; ++j) {
    sum += term;
    term *= half / static_cast<double>(j + 1);
  }
  return 1.0 - std::exp(-half) * sum;
}

inline double chi2_quantile_even_df(double p, int df) {
  double lo = 0.0, hi = 1.0;
  while (chi2_cdf_even_df(hi, df) < p) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (chi2_cdf_even_df(mid, df) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Composite Simpson on [a, b].
inline double simpson(const std::function<double(double)>& f, double a,
                      double b, int intervals) {
  const double h = (b - a) / intervals;
  double acc = f(a) + f(b);
  for (int i = 1; i < intervals; ++i)
    acc += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

inline crtb::Matrix random_matrix(crtb::Rng& rng, crtb::Index rows,
                                  crtb::Index cols) {
  return rng.normal_matrix(rows, cols);
}

}  // namespace testutil
