#include "crtb/numkernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace crtb {

namespace {

constexpr double kPi = 3.14159265358979323846;

double median_inplace(std::vector<double>& buf) {
  const size_t n = buf.size();
  const size_t mid = n / 2;
  std::nth_element(buf.begin(), buf.begin() + mid, buf.end());
  const double upper = buf[mid];
  if (n % 2 == 1) return upper;
  // Even n: the lower central order statistic is the max of the left part.
  const double lower = *std::max_element(buf.begin(), buf.begin() + mid);
  return 0.5 * (lower + upper);
}

std::vector<double> to_buffer(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
}

// Regularized lower incomplete gamma P(a, x): series expansion below a + 1,
// Lentz continued fraction above.
double gamma_p(double a, double x) {
  if (x <= 0.0) return 0.0;
  const double log_prefix = -x + a * std::log(x) - std::lgamma(a);
  if (x < a + 1.0) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int i = 0; i < 1000; ++i) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(log_prefix);
  }
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 1000; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return 1.0 - std::exp(log_prefix) * h;
}

double chi2_cdf(double x, int df) { return gamma_p(0.5 * df, 0.5 * x); }

double chi2_pdf(double x, int df) {
  if (x <= 0.0) return 0.0;
  const double a = 0.5 * df;
  return std::exp((a - 1.0) * std::log(x) - 0.5 * x - a * std::log(2.0) -
                  std::lgamma(a));
}

// Gaussian consistency constant E[min(Z^2, c^2)] in closed form.
double truncated_second_moment(double c) {
  return (2.0 * normal_cdf(c) - 1.0) - 2.0 * c * normal_pdf(c) +
         2.0 * c * c * (1.0 - normal_cdf(c));
}

}  // namespace

double median(const Vector& v) {
  require(v.size() > 0, "median: empty input");
  require_finite(v, "median");
  auto buf = to_buffer(v);
  return median_inplace(buf);
}

double mad(const Vector& v) {
  const double med = median(v);
  std::vector<double> dev(static_cast<size_t>(v.size()));
  for (Index i = 0; i < v.size(); ++i)
    dev[static_cast<size_t>(i)] = std::abs(v[i] - med);
  return kMadConsistency * median_inplace(dev);
}

double weighted_median(const Vector& v, const Vector& w) {
  require(v.size() > 0, "weighted_median: empty input");
  require(v.size() == w.size(), "weighted_median: length mismatch");
  require_finite(v, "weighted_median values");
  require_finite(w, "weighted_median weights");
  double total = 0.0;
  for (Index i = 0; i < w.size(); ++i) {
    require(w[i] >= 0.0, "weighted_median: weights must be nonnegative");
    total += w[i];
  }
  require(total > 0.0, "weighted_median: weights sum to zero");

  std::vector<Index> order(static_cast<size_t>(v.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(),
            [&](Index a, Index b) { return v[a] < v[b]; });
  const double half = 0.5 * total;
  double cum = 0.0;
  for (Index idx : order) {
    cum += w[idx];
    if (cum >= half) return v[idx];
  }
  return v[order.back()];  // unreachable: cum == total >= half at the end
}

double tau2_scale(const Vector& v) {
  const double s0 = mad(v);
  if (s0 <= 0.0)
    throw DegenerateDataError("tau2_scale: MAD is zero, scale undefined");
  constexpr double c = 3.0;
  static const double kappa = truncated_second_moment(c);
  const double med = median(v);
  double acc = 0.0;
  for (Index i = 0; i < v.size(); ++i) {
    const double z = (v[i] - med) / s0;
    acc += std::min(z * z, c * c);
  }
  return s0 * std::sqrt(acc / (static_cast<double>(v.size()) * kappa));
}

double normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, "normal_quantile: p must lie in (0,1)");

  // Acklam's rational approximation, then one Halley refinement against the
  // exact CDF. Final absolute error is near machine precision.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  const double err = normal_cdf(x) - p;
  const double u = err / normal_pdf(x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

double chi2_quantile(double p, int df) {
  require(p > 0.0 && p < 1.0, "chi2_quantile: p must lie in (0,1)");
  require(df >= 1, "chi2_quantile: df must be >= 1");

  // Wilson-Hilferty starting point, then a bracketed Newton iteration on the
  // CDF. The bracket keeps the iteration safe near 0 for small df.
  const double k = static_cast<double>(df);
  const double z = normal_quantile(p);
  const double wh = 1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k));
  double x = k * wh * wh * wh;
  if (!(x > 0.0)) x = 0.5 * k;

  double lo = 0.0;
  double hi = std::max(x, 1.0);
  while (chi2_cdf(hi, df) < p) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) break;
  }
  if (x <= lo || x >= hi) x = 0.5 * (lo + hi);

  for (int it = 0; it < 200; ++it) {
    const double f = chi2_cdf(x, df) - p;
    if (f > 0.0)
      hi = x;
    else
      lo = x;
    const double g = chi2_pdf(x, df);
    double next = (g > 0.0) ? x - f / g : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-13 * std::max(1.0, x)) {
      x = next;
      break;
    }
    x = next;
  }
  return x;
}

SvdTriple svd_leading(const Matrix& m) {
  require(m.rows() > 0 && m.cols() > 0, "svd_leading: empty matrix");
  require_finite(m, "svd_leading");
  if (m.isZero(0.0))
    throw DegenerateDataError("svd_leading: all-zero matrix has no direction");

  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdTriple out;
  out.u = svd.matrixU().col(0);
  out.v = svd.matrixV().col(0);
  out.s = svd.singularValues()(0);

  // Deterministic sign: flip so the largest-magnitude entry of u is positive.
  Index anchor = 0;
  double best = -1.0;
  for (Index i = 0; i < out.u.size(); ++i) {
    const double mag = std::abs(out.u[i]);
    if (mag > best) {
      best = mag;
      anchor = i;
    }
  }
  if (out.u[anchor] < 0.0) {
    out.u = -out.u;
    out.v = -out.v;
  }
  return out;
}

}  // namespace crtb
