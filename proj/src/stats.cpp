#include "rcnls/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace rcnls::stats {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;
} // namespace

double norm_pdf(double x) { return std::exp(-0.5 * x * x - kLogSqrt2Pi); }

double norm_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double log_norm_cdf(double x) {
  if (x > -37.0) {
    return std::log(0.5 * std::erfc(-x * kInvSqrt2));
  }
  // Asymptotic expansion of the lower tail; erfc underflows past ~ -37.
  const double x2 = x * x;
  return -0.5 * x2 - std::log(-x) - kLogSqrt2Pi +
         std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

double mills_upper(double t) {
  // phi(t) / Phi(-t); evaluate in log space so deep tails stay finite.
  return std::exp(-0.5 * t * t - kLogSqrt2Pi - log_norm_cdf(-t));
}

double mean(ConstVectorRef v) {
  if (v.size() == 0) throw std::invalid_argument("mean: empty vector");
  return v.mean();
}

double central_moment(ConstVectorRef v, int k) {
  if (v.size() == 0) throw std::invalid_argument("central_moment: empty vector");
  const double m = v.mean();
  double acc = 0.0;
  for (Index i = 0; i < v.size(); ++i) acc += std::pow(v[i] - m, k);
  return acc / static_cast<double>(v.size());
}

double quantile(ConstVectorRef v, double q) {
  if (v.size() == 0) throw std::invalid_argument("quantile: empty vector");
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile: q outside [0,1]");
  std::vector<double> s(v.data(), v.data() + v.size());
  std::sort(s.begin(), s.end());
  const double h = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= s.size()) return s.back();
  const double w = h - static_cast<double>(lo);
  return s[lo] + w * (s[lo + 1] - s[lo]);
}

double golden_section_max(const std::function<double(double)>& f, double lo,
                          double hi, double tol, int iters) {
  if (!(hi > lo)) throw std::invalid_argument("golden_section_max: empty interval");
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - gr * (b - a);
  double d = a + gr * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < iters && (b - a) > tol * (1.0 + std::abs(a) + std::abs(b)); ++it) {
    if (fc >= fd) {
      b = d, d = c, fd = fc;
      c = b - gr * (b - a);
      fc = f(c);
    } else {
      a = c, c = d, fc = fd;
      d = a + gr * (b - a);
      fd = f(d);
    }
  }
  // One parabolic polish through the bracket midpoints, clamped to [lo, hi].
  double xm = 0.5 * (a + b);
  double fm = f(xm);
  const double h = 0.25 * (b - a);
  if (h > 0.0) {
    const double fl = f(std::max(lo, xm - h)), fr = f(std::min(hi, xm + h));
    const double denom = fl - 2.0 * fm + fr;
    if (std::abs(denom) > 1e-300) {
      double cand = xm + 0.5 * h * (fl - fr) / denom;
      cand = std::clamp(cand, lo, hi);
      if (f(cand) > fm) xm = cand;
    }
  }
  return xm;
}

} // namespace rcnls::stats
