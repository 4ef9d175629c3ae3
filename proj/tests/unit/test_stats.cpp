#include <doctest.h>

#include <cmath>

#include "rcnls/stats.hpp"

using namespace rcnls;
using namespace rcnls::stats;

TEST_CASE("normal pdf and cdf at reference points") {
  CHECK(norm_pdf(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-14));
  CHECK(norm_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(norm_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
  CHECK(norm_cdf(-1.959963984540054) == doctest::Approx(0.025).epsilon(1e-12));
  // Symmetry over a sweep.
  for (double t = -6.0; t <= 6.0; t += 0.37)
    CHECK(norm_cdf(t) + norm_cdf(-t) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("log normal cdf agrees with direct evaluation where both are stable") {
  for (double t = -30.0; t <= 8.0; t += 0.5) {
    const double direct = std::log(norm_cdf(t));
    CHECK(log_norm_cdf(t) == doctest::Approx(direct).epsilon(1e-10));
  }
  // Deep tail: finite, monotone, and consistent with the asymptotic expansion.
  double prev = log_norm_cdf(-200.0);
  CHECK(std::isfinite(prev));
  for (double t = -190.0; t <= -40.0; t += 10.0) {
    const double cur = log_norm_cdf(t);
    CHECK(std::isfinite(cur));
    CHECK(cur > prev);
    prev = cur;
  }
  // Leading-order check: log Phi(-t) ~ -t^2/2 - log t - log sqrt(2 pi).
  const double t = 60.0;
  const double lead = -0.5 * t * t - std::log(t) - 0.5 * std::log(2.0 * M_PI);
  CHECK(log_norm_cdf(-t) == doctest::Approx(lead).epsilon(1e-3));
}

TEST_CASE("upper mills ratio") {
  CHECK(mills_upper(0.0) == doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(1e-12));
  // phi(t)/(1-Phi(t)) -> t + 1/t - ... for large t; check against the bound t < m < t + 1/t.
  for (double t : {5.0, 10.0, 40.0, 150.0}) {
    const double m = mills_upper(t);
    CHECK(m > t);
    CHECK(m < t + 1.0 / t);
  }
  // Moderate value against direct quotient.
  const double t = 1.3;
  CHECK(mills_upper(t) == doctest::Approx(norm_pdf(t) / (1.0 - norm_cdf(t))).epsilon(1e-12));
}

TEST_CASE("moments and quantiles") {
  Vector v(5);
  v << 1.0, 2.0, 3.0, 4.0, 10.0;
  CHECK(mean(v) == doctest::Approx(4.0));
  CHECK(central_moment(v, 2) == doctest::Approx((9.0 + 4.0 + 1.0 + 0.0 + 36.0) / 5.0));
  CHECK(central_moment(v, 3) ==
        doctest::Approx((-27.0 - 8.0 - 1.0 + 0.0 + 216.0) / 5.0));

  Vector q(4);
  q << 4.0, 1.0, 3.0, 2.0; // unsorted on purpose
  CHECK(quantile(q, 0.0) == doctest::Approx(1.0));
  CHECK(quantile(q, 1.0) == doctest::Approx(4.0));
  CHECK(quantile(q, 0.5) == doctest::Approx(2.5));
  CHECK(quantile(q, 0.1) == doctest::Approx(1.3)); // h = 0.3 between 1 and 2
  CHECK(quantile(q, 0.9) == doctest::Approx(3.7));
}

TEST_CASE("golden section maximizer") {
  // Smooth unimodal: argmax of -(x-2)^2 over [0, 5].
  const double x1 = golden_section_max([](double x) { return -(x - 2.0) * (x - 2.0); }, 0.0, 5.0, 1e-10);
  CHECK(x1 == doctest::Approx(2.0).epsilon(1e-7));
  // Maximum at a bracket endpoint.
  const double x2 = golden_section_max([](double x) { return x; }, 0.0, 3.0, 1e-10);
  CHECK(x2 == doctest::Approx(3.0).epsilon(1e-6));
  // Log-likelihood-like shape with a flat top.
  const double x3 = golden_section_max([](double x) { return -std::pow(x - 0.7, 4); }, 0.0, 50.0, 1e-12);
  CHECK(x3 == doctest::Approx(0.7).epsilon(1e-2));
}
