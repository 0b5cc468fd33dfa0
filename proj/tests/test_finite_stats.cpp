#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "tfqkd/finite_stats.hpp"

using namespace tfqkd;

namespace {

// (1/pi) int_0^pi e^{x cos t} dt by the trapezoid rule; the integrand is even
// and periodic, so the rule converges geometrically.
double i0_by_trapezoid(double x, int m = 400) {
  long double sum = 0.5L * (std::exp((long double)x) + std::exp(-(long double)x));
  for (int i = 1; i < m; ++i) sum += std::exp((long double)x * std::cos(std::numbers::pi_v<long double> * i / m));
  return double(sum / m);
}

// Straight transcription in long double, kept apart from the library code.
double gamma_reference(double n, double k, double lam, double eps) {
  using L = long double;
  const L N = n, K = k, la = lam, e = eps;
  const L A = std::max(N, K);
  const L G = (N + K) / (N * K) * std::log((N + K) / (2 * std::numbers::pi_v<L> * N * K * la * (1 - la) * e * e));
  if (G <= 0) return 0.0;
  const L num = (1 - 2 * la) * A * G / (N + K) + std::sqrt(A * A * G * G / ((N + K) * (N + K)) + 4 * la * (1 - la) * G);
  return double(num / (2 + 2 * A * A * G / ((N + K) * (N + K))));
}

}  // namespace

TEST_CASE("binary entropy at fixed points") {
  CHECK(binary_entropy(0.5) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(binary_entropy(0.0) == 0.0);
  CHECK(binary_entropy(1.0) == 0.0);
  const double h = -0.25 * std::log2(0.25) - 0.75 * std::log2(0.75);
  CHECK(binary_entropy(0.25) == doctest::Approx(h).epsilon(1e-15));
  CHECK(binary_entropy(0.25) == doctest::Approx(0.811278).epsilon(1e-6));
  CHECK_THROWS_AS(binary_entropy(-1e-9), std::domain_error);
  CHECK_THROWS_AS(binary_entropy(1.0 + 1e-9), std::domain_error);
}

TEST_CASE("entropy symmetric, concave, bounded by one") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double x = u(rng), y = u(rng);
    const double hx = binary_entropy(x);
    CHECK(hx == doctest::Approx(binary_entropy(1.0 - x)).epsilon(1e-12));
    CHECK(hx <= 1.0);
    CHECK(hx >= 0.0);
    CHECK(binary_entropy(0.5 * (x + y)) >= 0.5 * (hx + binary_entropy(y)) - 1e-12);
  }
}

TEST_CASE("chernoff bounds at x = 0") {
  const double eps = std::exp(-10.0);
  const auto c1 = chernoff_expected_bounds(0.0, eps);
  CHECK(c1.lower == 0.0);
  CHECK(c1.upper == doctest::Approx(20.0).epsilon(1e-12));
  const auto c2 = chernoff_observed_bounds(0.0, eps);
  CHECK(c2.lower == 0.0);
  CHECK(c2.upper == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("chernoff bounds at a million counts") {
  const double eps = 1.5e-10;
  const long double b = std::log(1.0L / eps);
  const long double x = 1e6L;
  const auto c1 = chernoff_expected_bounds(1e6, eps);
  CHECK(c1.lower == doctest::Approx(double(x - b / 2 - std::sqrt(2 * b * x + b * b / 4))).epsilon(1e-13));
  CHECK(c1.upper == doctest::Approx(double(x + b + std::sqrt(2 * b * x + b * b))).epsilon(1e-13));
  CHECK(c1.lower == doctest::Approx(9.9326e5).epsilon(1e-5));
  CHECK(c1.upper == doctest::Approx(1.00675e6).epsilon(1e-5));
  const auto c2 = chernoff_observed_bounds(1e6, eps);
  CHECK(c2.lower == doctest::Approx(double(x - std::sqrt(2 * b * x))).epsilon(1e-13));
  CHECK(c2.lower == doctest::Approx(9.9327e5).epsilon(1e-5));
  CHECK(c2.upper == doctest::Approx(1.00673e6).epsilon(1e-5));
}

TEST_CASE("chernoff ordering, nesting and relative width") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> lx(-3.0, 13.0), le(-25.0, -1.0);
  for (int i = 0; i < 2000; ++i) {
    const double x = std::pow(10.0, lx(rng));
    const double eps = std::pow(10.0, le(rng));
    const auto c1 = chernoff_expected_bounds(x, eps);
    const auto c2 = chernoff_observed_bounds(x, eps);
    CHECK(c1.lower <= x);
    CHECK(x <= c1.upper);
    CHECK(c2.lower <= x);
    CHECK(x <= c2.upper);
    CHECK(chernoff_observed_bounds(c1.lower, eps).lower <= x);
    CHECK(chernoff_observed_bounds(c1.upper, eps).upper >= x);
    // C1 is the wider of the two in both directions.
    CHECK(c1.lower <= c2.lower + 1e-9 * x);
    CHECK(c1.upper >= c2.upper - 1e-9 * x);
  }
  double prev = 1e300;
  for (double x = 1e2; x < 1e14; x *= 10) {
    const auto c = chernoff_expected_bounds(x, 1e-10);
    const double w = (c.upper - c.lower) / x;
    CHECK(w < prev);
    prev = w;
  }
  CHECK(prev < 1e-5);
}

TEST_CASE("gamma^U against an independent transcription") {
  const double g = random_sampling_gamma(1e6, 1e6, 0.02, 1.5e-10);
  CHECK(g > 0.0);
  CHECK(g < 0.01);
  CHECK(g == doctest::Approx(gamma_reference(1e6, 1e6, 0.02, 1.5e-10)).epsilon(1e-10));

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ln(1.0, 12.0), lam(1e-6, 0.5), le(-20.0, -2.0);
  for (int i = 0; i < 1000; ++i) {
    const double n = std::pow(10.0, ln(rng)), k = std::pow(10.0, ln(rng));
    const double l = lam(rng), e = std::pow(10.0, le(rng));
    const double v = random_sampling_gamma(n, k, l, e);
    CHECK(v >= 0.0);
    CHECK(v == doctest::Approx(gamma_reference(n, k, l, e)).epsilon(1e-9));
  }
}

TEST_CASE("gamma^U vanishes and is nonincreasing in sample sizes") {
  double prev = 1e300;
  for (double n = 1e3; n <= 1e18; n *= 10) {
    const double g = random_sampling_gamma(n, n, 0.05, 1e-10);
    CHECK(g <= prev);
    prev = g;
  }
  CHECK(prev < 1e-7);

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> ln(2.0, 12.0), lam(1e-4, 0.5), le(-15.0, -3.0), step(0.0, 2.0);
  for (int i = 0; i < 1000; ++i) {
    const double n = std::pow(10.0, ln(rng)), k = std::pow(10.0, ln(rng));
    const double l = lam(rng), e = std::pow(10.0, le(rng));
    const double f = std::pow(10.0, step(rng));
    const double base = random_sampling_gamma(n, k, l, e);
    CHECK(random_sampling_gamma(n * f, k, l, e) <= base * (1 + 1e-12));
    CHECK(random_sampling_gamma(n, k * f, l, e) <= base * (1 + 1e-12));
  }
  CHECK_THROWS_AS(random_sampling_gamma(1e6, 1e6, 0.0, 1e-10), std::domain_error);
  CHECK_THROWS_AS(random_sampling_gamma(1e6, 1e6, 1.0, 1e-10), std::domain_error);
  CHECK_THROWS_AS(random_sampling_gamma(0.0, 1e6, 0.1, 1e-10), std::domain_error);
}

TEST_CASE("bessel I0") {
  CHECK(bessel_i0(0.0) == 1.0);
  CHECK(bessel_i0(1.0) == doctest::Approx(1.2660658777520082).epsilon(1e-14));
  CHECK(bessel_i0(-2.5) == bessel_i0(2.5));
  double prev = 0.0;
  for (int i = 0; i <= 3000; ++i) {
    const double x = 0.01 * i;
    const double v = bessel_i0(x);
    CHECK(v >= 1.0);
    if (i > 0) CHECK(v > prev);
    prev = v;
    CHECK(v == doctest::Approx(i0_by_trapezoid(x)).epsilon(1e-12));
  }
}

TEST_CASE("epsilon composition") {
  const auto b = compose_epsilons(1.5e-10);
  CHECK(b.eps_tp == doctest::Approx(3.6e-9).epsilon(1e-14));
  CHECK(b.chernoff_applications == 13);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> le(-20.0, -2.0);
  for (int i = 0; i < 1000; ++i) {
    const double e = std::pow(10.0, le(rng));
    const auto c = compose_epsilons(e);
    CHECK(c.eps_sec == doctest::Approx(23 * e).epsilon(1e-14));
    CHECK(c.eps_tp == doctest::Approx(24 * e).epsilon(1e-14));
    CHECK(c.eps_tp - c.eps_sec == doctest::Approx(e).epsilon(1e-9));
  }
  CHECK_THROWS_AS(compose_epsilons(0.0), std::domain_error);
}
