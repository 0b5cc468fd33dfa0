#include "tfqkd/finite_stats.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tfqkd {

double binary_entropy(double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("binary_entropy: x outside [0, 1]");
  if (x == 0.0 || x == 1.0) return 0.0;
  return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

namespace {

double log_inverse(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::domain_error("failure probability outside (0, 1)");
  return std::log(1.0 / eps);
}

}  // namespace

Interval chernoff_expected_bounds(double x, double eps) {
  const double b = log_inverse(eps);
  x = std::max(x, 0.0);
  return {std::max(x - b / 2 - std::sqrt(2 * b * x + b * b / 4), 0.0),
          x + b + std::sqrt(2 * b * x + b * b)};
}

Interval chernoff_observed_bounds(double x_star, double eps) {
  const double b = log_inverse(eps);
  x_star = std::max(x_star, 0.0);
  return {std::max(x_star - std::sqrt(2 * b * x_star), 0.0),
          x_star + b / 2 + std::sqrt(2 * b * x_star + b * b / 4)};
}

double random_sampling_gamma(double n, double k, double lam, double eps) {
  if (!(n > 0.0 && k > 0.0)) throw std::domain_error("random_sampling_gamma: n, k must be positive");
  if (!(lam > 0.0 && lam < 1.0)) throw std::domain_error("random_sampling_gamma: lambda outside (0, 1)");
  if (!(eps > 0.0 && eps < 1.0)) throw std::domain_error("random_sampling_gamma: eps outside (0, 1)");
  const double sum = n + k;
  const double a = std::max(n, k);
  const double var = lam * (1.0 - lam);
  const double g = sum / (n * k) *
                   std::log(sum / (2.0 * std::numbers::pi * n * k * var * eps * eps));
  // Tiny samples can push the log argument below 1; the bound is then zero.
  if (g <= 0.0) return 0.0;
  const double num = (1.0 - 2.0 * lam) * a * g / sum +
                     std::sqrt(a * a * g * g / (sum * sum) + 4.0 * var * g);
  const double den = 2.0 + 2.0 * a * a * g / (sum * sum);
  return num / den;
}

double bessel_i0(double x) {
  x = std::abs(x);
  if (x < 15.0) {
    // sum_k ((x/2)^k / k!)^2
    const double q = x * x / 4.0;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 500; ++k) {
      term *= q / (double(k) * double(k));
      sum += term;
      if (term < sum * 1e-17) break;
    }
    return sum;
  }
  // e^x / sqrt(2 pi x) * sum_k ((2k-1)!!)^2 / (k! (8x)^k), truncated at the
  // smallest term.
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 200; ++k) {
    const double next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * k * x);
    if (next >= term) break;
    term = next;
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return std::exp(x) / std::sqrt(2.0 * std::numbers::pi * x) * sum;
}

EpsilonBudget compose_epsilons(double eps_per_use, int applications) {
  if (!(eps_per_use > 0.0 && eps_per_use < 1.0)) {
    throw std::domain_error("compose_epsilons: eps outside (0, 1)");
  }
  EpsilonBudget b;
  b.eps_per_use = eps_per_use;
  b.eps_cor = b.eps_prime = b.eps_hat = b.eps_e = b.eps_beta = b.eps_pa = eps_per_use;
  b.chernoff_applications = applications;
  b.eps_0_plus_1 = applications * eps_per_use;
  b.eps_sec = 2.0 * (b.eps_prime + b.eps_hat + 2.0 * b.eps_e) + b.eps_beta + b.eps_0_plus_1 + b.eps_pa;
  b.eps_tp = b.eps_sec + b.eps_cor;
  return b;
}

}  // namespace tfqkd
