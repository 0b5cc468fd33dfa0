#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace tfqkd {

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

/// H2(x) = -x log2 x - (1-x) log2(1-x), with 0 log 0 = 0.
/// Throws std::domain_error outside [0, 1].
double binary_entropy(double x);

/// Bounds on the expected value x* given an observed count x:
///   upper = x + b + sqrt(2 b x + b^2),
///   lower = max(x - b/2 - sqrt(2 b x + b^2/4), 0),   b = ln(1/eps).
Interval chernoff_expected_bounds(double x, double eps);

/// Bounds on an observed count given its expected value x*:
///   upper = x* + b/2 + sqrt(2 b x* + b^2/4),   lower = x* - sqrt(2 b x*).
Interval chernoff_observed_bounds(double x_star, double eps);

/// Finite-sample deviation between the error rate of a k-sample and the
/// complementary n-sample when drawing without replacement.
/// Throws std::domain_error unless n, k > 0 and 0 < lam < 1.
double random_sampling_gamma(double n, double k, double lam, double eps);

/// Modified Bessel function of the first kind, order zero.
double bessel_i0(double x);

/// Failure-probability bookkeeping for the finite-key length.
struct EpsilonBudget {
  double eps_cor = 0.0;
  double eps_prime = 0.0;
  double eps_hat = 0.0;
  double eps_e = 0.0;
  double eps_beta = 0.0;
  double eps_pa = 0.0;
  double eps_per_use = 0.0;
  /// eps_0 + eps_1: one eps_per_use for every concentration bound applied
  /// while estimating s_0mub, s_11 and e_11.
  int chernoff_applications = 0;
  double eps_0_plus_1 = 0.0;
  double eps_sec = 0.0;
  double eps_tp = 0.0;
};

/// Number of concentration-bound applications in the standard pipeline.
inline constexpr int kStandardChernoffApplications = 13;

/// All base failure probabilities set to eps_per_use; eps_0 + eps_1 charged
/// for `applications` bound uses.
EpsilonBudget compose_epsilons(double eps_per_use,
                               int applications = kStandardChernoffApplications);

}  // namespace tfqkd
