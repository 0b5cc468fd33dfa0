#pragma once

#include <stdexcept>

namespace tfqkd {

/// Repeaterless capacity -log2(1 - eta), eta = eta_d 10^(-alpha L / 10).
double plob_bound(double total_km, double eta_d, double alpha);

/// Source of the sending-or-not-sending variant.
struct SnsSourceSetting {
  double mu_a = 0.0, mu_b = 0.0;
  double nu_a = 0.0, nu_b = 0.0;
  double t_a = 0.0, t_b = 0.0;  // Z-window send probabilities

  void validate() const;
};

class UnusableCoinError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// nu_a/nu_b - t_a(1-t_b) mu_a e^-mu_a / (t_b(1-t_a) mu_b e^-mu_b).
double sns_constraint_residual(const SnsSourceSetting& s);

struct QuantumCoin {
  double fidelity = 1.0;
  double q1 = 0.0;     // single-photon gain of the Z window
  double delta = 0.0;  // (1 - F) / (2 Q1)
};

/// Imbalance of the quantum coin between the Z-window and X-window
/// single-photon states. Throws UnusableCoinError when delta >= 0.5.
QuantumCoin sns_quantum_coin(const SnsSourceSetting& s, double y10, double y01);
double sns_quantum_coin_delta(const SnsSourceSetting& s, double y10, double y01);

/// Same fidelity computed with general matrix square roots; the states are
/// diagonal, so this agrees with the closed form and serves as a cross-check.
double sns_fidelity_matrix(const SnsSourceSetting& s);

/// min of [(1-2D) sqrt(e) + 2 sqrt(D(1-D)(1-e))]^2 and e + 4D + 4 sqrt(D e),
/// clamped to 0.5.
double sns_phase_error_bound(double delta, double e1x);
double sns_phase_error_exact(double delta, double e1x);
double sns_phase_error_relaxed(double delta, double e1x);

}  // namespace tfqkd
