#pragma once

#include <Eigen/Core>

#include "tfqkd/types.hpp"

namespace tfqkd {

/// Detection statistics of the relay interferometer for one intensity pair.
struct GainComponents {
  double y = 1.0;         // no-click amplitude of one detector, incl. dark counts
  double omega = 0.0;     // interference amplitude
  double q_left = 0.0;    // only L clicks, at phase theta
  double q_right = 0.0;   // only R clicks, at phase theta
  double q_total = 0.0;   // phase-averaged single-click gain
};

/// Expected counts for every intensity pair plus the post-matched basis totals.
/// `x(index(k_a), index(k_b))` is the number of single-click rounds in which
/// Alice sent k_a and Bob sent k_b.
struct ObservedCounts {
  Eigen::Matrix4d x = Eigen::Matrix4d::Zero();
  double x_oo_d = 0.0;  // at least one side declared vacuum
  double p_oo_d = 0.0;
  double n_z = 0.0, m_z = 0.0, n_C_z = 0.0, n_E_z = 0.0, E_z = 0.0;
  double n_x = 0.0, m_x = 0.0;

  double at(Intensity a, Intensity b) const { return x(index(a), index(b)); }
};

struct ZBasisCounts {
  double n_z = 0.0, m_z = 0.0, n_C_z = 0.0, n_E_z = 0.0, E_z = 0.0;
};

struct XBasisCounts {
  double n_x = 0.0;
  double m_x = 0.0;
};

/// How the X-basis error count is evaluated. `first_principles` integrates
/// 2 q^L q^R / q^theta; `printed_closed_form` is the algebraic form
/// y[(1-y)^2/(S-2y) - 1], which is negative for physical parameters and is
/// kept only for comparison.
enum class ErrorCountForm { first_principles, printed_closed_form };

/// Raised when a quantity is undefined for the given counts (e.g. E^z with n^z = 0).
class UndefinedRateError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Channel transmittances eta_a, eta_b (detector efficiency included).
struct Transmittance {
  double eta_a = 1.0;
  double eta_b = 1.0;
};
Transmittance transmittance(const LinkGeometry& geom, const SystemParams& params);

GainComponents per_phase_gains(double k_a, double k_b, double theta,
                               const LinkGeometry& geom, const SystemParams& params);

/// q = 2y (I0(omega) - y): the single-click gain averaged over theta.
double overall_gain(double k_a, double k_b, const LinkGeometry& geom,
                    const SystemParams& params);

/// Probability of exactly one click when a lone photon crosses a channel of
/// transmittance eta (the other input is vacuum).
double single_photon_yield(double eta, double p_d);

/// Fills x, x_oo_d and p_oo_d: x_{k_a k_b} = N p_{k_a} p_{k_b} q_{k_a k_b}.
ObservedCounts expected_pair_counts(const SourceSetting& a, const SourceSetting& b,
                                    const LinkGeometry& geom, const SystemParams& params);

/// Post-matched Z-basis totals from the pair counts. Throws UndefinedRateError
/// when no Z pair can form.
ZBasisCounts z_basis_counts(const ObservedCounts& counts, const SourceSetting& a,
                            const SourceSetting& b, const LinkGeometry& geom,
                            const SystemParams& params);

/// Post-matched X-basis totals on the phase window [sigma, sigma + delta].
XBasisCounts x_basis_counts(const SourceSetting& a, const SourceSetting& b,
                            const LinkGeometry& geom, const SystemParams& params,
                            ErrorCountForm form = ErrorCountForm::first_principles);

/// X-basis error count of the actively-odd-parity-pairing variant, for comparison.
double aopp_x_error_count(const SourceSetting& a, const SourceSetting& b,
                          const LinkGeometry& geom, const SystemParams& params);

/// Integral of 1/q^theta_{nu_a nu_b} over [sigma, sigma + delta].
double inverse_gain_integral(const SourceSetting& a, const SourceSetting& b,
                             const LinkGeometry& geom, const SystemParams& params);

/// Everything the key-rate pipeline needs from the channel in one call.
ObservedCounts simulate_counts(const SourceSetting& a, const SourceSetting& b,
                               const LinkGeometry& geom, const SystemParams& params,
                               ErrorCountForm form = ErrorCountForm::first_principles);

}  // namespace tfqkd
