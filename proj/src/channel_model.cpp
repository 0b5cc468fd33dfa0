#include "tfqkd/channel_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tfqkd/finite_stats.hpp"
#include "tfqkd/quadrature.hpp"

namespace tfqkd {

namespace {

struct Amplitudes {
  double y;
  double omega;
};

Amplitudes amplitudes(double k_a, double k_b, const Transmittance& t, double p_d) {
  return {std::exp(-(t.eta_a * k_a + t.eta_b * k_b) / 2.0) * (1.0 - p_d),
          std::sqrt(t.eta_a * k_a * t.eta_b * k_b)};
}

// e^{w cos t} + e^{-w cos t} - 2y, written to avoid cancellation when both
// w and 1 - y are tiny.
double interference_sum(double omega, double y, double theta) {
  const double c = omega * std::cos(theta);
  return 2.0 * (std::cosh(c) - 1.0) + 2.0 * (1.0 - y);
}

QuadratureOptions window_quadrature() { return {}; }

}  // namespace

Transmittance transmittance(const LinkGeometry& geom, const SystemParams& params) {
  return {geom.eta_a(params), geom.eta_b(params)};
}

GainComponents per_phase_gains(double k_a, double k_b, double theta,
                               const LinkGeometry& geom, const SystemParams& params) {
  const auto [y, omega] = amplitudes(k_a, k_b, transmittance(geom, params), params.p_d);
  GainComponents g;
  g.y = y;
  g.omega = omega;
  const double c = omega * std::cos(theta);
  g.q_left = y * (std::exp(c) - y);
  g.q_right = y * (std::exp(-c) - y);
  g.q_total = 2.0 * y * (bessel_i0(omega) - y);
  return g;
}

double overall_gain(double k_a, double k_b, const LinkGeometry& geom, const SystemParams& params) {
  const auto [y, omega] = amplitudes(k_a, k_b, transmittance(geom, params), params.p_d);
  return 2.0 * y * (bessel_i0(omega) - y);
}

double single_photon_yield(double eta, double p_d) {
  return eta * (1.0 - p_d) + (1.0 - eta) * 2.0 * p_d * (1.0 - p_d);
}

ObservedCounts expected_pair_counts(const SourceSetting& a, const SourceSetting& b,
                                    const LinkGeometry& geom, const SystemParams& params) {
  ObservedCounts c;
  for (Intensity ka : kAllIntensities) {
    for (Intensity kb : kAllIntensities) {
      c.x(index(ka), index(kb)) = params.N * a.probability(ka) * b.probability(kb) *
                                  overall_gain(a.intensity(ka), b.intensity(kb), geom, params);
    }
  }
  using enum Intensity;
  c.x_oo_d = c.at(declare_vacuum, declare_vacuum) + c.at(declare_vacuum, vacuum) +
             c.at(vacuum, declare_vacuum);
  c.p_oo_d = a.p_ohat * b.p_ohat + a.p_ohat * b.p_o + a.p_o * b.p_ohat;
  return c;
}

ZBasisCounts z_basis_counts(const ObservedCounts& counts, const SourceSetting&,
                            const SourceSetting&, const LinkGeometry&,
                            const SystemParams& params) {
  using enum Intensity;
  // N p p q ratios equal the corresponding x ratios.
  const double x_oo = counts.at(vacuum, vacuum);
  const double x_om = counts.at(vacuum, signal);
  const double x_mo = counts.at(signal, vacuum);
  const double x_mm = counts.at(signal, signal);
  const double pool_vacuum = x_oo + x_om;  // Alice sent vacuum
  const double pool_signal = x_mo + x_mm;  // Alice sent signal
  if (!(pool_vacuum > 0.0 && pool_signal > 0.0)) {
    throw UndefinedRateError("z_basis_counts: an Alice Z pool is empty");
  }
  const double x_min = std::min(pool_vacuum, pool_signal);
  ZBasisCounts z;
  z.n_C_z = x_min * (x_om / pool_vacuum) * (x_mo / pool_signal);
  z.n_E_z = x_min * (x_oo / pool_vacuum) * (x_mm / pool_signal);
  z.n_z = z.n_C_z + z.n_E_z;
  z.m_z = (1.0 - params.e_d_z) * z.n_E_z + params.e_d_z * z.n_C_z;
  if (!(z.n_z > 0.0)) throw UndefinedRateError("z_basis_counts: n_z = 0");
  z.E_z = z.m_z / z.n_z;
  return z;
}

XBasisCounts x_basis_counts(const SourceSetting& a, const SourceSetting& b,
                            const LinkGeometry& geom, const SystemParams& params,
                            ErrorCountForm form) {
  const auto [y, omega] = amplitudes(a.nu, b.nu, transmittance(geom, params), params.p_d);
  const double lo = params.sigma;
  const double hi = params.sigma + params.delta;
  const double scale = params.N * a.p_nu * b.p_nu / std::numbers::pi;
  const auto opt = window_quadrature();

  XBasisCounts out;
  out.n_x = scale * adaptive_simpson([&](double t) { return y * interference_sum(omega, y, t); },
                                     lo, hi, opt);
  if (form == ErrorCountForm::first_principles) {
    // q^theta p_E = 2 q^L q^R / q^theta = 2y (1 + y^2 - y S) / (S - 2y)
    out.m_x = 2.0 * scale * adaptive_simpson(
                                [&](double t) {
                                  const double c = omega * std::cos(t);
                                  const double num = (1.0 - y * std::exp(c)) * (1.0 - y * std::exp(-c));
                                  return y * num / interference_sum(omega, y, t);
                                },
                                lo, hi, opt);
  } else {
    out.m_x = 2.0 * scale * adaptive_simpson(
                                [&](double t) {
                                  const double d = interference_sum(omega, y, t);
                                  return y * ((1.0 - y) * (1.0 - y) / d - 1.0);
                                },
                                lo, hi, opt);
  }
  return out;
}

double aopp_x_error_count(const SourceSetting& a, const SourceSetting& b,
                          const LinkGeometry& geom, const SystemParams& params) {
  const auto [y, omega] = amplitudes(a.nu, b.nu, transmittance(geom, params), params.p_d);
  const double scale = 2.0 * params.N * a.p_nu * b.p_nu / std::numbers::pi;
  return scale * adaptive_simpson(
                     [&](double t) { return y * (std::exp(-omega * std::cos(t)) - y); },
                     params.sigma, params.sigma + params.delta, window_quadrature());
}

double inverse_gain_integral(const SourceSetting& a, const SourceSetting& b,
                             const LinkGeometry& geom, const SystemParams& params) {
  const auto [y, omega] = amplitudes(a.nu, b.nu, transmittance(geom, params), params.p_d);
  return adaptive_simpson([&](double t) { return 1.0 / (y * interference_sum(omega, y, t)); },
                          params.sigma, params.sigma + params.delta, window_quadrature());
}

ObservedCounts simulate_counts(const SourceSetting& a, const SourceSetting& b,
                               const LinkGeometry& geom, const SystemParams& params,
                               ErrorCountForm form) {
  ObservedCounts c = expected_pair_counts(a, b, geom, params);
  const ZBasisCounts z = z_basis_counts(c, a, b, geom, params);
  c.n_z = z.n_z;
  c.m_z = z.m_z;
  c.n_C_z = z.n_C_z;
  c.n_E_z = z.n_E_z;
  c.E_z = z.E_z;
  const XBasisCounts xb = x_basis_counts(a, b, geom, params, form);
  c.n_x = xb.n_x;
  c.m_x = xb.m_x;
  return c;
}

}  // namespace tfqkd
