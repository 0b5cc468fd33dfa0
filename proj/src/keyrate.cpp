#include "tfqkd/keyrate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tfqkd {

namespace {

constexpr double kLambdaFloor = 1e-12;

double require_positive(double p, const char* what) {
  if (!(p > 0.0)) throw ValidationError(std::string("decoy analysis needs ") + what + " > 0");
  return p;
}

}  // namespace

double BoundLedger::apply(std::string_view quantity, BoundKind kind, double value) {
  if (mode_ == KeyMode::asymptotic) return std::max(value, 0.0);
  for (const auto& r : records_) {
    if (r.quantity == quantity && r.kind == kind) return r.output;
  }
  double out = 0.0;
  switch (kind) {
    case BoundKind::expected_lower: out = chernoff_expected_bounds(value, eps_).lower; break;
    case BoundKind::expected_upper: out = chernoff_expected_bounds(value, eps_).upper; break;
    case BoundKind::observed_lower: out = chernoff_observed_bounds(value, eps_).lower; break;
    case BoundKind::observed_upper: out = chernoff_observed_bounds(value, eps_).upper; break;
  }
  records_.push_back({std::string(quantity), kind, value, out});
  return out;
}

double BoundLedger::expected_lower(std::string_view q, double x) { return apply(q, BoundKind::expected_lower, x); }
double BoundLedger::expected_upper(std::string_view q, double x) { return apply(q, BoundKind::expected_upper, x); }
double BoundLedger::observed_lower(std::string_view q, double x) { return apply(q, BoundKind::observed_lower, x); }
double BoundLedger::observed_upper(std::string_view q, double x) { return apply(q, BoundKind::observed_upper, x); }

SinglesYields estimate_singles_yields(const ObservedCounts& counts, const SourceSetting& a,
                                      const SourceSetting& b, const SystemParams& params,
                                      BoundLedger& ledger) {
  using enum Intensity;
  require_positive(a.p_ohat, "p_ohat_a");
  require_positive(b.p_ohat, "p_ohat_b");
  const double p_oo_d = require_positive(counts.p_oo_d, "p_oo^d");
  const double N = params.N;

  // Decoy rows pool both vacuum flavours.
  const double p_vac_a = a.p_o + a.p_ohat;
  const double p_vac_b = b.p_o + b.p_ohat;
  const double x_vac_nub = counts.at(vacuum, decoy) + counts.at(declare_vacuum, decoy);
  const double x_nua_vac = counts.at(decoy, vacuum) + counts.at(decoy, declare_vacuum);

  auto bound = [&](double mu, double nu, double x_decoy, double p_decoy, double x_signal,
                   double p_signal, double x_dark, const char* side) {
    const std::string s(side);
    const double decoy_lo = ledger.expected_lower("x_vac_nu/" + s, x_decoy);
    const double signal_up = ledger.expected_upper("x_ohat_mu/" + s, x_signal);
    const double dark_up = ledger.expected_upper("x_oo_d/" + s, x_dark);
    const double mu2 = mu * mu;
    return mu / (N * (mu * nu - nu * nu)) *
           (std::exp(nu) * decoy_lo / p_decoy -
            nu * nu / mu2 * std::exp(mu) * signal_up / p_signal -
            (mu2 - nu * nu) / mu2 * dark_up / p_oo_d);
  };

  SinglesYields y;
  y.y01_lower = bound(b.mu, b.nu, x_vac_nub, p_vac_a * b.p_nu, counts.at(declare_vacuum, signal),
                      a.p_ohat * b.p_mu, counts.x_oo_d, "y01");
  y.y10_lower = bound(a.mu, a.nu, x_nua_vac, a.p_nu * p_vac_b, counts.at(signal, declare_vacuum),
                      a.p_mu * b.p_ohat, counts.x_oo_d, "y10");
  if (!(y.y01_lower > 0.0) || !(y.y10_lower > 0.0)) {
    throw InfeasibleDecoyError("single-photon yield bound is not positive");
  }
  y.y01_lower = std::min(y.y01_lower, 1.0);
  y.y10_lower = std::min(y.y10_lower, 1.0);
  return y;
}

namespace {

double z_pool_max(const ObservedCounts& counts) {
  using enum Intensity;
  return std::max(counts.at(vacuum, vacuum) + counts.at(vacuum, signal),
                  counts.at(signal, vacuum) + counts.at(signal, signal));
}

}  // namespace

double estimate_s11_z(const ObservedCounts& counts, const SourceSetting& a,
                      const SourceSetting& b, const SystemParams& params,
                      const SinglesYields& yields, BoundLedger& ledger) {
  const double x_max = z_pool_max(counts);
  if (!(x_max > 0.0)) return 0.0;
  const double z10 = params.N * a.p_mu * b.p_o * a.mu * std::exp(-a.mu) * yields.y10_lower;
  const double z01 = params.N * a.p_o * b.p_mu * b.mu * std::exp(-b.mu) * yields.y01_lower;
  const double expected = z01 * z10 / x_max;
  return std::min(ledger.observed_lower("s11_z", expected), counts.n_z);
}

double estimate_s0mub_z(const ObservedCounts& counts, const SourceSetting& a,
                        const SourceSetting& b, const SystemParams&, BoundLedger& ledger) {
  using enum Intensity;
  require_positive(a.p_ohat, "p_ohat_a");
  const double p_oo_d = require_positive(counts.p_oo_d, "p_oo^d");
  const double x_max = z_pool_max(counts);
  if (!(x_max > 0.0)) return 0.0;

  const double ohat_mu_lo = ledger.expected_lower("x_ohat_mu/s0", counts.at(declare_vacuum, signal));
  const double dark_lo = ledger.expected_lower("x_oo_d", counts.x_oo_d);
  // Rescale declare-vacuum rows to the unannounced vacuum rows.
  const double x_o_mu = a.p_o * ohat_mu_lo / a.p_ohat;
  const double x_o_o = a.p_o * b.p_o * dark_lo / p_oo_d;
  const double z00 = a.p_mu * b.p_o * std::exp(-a.mu) * dark_lo / p_oo_d;
  const double z0mu = a.p_mu * std::exp(-a.mu) * x_o_mu / a.p_o;
  const double expected = (x_o_mu * z00 + x_o_o * z0mu) / x_max;
  return ledger.observed_lower("s0mub_z", expected);
}

double estimate_s11_x(const SourceSetting& a, const SourceSetting& b,
                      const LinkGeometry& geom, const SystemParams& params,
                      const SinglesYields& yields, BoundLedger& ledger) {
  const double inv = inverse_gain_integral(a, b, geom, params);
  const double expected = 2.0 * params.N * a.p_nu * b.p_nu * a.nu * b.nu *
                          std::exp(-2.0 * (a.nu + b.nu)) * yields.y01_lower *
                          yields.y10_lower / std::numbers::pi * inv;
  return ledger.observed_lower("s11_x", expected);
}

ErrorEstimate estimate_e11_x(const ObservedCounts& counts, const SourceSetting& a,
                             const SourceSetting& b, const LinkGeometry& geom,
                             const SystemParams& params, double s11_x_lower,
                             BoundLedger& ledger) {
  const double p_oo_d = require_positive(counts.p_oo_d, "p_oo^d");
  const double N = params.N;
  const double q00_lo = ledger.expected_lower("x_oo_d", counts.x_oo_d) / (N * p_oo_d);
  const double q00_up = ledger.expected_upper("x_oo_d/q00", counts.x_oo_d) / (N * p_oo_d);
  const double pp = a.p_nu * b.p_nu;
  const double s = a.nu + b.nu;

  // One time bin collapses to vacuum; these errors occur at rate 1/2.
  const double n_single_vac = 2.0 * params.delta * N * pp * std::exp(-s) * q00_lo / std::numbers::pi;
  // Both bins vacuum; subtracted twice above, so added back once.
  const double n_double_vac = N * pp * std::exp(-2.0 * s) * q00_up * q00_up / std::numbers::pi *
                              inverse_gain_integral(a, b, geom, params);

  ErrorEstimate e;
  e.t11_x_upper = std::max(
      counts.m_x - ledger.observed_lower("m_vac_single", n_single_vac / 2.0) + n_double_vac / 2.0,
      0.0);
  if (!(s11_x_lower > 0.0)) {
    e.e11_x_upper = 0.5;
  } else {
    e.e11_x_upper = std::clamp(e.t11_x_upper / s11_x_lower, 0.0, 0.5);
  }
  return e;
}

double estimate_phi11_z(const DecoyEstimates& dec, const SystemParams& params, KeyMode mode) {
  if (mode == KeyMode::asymptotic) return dec.e11_x_upper;
  if (!(dec.s11_z_lower > 0.0 && dec.s11_x_lower > 0.0)) return 0.5;
  const double lam = std::clamp(dec.e11_x_upper, kLambdaFloor, 0.5);
  const double gamma = random_sampling_gamma(dec.s11_z_lower, dec.s11_x_lower, lam, params.eps);
  return std::min(dec.e11_x_upper + gamma, 0.5);
}

DecoyEstimates estimate_decoy(const ObservedCounts& counts, const SourceSetting& a,
                              const SourceSetting& b, const LinkGeometry& geom,
                              const SystemParams& params, BoundLedger& ledger) {
  const SinglesYields y = estimate_singles_yields(counts, a, b, params, ledger);
  DecoyEstimates d;
  d.y01_lower = y.y01_lower;
  d.y10_lower = y.y10_lower;
  d.s11_z_lower = estimate_s11_z(counts, a, b, params, y, ledger);
  d.s0mub_z_lower = estimate_s0mub_z(counts, a, b, params, ledger);
  d.s11_x_lower = estimate_s11_x(a, b, geom, params, y, ledger);
  const ErrorEstimate e = estimate_e11_x(counts, a, b, geom, params, d.s11_x_lower, ledger);
  d.t11_x_upper = e.t11_x_upper;
  d.e11_x_upper = e.e11_x_upper;
  d.phi11_z_upper = estimate_phi11_z(d, params, ledger.mode());
  return d;
}

KeyRateResult key_length(const ObservedCounts& counts, const DecoyEstimates& dec,
                         const EpsilonBudget& budget, const SystemParams& params) {
  if (!(counts.n_z > 0.0)) throw UndefinedRateError("key_length: n_z = 0");
  KeyRateResult r;
  r.mode = KeyMode::finite;
  r.estimates = dec;
  r.budget = budget;
  r.vacuum_term = dec.s0mub_z_lower;
  r.single_photon_term = dec.s11_z_lower * (1.0 - binary_entropy(std::clamp(dec.phi11_z_upper, 0.0, 0.5)));
  r.error_correction_term = counts.n_z * params.f * binary_entropy(std::clamp(counts.E_z, 0.0, 0.5));
  r.correctness_penalty = std::log2(2.0 / budget.eps_cor);
  r.smoothing_penalty = 2.0 * std::log2(2.0 / (budget.eps_prime * budget.eps_hat));
  r.privacy_amplification_penalty = 2.0 * std::log2(1.0 / (2.0 * budget.eps_pa));
  r.ell_unclamped = r.vacuum_term + r.single_photon_term - r.error_correction_term -
                    r.correctness_penalty - r.smoothing_penalty - r.privacy_amplification_penalty;
  r.ell = std::max(r.ell_unclamped, 0.0);
  r.rate = r.ell / params.N;
  return r;
}

double asymptotic_rate(const ObservedCounts& counts, const DecoyEstimates& dec,
                       const SystemParams& params) {
  const double bits = dec.s0mub_z_lower +
                      dec.s11_z_lower * (1.0 - binary_entropy(std::clamp(dec.e11_x_upper, 0.0, 0.5))) -
                      counts.n_z * params.f * binary_entropy(std::clamp(counts.E_z, 0.0, 0.5));
  return std::max(bits, 0.0) / params.N;
}

LinkEvaluation evaluate_counts(const ObservedCounts& counts, const SourceSetting& a,
                               const SourceSetting& b, const LinkGeometry& geom,
                               const SystemParams& params, KeyMode mode) {
  BoundLedger ledger(params.eps, mode);
  LinkEvaluation ev;
  ev.counts = counts;
  const DecoyEstimates dec = estimate_decoy(counts, a, b, geom, params, ledger);
  const EpsilonBudget budget = compose_epsilons(params.eps, ledger.applications() > 0
                                                                ? ledger.applications()
                                                                : kStandardChernoffApplications);
  if (mode == KeyMode::finite) {
    ev.result = key_length(counts, dec, budget, params);
  } else {
    KeyRateResult r;
    r.mode = KeyMode::asymptotic;
    r.estimates = dec;
    r.budget = budget;
    r.vacuum_term = dec.s0mub_z_lower;
    r.single_photon_term = dec.s11_z_lower * (1.0 - binary_entropy(std::clamp(dec.e11_x_upper, 0.0, 0.5)));
    r.error_correction_term = counts.n_z * params.f * binary_entropy(std::clamp(counts.E_z, 0.0, 0.5));
    r.ell_unclamped = r.vacuum_term + r.single_photon_term - r.error_correction_term;
    r.ell = std::max(r.ell_unclamped, 0.0);
    r.rate = asymptotic_rate(counts, dec, params);
    ev.result = r;
  }
  ev.bounds = ledger.records();
  return ev;
}

LinkEvaluation evaluate_link(const SourceSetting& a, const SourceSetting& b,
                             const LinkGeometry& geom, const SystemParams& params, KeyMode mode) {
  return evaluate_counts(simulate_counts(a, b, geom, params), a, b, geom, params, mode);
}

}  // namespace tfqkd
