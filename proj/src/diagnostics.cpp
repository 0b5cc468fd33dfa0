#include "tfqkd/diagnostics.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "tfqkd/types.hpp"

namespace tfqkd {

namespace {

struct CoinWeights {
  double z1, z2;  // unnormalized Z-window single-photon weights
};

CoinWeights z_weights(const SnsSourceSetting& s) {
  return {s.t_a * (1.0 - s.t_b) * s.mu_a * std::exp(-s.mu_a),
          s.t_b * (1.0 - s.t_a) * s.mu_b * std::exp(-s.mu_b)};
}

Eigen::Matrix2d psd_sqrt(const Eigen::Matrix2d& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m);
  const Eigen::Vector2d ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double plob_bound(double total_km, double eta_d, double alpha) {
  if (!(total_km >= 0.0)) throw ValidationError("plob_bound: distance must be >= 0");
  const double eta = eta_d * std::pow(10.0, -alpha * total_km / 10.0);
  return -std::log1p(-eta) / std::log(2.0);
}

void SnsSourceSetting::validate() const {
  if (!(mu_a > 0.0 && mu_b > 0.0 && nu_a > 0.0 && nu_b > 0.0)) {
    throw ValidationError("sns source: intensities must be > 0");
  }
  if (!(t_a > 0.0 && t_a < 1.0 && t_b > 0.0 && t_b < 1.0)) {
    throw ValidationError("sns source: t must lie in (0, 1)");
  }
}

double sns_constraint_residual(const SnsSourceSetting& s) {
  s.validate();
  const auto w = z_weights(s);
  return s.nu_a / s.nu_b - w.z1 / w.z2;
}

QuantumCoin sns_quantum_coin(const SnsSourceSetting& s, double y10, double y01) {
  s.validate();
  if (!(y10 > 0.0 && y10 <= 1.0 && y01 > 0.0 && y01 <= 1.0)) {
    throw ValidationError("sns coin: yields must lie in (0, 1]");
  }
  const auto w = z_weights(s);
  const double c = 1.0 / (w.z1 + w.z2);
  const double pz1 = c * w.z1, pz2 = c * w.z2;
  const double px1 = s.nu_a / (s.nu_a + s.nu_b), px2 = s.nu_b / (s.nu_a + s.nu_b);
  QuantumCoin coin;
  coin.fidelity = std::min(std::sqrt(pz1 * px1) + std::sqrt(pz2 * px2), 1.0);
  coin.q1 = c * (w.z1 * y10 + w.z2 * y01);
  coin.delta = (1.0 - coin.fidelity) / (2.0 * coin.q1);
  if (coin.delta >= 0.5) throw UnusableCoinError("quantum coin imbalance >= 0.5");
  return coin;
}

double sns_quantum_coin_delta(const SnsSourceSetting& s, double y10, double y01) {
  return sns_quantum_coin(s, y10, y01).delta;
}

double sns_fidelity_matrix(const SnsSourceSetting& s) {
  s.validate();
  const auto w = z_weights(s);
  const double c = 1.0 / (w.z1 + w.z2);
  Eigen::Matrix2d rz = Eigen::Vector2d(c * w.z1, c * w.z2).asDiagonal();
  Eigen::Matrix2d rx =
      Eigen::Vector2d(s.nu_a / (s.nu_a + s.nu_b), s.nu_b / (s.nu_a + s.nu_b)).asDiagonal();
  const Eigen::Matrix2d sz = psd_sqrt(rz);
  return psd_sqrt(sz * rx * sz).trace();
}

double sns_phase_error_exact(double delta, double e1x) {
  const double v = (1.0 - 2.0 * delta) * std::sqrt(e1x) +
                   2.0 * std::sqrt(delta * (1.0 - delta) * (1.0 - e1x));
  return v * v;
}

double sns_phase_error_relaxed(double delta, double e1x) {
  return e1x + 4.0 * delta + 4.0 * std::sqrt(delta * e1x);
}

double sns_phase_error_bound(double delta, double e1x) {
  if (!(delta >= 0.0 && delta < 0.5)) throw ValidationError("phase error: delta outside [0, 0.5)");
  if (!(e1x >= 0.0 && e1x <= 0.5)) throw ValidationError("phase error: e1x outside [0, 0.5]");
  return std::min({sns_phase_error_exact(delta, e1x), sns_phase_error_relaxed(delta, e1x), 0.5});
}

}  // namespace tfqkd
