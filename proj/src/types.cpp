#include "tfqkd/types.hpp"

#include <cmath>
#include <string>

namespace tfqkd {

const char* to_string(Intensity k) {
  switch (k) {
    case Intensity::signal: return "signal";
    case Intensity::decoy: return "decoy";
    case Intensity::vacuum: return "vacuum";
    case Intensity::declare_vacuum: return "declare_vacuum";
  }
  return "?";
}

void SourceSetting::validate() const {
  if (!(std::isfinite(mu) && std::isfinite(nu) && nu > 0.0 && mu > nu)) {
    throw ValidationError("source: intensities must satisfy mu > nu > 0");
  }
  for (double p : {p_mu, p_nu, p_o, p_ohat}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("source: probability outside [0, 1]");
  }
  if (std::abs(p_mu + p_nu + p_o + p_ohat - 1.0) > 1e-12) {
    throw ValidationError("source: probabilities must sum to 1");
  }
}

void SystemParams::validate() const {
  if (!(eta_d > 0.0 && eta_d <= 1.0)) throw ValidationError("system: eta_d outside (0, 1]");
  if (!(p_d >= 0.0 && p_d < 1.0)) throw ValidationError("system: p_d outside [0, 1)");
  if (!(alpha >= 0.0 && std::isfinite(alpha))) throw ValidationError("system: alpha must be >= 0");
  if (!(e_d_z >= 0.0 && e_d_z <= 0.5)) throw ValidationError("system: e_d_z outside [0, 0.5]");
  if (!(f >= 1.0 && std::isfinite(f))) throw ValidationError("system: f must be >= 1");
  if (!(N >= 1.0 && std::isfinite(N))) throw ValidationError("system: N must be >= 1");
  if (!(sigma >= 0.0 && sigma < std::numbers::pi / 2)) throw ValidationError("system: sigma outside [0, pi/2)");
  if (!(delta > 0.0 && delta <= std::numbers::pi / 2)) throw ValidationError("system: delta outside (0, pi/2]");
  if (!(eps > 0.0 && eps < 1.0)) throw ValidationError("system: eps outside (0, 1)");
}

double LinkGeometry::eta_a(const SystemParams& p) const {
  return p.eta_d * std::pow(10.0, -p.alpha * l_a / 10.0);
}

double LinkGeometry::eta_b(const SystemParams& p) const {
  return p.eta_d * std::pow(10.0, -p.alpha * l_b / 10.0);
}

void LinkGeometry::validate() const {
  if (!(l_a >= 0.0 && l_b >= 0.0 && std::isfinite(l_a) && std::isfinite(l_b))) {
    throw ValidationError("geometry: distances must be finite and >= 0");
  }
}

SystemParams reference_system() { return SystemParams{}; }

}  // namespace tfqkd
