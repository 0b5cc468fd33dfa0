#pragma once

#include <array>
#include <numbers>
#include <stdexcept>
#include <string>

namespace tfqkd {

/// Raised when an input violates a documented precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The four pulse classes each user chooses from, in matrix index order.
enum class Intensity : int { signal = 0, decoy = 1, vacuum = 2, declare_vacuum = 3 };

inline constexpr std::array<Intensity, 4> kAllIntensities{
    Intensity::signal, Intensity::decoy, Intensity::vacuum, Intensity::declare_vacuum};

constexpr int index(Intensity k) { return static_cast<int>(k); }

const char* to_string(Intensity k);

constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// One user's source: signal/decoy intensities and the send probabilities of
/// signal, decoy, vacuum and declare-vacuum pulses. Vacuum intensities are 0.
struct SourceSetting {
  double mu = 0.0;
  double nu = 0.0;
  double p_mu = 0.0;
  double p_nu = 0.0;
  double p_o = 0.0;
  double p_ohat = 0.0;

  double intensity(Intensity k) const {
    switch (k) {
      case Intensity::signal: return mu;
      case Intensity::decoy: return nu;
      default: return 0.0;
    }
  }
  double probability(Intensity k) const {
    switch (k) {
      case Intensity::signal: return p_mu;
      case Intensity::decoy: return p_nu;
      case Intensity::vacuum: return p_o;
      case Intensity::declare_vacuum: return p_ohat;
    }
    return 0.0;
  }

  /// Throws ValidationError unless mu > nu > 0 and the probabilities form a
  /// distribution (sum within 1e-12 of one).
  void validate() const;

  friend bool operator==(const SourceSetting&, const SourceSetting&) = default;
};

/// Detector, channel and protocol constants. Angles are in radians.
struct SystemParams {
  double eta_d = 0.70;      // detector efficiency
  double p_d = 1e-8;        // dark count probability per pulse
  double alpha = 0.165;     // fiber attenuation, dB/km
  double e_d_z = 0.0;       // Z-basis misalignment error rate
  double f = 1.1;           // error-correction efficiency
  double N = 1e11;          // number of rounds
  double sigma = deg_to_rad(5.0);
  double delta = deg_to_rad(6.0);
  double eps = 1.5e-10;     // per-use failure probability

  void validate() const;
};

/// Fiber lengths from each user to the relay.
struct LinkGeometry {
  double l_a = 0.0;
  double l_b = 0.0;

  double eta_a(const SystemParams& p) const;
  double eta_b(const SystemParams& p) const;
  double total_km() const { return l_a + l_b; }
  void validate() const;
};

/// Detector and fiber constants of the reference network, with sigma/delta/N left at the defaults.
SystemParams reference_system();

}  // namespace tfqkd
