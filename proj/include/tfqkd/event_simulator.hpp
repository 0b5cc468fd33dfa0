#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "tfqkd/channel_model.hpp"
#include "tfqkd/keyrate.hpp"
#include "tfqkd/types.hpp"

namespace tfqkd {

/// Counter-based generator: the i-th output of a stream is a hash of
/// (key, i), so any block of rounds can be regenerated independently.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) : key_(key) {}
  static CounterRng for_block(std::uint64_t seed, std::uint64_t block);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()();

  double uniform();  // [0, 1)
  unsigned poisson(double mean);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

enum class ClickOutcome : std::uint8_t { none, left, right, both };

struct RoundRecord {
  Intensity k_a = Intensity::vacuum;
  Intensity k_b = Intensity::vacuum;
  double theta_a = 0.0, theta_b = 0.0, phi_ab = 0.0;
  double theta = 0.0;      // announced global phase difference, in [0, 2 pi)
  double theta_eff = 0.0;  // phase seen by the interferometer, misalignment included
  bool r_a = false, r_b = false;
  unsigned n_a = 0, n_b = 0;  // emitted photons; only drawn for single clicks
  ClickOutcome outcome = ClickOutcome::none;
};

/// Draws one round. Phase misalignment is a cyclic shift of the deviation
/// from the nearest slice centre: |d| -> |d| + sigma, wrapped on [0, pi/2].
RoundRecord simulate_round(CounterRng& rng, const SourceSetting& a, const SourceSetting& b,
                           const Transmittance& t, const SystemParams& params);

struct ZEvent {
  std::uint64_t round;
  Intensity k_a, k_b;
  std::uint8_t photons;  // emitted in this bin, saturated at 255
  bool left;
};

struct XEvent {
  std::uint64_t round;
  double deviation;  // announced phase minus slice centre, in [-pi/2, pi/2]
  bool centre_pi;
  bool r_a, r_b;
  bool left;
  std::uint8_t photons;
};

struct MonteCarloOptions {
  std::uint64_t n_rounds = 1'000'000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  int sub_slices = 16;  // per half-window; matching bins are 2K signed sub-slices
};

struct MonteCarloTally {
  std::uint64_t n_rounds = 0;
  std::uint64_t seed = 0;
  double x_window = 0.0;  // X events kept for |deviation| <= x_window
  Eigen::Matrix<std::int64_t, 4, 4> sent = Eigen::Matrix<std::int64_t, 4, 4>::Zero();
  Eigen::Matrix<std::int64_t, 4, 4> clicks = Eigen::Matrix<std::int64_t, 4, 4>::Zero();
  std::int64_t double_clicks = 0;
  std::vector<ZEvent> z_events;  // unannounced vacuum or signal on both sides
  std::vector<XEvent> x_events;  // decoy on both sides, inside the window

  /// Associative merge; event lists stay sorted by round.
  void merge(const MonteCarloTally& other);
};

MonteCarloTally simulate_rounds(const SourceSetting& a, const SourceSetting& b,
                                const LinkGeometry& geom, const SystemParams& params,
                                const MonteCarloOptions& opt);

struct ZMatch {
  std::int64_t n_z = 0, m_z = 0;
  std::int64_t n_C = 0, n_E = 0;
  std::int64_t discarded = 0;        // pairs with equal Bob intensities
  std::int64_t tagged_single = 0;    // correct-type pairs with one photon in each signal bin
  std::int64_t tagged_single_errors = 0;
};

/// Pairs the k-th signal-row event with the k-th vacuum-row event of Alice.
ZMatch post_match_z(const MonteCarloTally& tally, const SystemParams& params);

struct XMatch {
  std::int64_t retained = 0;
  std::int64_t n_x = 0, m_x = 0;
  std::int64_t unmatched = 0;
  std::int64_t tagged_pairs = 0;   // one photon per bin
  std::int64_t tagged_errors = 0;
  double tagged_effective = 0.0;   // posterior-weighted effective single-photon pairs
};

XMatch post_match_x(const MonteCarloTally& tally, const SourceSetting& a,
                    const SourceSetting& b, const LinkGeometry& geom,
                    const SystemParams& params, int sub_slices = 16);

/// Tally counts in the layout the key-rate pipeline consumes, with N = n_rounds.
ObservedCounts tally_counts(const MonteCarloTally& tally, const ZMatch& z, const XMatch& x,
                            const SourceSetting& a, const SourceSetting& b);

struct Comparison {
  std::string quantity;
  double simulated = 0.0;
  double analytic = 0.0;
  double std_error = 0.0;
  double z_score = 0.0;
};

/// Every per-pair gain and the Z/X totals against the channel model.
std::vector<Comparison> compare_with_analytics(const MonteCarloTally& tally, const ZMatch& z,
                                               const XMatch& x, const SourceSetting& a,
                                               const SourceSetting& b, const LinkGeometry& geom,
                                               const SystemParams& params);

struct SoundnessCheck {
  std::string quantity;
  double bound = 0.0;
  double truth = 0.0;
  bool lower = true;  // bound should be <= truth (else >=)
  bool holds() const { return lower ? bound <= truth : bound >= truth; }
};

struct SoundnessReport {
  bool feasible = true;  // false when the decoy bounds certify nothing
  std::vector<SoundnessCheck> checks;
};

/// Decoy bounds from the tally against the tagged truths.
SoundnessReport check_soundness(const MonteCarloTally& tally, const ZMatch& z, const XMatch& x,
                                const SourceSetting& a, const SourceSetting& b,
                                const LinkGeometry& geom, const SystemParams& params);

nlohmann::json to_json(const MonteCarloTally& tally, const ZMatch& z, const XMatch& x);

}  // namespace tfqkd
