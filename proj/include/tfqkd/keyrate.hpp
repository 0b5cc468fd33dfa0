#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tfqkd/channel_model.hpp"
#include "tfqkd/finite_stats.hpp"
#include "tfqkd/types.hpp"

namespace tfqkd {

enum class KeyMode { finite, asymptotic };

/// Raised when the decoy-state bounds cannot certify any single-photon
/// contribution (vacuum and dark counts dominate the decoy statistics).
class InfeasibleDecoyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BoundKind { expected_lower, expected_upper, observed_lower, observed_upper };

struct BoundRecord {
  std::string quantity;
  BoundKind kind;
  double input = 0.0;
  double output = 0.0;
};

/// Applies the concentration bounds of one evaluation and keeps an audit
/// trail. Each distinct quantity name is charged once; asking again for the
/// same name returns the recorded value. In asymptotic mode every bound is
/// the identity and nothing is charged.
class BoundLedger {
 public:
  BoundLedger(double eps, KeyMode mode) : eps_(eps), mode_(mode) {}

  double expected_lower(std::string_view quantity, double observed);
  double expected_upper(std::string_view quantity, double observed);
  double observed_lower(std::string_view quantity, double expected);
  double observed_upper(std::string_view quantity, double expected);

  KeyMode mode() const { return mode_; }
  double eps() const { return eps_; }
  int applications() const { return static_cast<int>(records_.size()); }
  const std::vector<BoundRecord>& records() const { return records_; }

 private:
  double apply(std::string_view quantity, BoundKind kind, double value);

  double eps_;
  KeyMode mode_;
  std::vector<BoundRecord> records_;
};

struct SinglesYields {
  double y01_lower = 0.0;  // Bob single photon, Alice vacuum
  double y10_lower = 0.0;  // Alice single photon, Bob vacuum
};

struct ErrorEstimate {
  double t11_x_upper = 0.0;
  double e11_x_upper = 0.5;
};

struct DecoyEstimates {
  double y01_lower = 0.0;
  double y10_lower = 0.0;
  double s0mub_z_lower = 0.0;
  double s11_z_lower = 0.0;
  double s11_x_lower = 0.0;
  double t11_x_upper = 0.0;
  double e11_x_upper = 0.5;
  double phi11_z_upper = 0.5;
};

struct KeyRateResult {
  double ell = 0.0;            // clamped at 0
  double ell_unclamped = 0.0;
  double rate = 0.0;           // ell / N
  double vacuum_term = 0.0;          // s_0mub
  double single_photon_term = 0.0;   // s_11 [1 - H2(phi)]
  double error_correction_term = 0.0;  // n_z f H2(E_z)
  double correctness_penalty = 0.0;    // log2(2 / eps_cor)
  double smoothing_penalty = 0.0;      // 2 log2(2 / (eps' eps_hat))
  double privacy_amplification_penalty = 0.0;  // 2 log2(1 / (2 eps_PA))
  KeyMode mode = KeyMode::finite;
  DecoyEstimates estimates;
  EpsilonBudget budget;
};

SinglesYields estimate_singles_yields(const ObservedCounts& counts, const SourceSetting& a,
                                      const SourceSetting& b, const SystemParams& params,
                                      BoundLedger& ledger);

/// Observed lower bound on effective single-photon pairs in the Z basis.
double estimate_s11_z(const ObservedCounts& counts, const SourceSetting& a,
                      const SourceSetting& b, const SystemParams& params,
                      const SinglesYields& yields, BoundLedger& ledger);

/// Observed lower bound on Z pairs in which Alice sent no photon.
double estimate_s0mub_z(const ObservedCounts& counts, const SourceSetting& a,
                        const SourceSetting& b, const SystemParams& params,
                        BoundLedger& ledger);

double estimate_s11_x(const SourceSetting& a, const SourceSetting& b,
                      const LinkGeometry& geom, const SystemParams& params,
                      const SinglesYields& yields, BoundLedger& ledger);

ErrorEstimate estimate_e11_x(const ObservedCounts& counts, const SourceSetting& a,
                             const SourceSetting& b, const LinkGeometry& geom,
                             const SystemParams& params, double s11_x_lower,
                             BoundLedger& ledger);

/// phi = e11 + gamma^U(s11_z, s11_x, e11, eps), clamped to 0.5. Asymptotic
/// mode returns e11.
double estimate_phi11_z(const DecoyEstimates& dec, const SystemParams& params, KeyMode mode);

/// Runs every estimation step in order.
DecoyEstimates estimate_decoy(const ObservedCounts& counts, const SourceSetting& a,
                              const SourceSetting& b, const LinkGeometry& geom,
                              const SystemParams& params, BoundLedger& ledger);

KeyRateResult key_length(const ObservedCounts& counts, const DecoyEstimates& dec,
                         const EpsilonBudget& budget, const SystemParams& params);

/// [s_0mub + s_11 (1 - H2(e11)) - n_z f H2(E_z)] / N, no composition penalties.
double asymptotic_rate(const ObservedCounts& counts, const DecoyEstimates& dec,
                       const SystemParams& params);

struct LinkEvaluation {
  KeyRateResult result;
  ObservedCounts counts;
  std::vector<BoundRecord> bounds;
};

/// Channel model -> decoy estimation -> key length, with Alice = a.
LinkEvaluation evaluate_link(const SourceSetting& a, const SourceSetting& b,
                             const LinkGeometry& geom, const SystemParams& params,
                             KeyMode mode = KeyMode::finite);

/// Same, from externally supplied counts (e.g. Monte Carlo tallies).
LinkEvaluation evaluate_counts(const ObservedCounts& counts, const SourceSetting& a,
                               const SourceSetting& b, const LinkGeometry& geom,
                               const SystemParams& params, KeyMode mode = KeyMode::finite);

}  // namespace tfqkd
