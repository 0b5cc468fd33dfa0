#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tfqkd/keyrate.hpp"
#include "tfqkd/types.hpp"

namespace tfqkd {

/// Rate of one configuration; zero when the decoy analysis fails or the
/// inputs are invalid.
double link_rate(const SourceSetting& a, const SourceSetting& b, const LinkGeometry& geom,
                 const SystemParams& params, KeyMode mode = KeyMode::finite);

struct FreeVariables {
  bool source_a = false;
  bool source_b = false;
  bool delta = true;
};

struct OptimizerOptions {
  int starts = 16;
  std::uint64_t seed = 1;
  double rel_tol = 1e-4;
  int max_iterations = 600;
  unsigned threads = 1;
  KeyMode mode = KeyMode::finite;
  double delta_min_deg = 0.5;
  double delta_max_deg = 30.0;
};

struct LinkOptimum {
  SourceSetting a;
  SourceSetting b;
  double delta = 0.0;  // radians
  double rate = 0.0;
  bool feasible = false;
  int evaluations = 0;
};

/// Best delta for fixed sources: coarse grid, then golden-section refinement.
LinkOptimum optimize_delta(const SourceSetting& a, const SourceSetting& b,
                           const LinkGeometry& geom, const SystemParams& params,
                           const OptimizerOptions& opt = {});

/// Multi-start downhill simplex over the free variables. The first start is
/// the supplied point, so the result never falls below its rate.
LinkOptimum optimize_link(const SourceSetting& a, const SourceSetting& b,
                          const LinkGeometry& geom, const SystemParams& params,
                          const FreeVariables& free, const OptimizerOptions& opt = {});

struct NetworkNode {
  std::string name;
  double distance_km = 0.0;
  SourceSetting source;
};

struct NetworkScenario {
  std::vector<NetworkNode> nodes;
  std::vector<std::pair<std::string, std::string>> anchors;
  SystemParams params;

  const NetworkNode& node(const std::string& name) const;
  void validate() const;
};

struct NetworkLink {
  std::string alice;  // the side whose detection pools drive the matching
  std::string bob;
  double total_km = 0.0;
  double delta = 0.0;
  double rate = 0.0;
  double plob = 0.0;
  double ratio = 0.0;  // rate / plob
  bool exceeds_plob = false;
};

/// Optimizes each anchor link over the sources of nodes not yet frozen, then
/// freezes them. Returns the scenario with the optimized settings.
NetworkScenario optimize_anchors(const NetworkScenario& scn, const OptimizerOptions& opt = {});

/// True when x takes the Alice (matching) role against y: the node nearer the
/// relay does; at equal distance the lexicographically larger source setting
/// (mu, nu, p_mu, ...) does, so the choice never depends on node names.
bool takes_alice_role(const NetworkNode& x, const NetworkNode& y);

/// Frozen settings, role by takes_alice_role, delta optimized.
NetworkLink evaluate_pair(const NetworkNode& x, const NetworkNode& y, const SystemParams& params,
                          const OptimizerOptions& opt = {});

/// Every unordered node pair, in node-list order, with frozen settings.
std::vector<NetworkLink> evaluate_network(const NetworkScenario& scn,
                                          const OptimizerOptions& opt = {});

struct ChannelShape {
  bool symmetric = true;
  double offset_km = 0.0;  // l_b - l_a when not symmetric

  LinkGeometry at_total(double total_km) const;
};

struct ScanRow {
  double total_km = 0.0;
  LinkGeometry geom;
  double rate_finite = 0.0;
  double rate_asymptotic = 0.0;
  double plob = 0.0;
  LinkOptimum finite;
  LinkOptimum asymptotic;
};

/// Optimized rates along a distance grid, each point warm-started from the
/// previous one.
std::vector<ScanRow> distance_scan(const SourceSetting& a, const SourceSetting& b,
                                   const SystemParams& params, const ChannelShape& channel,
                                   const std::vector<double>& grid_km,
                                   const OptimizerOptions& opt = {});

}  // namespace tfqkd
