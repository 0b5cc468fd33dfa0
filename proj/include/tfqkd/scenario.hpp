#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tfqkd/diagnostics.hpp"
#include "tfqkd/planner.hpp"
#include "tfqkd/types.hpp"

namespace tfqkd {

inline constexpr int kSchemaVersion = 1;

// Who takes the Alice (matching) role in single-link commands.
enum class RoleRule { network, first_listed, best };

struct KeyrateBlock {
  bool optimize_delta = true;
  RoleRule alice = RoleRule::network;
};

struct ScanBlock {
  ChannelShape channel;
  std::vector<double> grid_km;
};

struct MonteCarloBlock {
  std::uint64_t n_rounds = 10'000'000;
  std::uint64_t seed = 1;
  int sub_slices = 16;
};

struct SnsBlock {
  SnsSourceSetting source;
  double e1x = 0.0;
  std::optional<double> y10, y01;  // taken from the node distances when absent
  double distance_a_km = 0.0, distance_b_km = 0.0;
};

/// A parsed, validated configuration with every default filled in.
/// Angles are stored in radians; the JSON form uses degrees.
struct ScenarioDocument {
  int schema_version = kSchemaVersion;
  SystemParams params;
  std::vector<NetworkNode> nodes;
  std::vector<std::pair<std::string, std::string>> anchors;
  bool optimize_anchors = false;
  OptimizerOptions optimizer;
  KeyrateBlock keyrate;
  std::optional<ScanBlock> scan;
  MonteCarloBlock montecarlo;
  std::optional<SnsBlock> sns;

  NetworkScenario network() const;
};

/// Throws ValidationError on malformed input, unknown fields or values
/// outside their domain.
ScenarioDocument parse_scenario(const nlohmann::json& j);
ScenarioDocument load_scenario(const std::string& path);

nlohmann::json to_json(const ScenarioDocument& doc);
nlohmann::json to_json(const SourceSetting& s);

/// Rounds to 12 significant digits so outputs are stable across platforms.
double round12(double x);
std::string format12(double x);

}  // namespace tfqkd
