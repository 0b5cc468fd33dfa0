#pragma once

#include <cmath>
#include <random>
#include <string>

#include "tfqkd/scenario.hpp"
#include "tfqkd/types.hpp"

namespace testing {

inline std::string config_path(const std::string& name) {
  return std::string(TFQKD_CONFIG_DIR) + "/" + name;
}

inline const tfqkd::ScenarioDocument& network_sigma5() {
  static const auto doc = tfqkd::load_scenario(config_path("network_sigma5.json"));
  return doc;
}

inline const tfqkd::ScenarioDocument& network_sigma18() {
  static const auto doc = tfqkd::load_scenario(config_path("network_sigma18.json"));
  return doc;
}

inline const tfqkd::NetworkNode& node(const tfqkd::ScenarioDocument& doc, const std::string& name) {
  for (const auto& n : doc.nodes)
    if (n.name == name) return n;
  throw std::out_of_range(name);
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::abs(b); }

// A random valid source: mu > nu > 0, probabilities summing to one.
inline tfqkd::SourceSetting random_source(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  tfqkd::SourceSetting s;
  s.mu = 0.05 + 0.9 * u(rng);
  s.nu = s.mu * (0.02 + 0.6 * u(rng));
  double w[4];
  double sum = 0.0;
  for (double& x : w) sum += (x = 0.02 + u(rng));
  s.p_mu = w[0] / sum;
  s.p_nu = w[1] / sum;
  s.p_ohat = w[3] / sum;
  s.p_o = 1.0 - s.p_mu - s.p_nu - s.p_ohat;
  return s;
}

}  // namespace testing
