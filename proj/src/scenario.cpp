#include "tfqkd/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

namespace tfqkd {

namespace {

using nlohmann::json;

// Reads fields of one JSON object and rejects any that were never asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail("expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) fail("missing field '" + key + "'");
    return j_.at(key);
  }

  double number(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number()) fail("field '" + key + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail("field '" + key + "' must be finite");
    return d;
  }
  double number(const std::string& key, double fallback) {
    return has(key) ? number(key) : (seen_.insert(key), fallback);
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return seen_.insert(key), fallback;
    const double d = number(key);
    if (d < 0.0 || d != std::floor(d) || d > 1.8e19) fail("field '" + key + "' must be a non-negative integer");
    return static_cast<std::uint64_t>(d);
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return seen_.insert(key), fallback;
    const json& v = raw(key);
    if (!v.is_boolean()) fail("field '" + key + "' must be true or false");
    return v.get<bool>();
  }

  std::string text(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_string()) fail("field '" + key + "' must be a string");
    return v.get<std::string>();
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) fail("unknown field '" + key + "'");
    }
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ValidationError(where_ + ": " + msg); }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

SourceSetting parse_source(const json& j, const std::string& where) {
  ObjectReader r(j, where);
  SourceSetting s;
  s.mu = r.number("mu");
  s.nu = r.number("nu");
  s.p_mu = r.number("p_mu");
  s.p_nu = r.number("p_nu");
  s.p_ohat = r.number("p_ohat");
  // p_o is the slack probability and may be omitted.
  s.p_o = r.number("p_o", 1.0 - s.p_mu - s.p_nu - s.p_ohat);
  r.finish();
  try {
    s.validate();
  } catch (const ValidationError& e) {
    r.fail(e.what());
  }
  return s;
}

SystemParams parse_system(const json& j) {
  ObjectReader r(j, "system");
  SystemParams p;
  p.eta_d = r.number("eta_d", p.eta_d);
  p.p_d = r.number("dark_count_prob", p.p_d);
  p.alpha = r.number("alpha_db_per_km", p.alpha);
  p.e_d_z = r.number("e_d_z", p.e_d_z);
  p.f = r.number("f_ec", p.f);
  p.N = r.number("n_rounds", p.N);
  p.sigma = deg_to_rad(r.number("sigma_deg", rad_to_deg(p.sigma)));
  p.delta = deg_to_rad(r.number("delta_deg", rad_to_deg(p.delta)));
  p.eps = r.number("eps", p.eps);
  r.finish();
  p.validate();
  return p;
}

OptimizerOptions parse_optimizer(const json& j) {
  ObjectReader r(j, "optimizer");
  OptimizerOptions o;
  o.starts = static_cast<int>(r.count("starts", static_cast<std::uint64_t>(o.starts)));
  o.seed = r.count("seed", o.seed);
  o.rel_tol = r.number("rel_tol", o.rel_tol);
  o.max_iterations = static_cast<int>(r.count("max_iterations", static_cast<std::uint64_t>(o.max_iterations)));
  o.delta_min_deg = r.number("delta_min_deg", o.delta_min_deg);
  o.delta_max_deg = r.number("delta_max_deg", o.delta_max_deg);
  r.finish();
  if (o.starts < 1) r.fail("starts must be >= 1");
  if (!(o.rel_tol > 0.0)) r.fail("rel_tol must be > 0");
  if (!(o.delta_min_deg > 0.0 && o.delta_min_deg < o.delta_max_deg && o.delta_max_deg <= 90.0)) {
    r.fail("need 0 < delta_min_deg < delta_max_deg <= 90");
  }
  return o;
}

ScanBlock parse_scan(const json& j) {
  ObjectReader r(j, "scan");
  ScanBlock s;
  const std::string channel = r.text("channel");
  if (channel == "symmetric") {
    s.channel.symmetric = true;
  } else if (channel == "asymmetric") {
    s.channel.symmetric = false;
    s.channel.offset_km = r.number("offset_km");
    if (!(s.channel.offset_km >= 0.0)) r.fail("offset_km must be >= 0");
  } else {
    r.fail("channel must be 'symmetric' or 'asymmetric'");
  }
  if (r.has("grid_km")) {
    const json& g = r.raw("grid_km");
    if (!g.is_array() || g.empty()) r.fail("grid_km must be a non-empty array");
    for (const auto& v : g) {
      if (!v.is_number()) r.fail("grid_km entries must be numbers");
      s.grid_km.push_back(v.get<double>());
    }
  } else {
    const double start = r.number("start_km"), stop = r.number("stop_km"), step = r.number("step_km");
    if (!(step > 0.0 && stop >= start)) r.fail("need step_km > 0 and stop_km >= start_km");
    const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
    for (long i = 0; i <= n; ++i) s.grid_km.push_back(start + step * static_cast<double>(i));
  }
  r.finish();
  for (double d : s.grid_km) {
    if (!(d >= s.channel.offset_km)) r.fail("grid distances must be >= the channel offset");
  }
  return s;
}

MonteCarloBlock parse_montecarlo(const json& j) {
  ObjectReader r(j, "montecarlo");
  MonteCarloBlock m;
  m.n_rounds = r.count("n_rounds", m.n_rounds);
  m.seed = r.count("seed", m.seed);
  m.sub_slices = static_cast<int>(r.count("sub_slices", static_cast<std::uint64_t>(m.sub_slices)));
  r.finish();
  if (m.n_rounds < 1) r.fail("n_rounds must be >= 1");
  if (m.sub_slices < 1) r.fail("sub_slices must be >= 1");
  return m;
}

SnsBlock parse_sns(const json& j) {
  ObjectReader r(j, "sns");
  SnsBlock s;
  s.source.mu_a = r.number("mu_a");
  s.source.mu_b = r.number("mu_b");
  s.source.nu_a = r.number("nu_a");
  s.source.nu_b = r.number("nu_b");
  s.source.t_a = r.number("t_a");
  s.source.t_b = r.number("t_b");
  s.e1x = r.number("e1x");
  if (r.has("y10")) s.y10 = r.number("y10");
  if (r.has("y01")) s.y01 = r.number("y01");
  s.distance_a_km = r.number("distance_a_km", 0.0);
  s.distance_b_km = r.number("distance_b_km", 0.0);
  r.finish();
  try {
    s.source.validate();
  } catch (const ValidationError& e) {
    r.fail(e.what());
  }
  if (!(s.e1x >= 0.0 && s.e1x <= 0.5)) r.fail("e1x must lie in [0, 0.5]");
  return s;
}

json source_json(const SourceSetting& s) {
  return {{"mu", round12(s.mu)},     {"nu", round12(s.nu)},       {"p_mu", round12(s.p_mu)},
          {"p_nu", round12(s.p_nu)}, {"p_o", round12(s.p_o)},     {"p_ohat", round12(s.p_ohat)}};
}

const char* role_name(RoleRule r) {
  switch (r) {
    case RoleRule::network: return "network";
    case RoleRule::first_listed: return "first";
    case RoleRule::best: return "best";
  }
  return "?";
}

}  // namespace

double round12(double x) {
  if (!std::isfinite(x) || x == 0.0) return x;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return std::strtod(buf, nullptr);
}

std::string format12(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

NetworkScenario ScenarioDocument::network() const { return {nodes, anchors, params}; }

ScenarioDocument parse_scenario(const json& j) {
  ObjectReader r(j, "config");
  ScenarioDocument doc;
  doc.schema_version = static_cast<int>(r.count("schema_version", kSchemaVersion));
  if (doc.schema_version != kSchemaVersion) r.fail("unsupported schema_version");
  if (r.has("system")) doc.params = parse_system(r.raw("system"));
  if (r.has("nodes")) {
    const json& nodes = r.raw("nodes");
    if (!nodes.is_array()) r.fail("nodes must be an array");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const std::string where = "nodes[" + std::to_string(i) + "]";
      ObjectReader nr(nodes[i], where);
      NetworkNode n;
      n.name = nr.text("name");
      n.distance_km = nr.number("distance_km");
      n.source = parse_source(nr.raw("source"), where + ".source");
      nr.finish();
      doc.nodes.push_back(n);
    }
  }
  if (r.has("anchors")) {
    const json& anchors = r.raw("anchors");
    if (!anchors.is_array()) r.fail("anchors must be an array of node-name pairs");
    for (const auto& a : anchors) {
      if (!a.is_array() || a.size() != 2 || !a[0].is_string() || !a[1].is_string()) {
        r.fail("each anchor must be a pair of node names");
      }
      doc.anchors.emplace_back(a[0].get<std::string>(), a[1].get<std::string>());
    }
  }
  doc.optimize_anchors = r.boolean("optimize_anchors", false);
  if (r.has("optimizer")) doc.optimizer = parse_optimizer(r.raw("optimizer"));
  if (r.has("keyrate")) {
    ObjectReader kr(r.raw("keyrate"), "keyrate");
    doc.keyrate.optimize_delta = kr.boolean("optimize_delta", true);
    if (kr.has("alice")) {
      const std::string rule = kr.text("alice");
      if (rule == "network") {
        doc.keyrate.alice = RoleRule::network;
      } else if (rule == "first") {
        doc.keyrate.alice = RoleRule::first_listed;
      } else if (rule == "best") {
        doc.keyrate.alice = RoleRule::best;
      } else {
        kr.fail("alice must be 'network', 'first' or 'best'");
      }
    }
    kr.finish();
  }
  if (r.has("scan")) doc.scan = parse_scan(r.raw("scan"));
  if (r.has("montecarlo")) doc.montecarlo = parse_montecarlo(r.raw("montecarlo"));
  if (r.has("sns")) doc.sns = parse_sns(r.raw("sns"));
  r.finish();
  doc.network().validate();
  return doc;
}

ScenarioDocument load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_scenario(j);
}

json to_json(const SourceSetting& s) { return source_json(s); }

json to_json(const ScenarioDocument& doc) {
  const SystemParams& p = doc.params;
  json j;
  j["schema_version"] = doc.schema_version;
  j["system"] = {{"eta_d", round12(p.eta_d)},
                 {"dark_count_prob", round12(p.p_d)},
                 {"alpha_db_per_km", round12(p.alpha)},
                 {"e_d_z", round12(p.e_d_z)},
                 {"f_ec", round12(p.f)},
                 {"n_rounds", round12(p.N)},
                 {"sigma_deg", round12(rad_to_deg(p.sigma))},
                 {"delta_deg", round12(rad_to_deg(p.delta))},
                 {"eps", round12(p.eps)}};
  j["nodes"] = json::array();
  for (const auto& n : doc.nodes) {
    j["nodes"].push_back(
        {{"name", n.name}, {"distance_km", round12(n.distance_km)}, {"source", source_json(n.source)}});
  }
  j["anchors"] = json::array();
  for (const auto& [x, y] : doc.anchors) j["anchors"].push_back({x, y});
  j["optimize_anchors"] = doc.optimize_anchors;
  const OptimizerOptions& o = doc.optimizer;
  j["optimizer"] = {{"starts", o.starts},
                    {"seed", o.seed},
                    {"rel_tol", round12(o.rel_tol)},
                    {"max_iterations", o.max_iterations},
                    {"delta_min_deg", round12(o.delta_min_deg)},
                    {"delta_max_deg", round12(o.delta_max_deg)}};
  j["keyrate"] = {{"optimize_delta", doc.keyrate.optimize_delta},
                  {"alice", role_name(doc.keyrate.alice)}};
  if (doc.scan) {
    json s;
    s["channel"] = doc.scan->channel.symmetric ? "symmetric" : "asymmetric";
    if (!doc.scan->channel.symmetric) s["offset_km"] = round12(doc.scan->channel.offset_km);
    s["grid_km"] = json::array();
    for (double d : doc.scan->grid_km) s["grid_km"].push_back(round12(d));
    j["scan"] = s;
  }
  j["montecarlo"] = {{"n_rounds", doc.montecarlo.n_rounds},
                     {"seed", doc.montecarlo.seed},
                     {"sub_slices", doc.montecarlo.sub_slices}};
  if (doc.sns) {
    const SnsBlock& s = *doc.sns;
    json b = {{"mu_a", round12(s.source.mu_a)}, {"mu_b", round12(s.source.mu_b)},
              {"nu_a", round12(s.source.nu_a)}, {"nu_b", round12(s.source.nu_b)},
              {"t_a", round12(s.source.t_a)},   {"t_b", round12(s.source.t_b)},
              {"e1x", round12(s.e1x)},          {"distance_a_km", round12(s.distance_a_km)},
              {"distance_b_km", round12(s.distance_b_km)}};
    if (s.y10) b["y10"] = round12(*s.y10);
    if (s.y01) b["y01"] = round12(*s.y01);
    j["sns"] = b;
  }
  return j;
}

}  // namespace tfqkd
