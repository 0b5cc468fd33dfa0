#include "doctest.h"

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"
#include "tfqkd/diagnostics.hpp"
#include "tfqkd/scenario.hpp"

using namespace tfqkd;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("tfkeyrate_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path p = scratch() / name;
  std::ofstream(p) << text;
  return p;
}

fs::path write_config(const std::string& name, const json& j) { return write_config(name, j.dump(2)); }

int run(const std::string& args) {
  const std::string cmd = std::string(TFKEYRATE_BIN) + " " + args + " 2>/dev/null >/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json two_node(const std::string& x, double lx, const std::string& y, double ly) {
  const auto& doc = testing::network_sigma5();
  json j = json::parse(slurp(testing::config_path("network_sigma5.json")));
  json nodes = json::array();
  for (const auto& n : j["nodes"])
    if (n["name"] == x || n["name"] == y) nodes.push_back(n);
  for (auto& n : nodes) n["distance_km"] = n["name"] == x ? lx : ly;
  j["nodes"] = nodes;
  j.erase("anchors");
  (void)doc;
  return j;
}

}  // namespace

TEST_CASE("scenario defaults and unit conversion") {
  const auto doc = parse_scenario(json::parse(R"({
    "system": {"sigma_deg": 18, "delta_deg": 4},
    "nodes": [{"name": "A", "distance_km": 10, "source": {"mu": 0.5, "nu": 0.1, "p_mu": 0.3, "p_nu": 0.3, "p_ohat": 0.1}},
              {"name": "B", "distance_km": 20, "source": {"mu": 0.5, "nu": 0.1, "p_mu": 0.3, "p_nu": 0.3, "p_o": 0.3, "p_ohat": 0.1}}]
  })"));
  CHECK(doc.schema_version == kSchemaVersion);
  CHECK(doc.params.sigma == doctest::Approx(deg_to_rad(18)));
  CHECK(doc.params.delta == doctest::Approx(deg_to_rad(4)));
  CHECK(doc.params.eta_d == 0.7);
  CHECK(doc.params.alpha == 0.165);
  CHECK(doc.params.N == 1e11);
  CHECK(doc.nodes[0].source.p_o == doctest::Approx(0.3));
  CHECK(doc.optimizer.starts == 16);
  CHECK(doc.montecarlo.seed == 1);

  const auto again = parse_scenario(to_json(doc));
  CHECK(to_json(again).dump() == to_json(doc).dump());
}

TEST_CASE("scenario validation") {
  const std::string good = slurp(testing::config_path("network_sigma5.json"));
  CHECK_NOTHROW(parse_scenario(json::parse(good)));
  auto broken = json::parse(good);
  broken["system"]["eta_dd"] = 0.7;
  CHECK_THROWS_AS(parse_scenario(broken), ValidationError);
  broken = json::parse(good);
  broken["nodes"][0]["source"]["p_mu"] = 0.9;
  CHECK_THROWS_AS(parse_scenario(broken), ValidationError);
  broken = json::parse(good);
  broken["nodes"][1]["name"] = "A";
  CHECK_THROWS_AS(parse_scenario(broken), ValidationError);
  broken = json::parse(good);
  broken["anchors"][0][1] = "Q";
  CHECK_THROWS_AS(parse_scenario(broken), ValidationError);
  broken = json::parse(good);
  broken["schema_version"] = 99;
  CHECK_THROWS_AS(parse_scenario(broken), ValidationError);
  broken = json::parse(good);
  broken["nodes"][0]["distance_km"] = -5;
  CHECK_THROWS_AS(parse_scenario(broken), ValidationError);
  CHECK_THROWS_AS(load_scenario((scratch() / "missing.json").string()), ValidationError);
}

TEST_CASE("stable number formatting") {
  CHECK(format12(8.63058123456789e-6) == "8.63058123457e-06");
  CHECK(round12(0.1 + 0.2) == 0.3);
}

TEST_CASE("keyrate on the reference A-C link") {
  const auto cfg = write_config("ac.json", two_node("A", 200, "C", 120));
  const auto out = scratch() / "ac.out.json";
  REQUIRE(run("keyrate --config " + cfg.string() + " --out " + out.string()) == 0);
  const json r = json::parse(slurp(out));
  CHECK(testing::rel_err(r["rate"].get<double>(), 8.631e-6) < 0.10);
  CHECK(r["alice"] == "C");
  CHECK(r["epsilon"]["chernoff_applications"] == 13);
  CHECK(r["epsilon"]["eps_tp"].get<double>() == doctest::Approx(3.6e-9));
  CHECK(r["bounds"].size() == 13);
  CHECK(r["config"]["nodes"].size() == 2);
  CHECK(r["config"]["system"].contains("delta_deg"));
  for (const char* k : {"vacuum", "single_photon", "error_correction", "correctness", "smoothing", "privacy_amplification"})
    CHECK(r["terms"].contains(k));

  const auto asym = scratch() / "ac.asym.json";
  REQUIRE(run("keyrate --asymptotic --config " + cfg.string() + " --out " + asym.string()) == 0);
  CHECK(json::parse(slurp(asym))["rate"].get<double>() > r["rate"].get<double>());
}

TEST_CASE("keyrate exit codes") {
  const auto bad = write_config("bad.json", std::string("{\"system\": {"));
  const auto out = scratch() / "bad.out.json";
  CHECK(run("keyrate --config " + bad.string() + " --out " + out.string()) == 2);
  CHECK_FALSE(fs::exists(out));

  json unknown = two_node("A", 200, "C", 120);
  unknown["colour"] = "blue";
  CHECK(run("keyrate --config " + write_config("unknown.json", unknown).string() + " --out " + out.string()) == 2);
  CHECK_FALSE(fs::exists(out));

  CHECK(run("keyrate --config " + testing::config_path("network_sigma5.json") + " --out " + out.string()) == 2);
  CHECK(run("keyrate") == 2);

  const auto far = write_config("far.json", two_node("A", 600, "C", 600));
  CHECK(run("keyrate --config " + far.string() + " --out " + out.string()) == 3);
  CHECK_FALSE(fs::exists(out));

  // Feasible decoy bounds but too few rounds for a positive key.
  json small = two_node("A", 50, "C", 50);
  small["system"]["n_rounds"] = 1e9;
  const auto zero_out = scratch() / "zero.out.json";
  CHECK(run("keyrate --config " + write_config("small.json", small).string() + " --out " + zero_out.string()) == 0);
  const json z = json::parse(slurp(zero_out));
  CHECK(z["rate"] == 0.0);
  CHECK(z["ell_unclamped"].get<double>() < 0.0);
}

TEST_CASE("scan writes the agreed CSV") {
  json j = two_node("A", 100, "B", 100);
  j["optimizer"] = {{"starts", 2}};
  j["scan"] = {{"channel", "symmetric"}, {"start_km", 100}, {"stop_km", 300}, {"step_km", 100}};
  const auto out = scratch() / "scan.csv";
  REQUIRE(run("scan --config " + write_config("scan.json", j).string() + " --out " + out.string()) == 0);
  std::istringstream in(slurp(out));
  std::string line;
  std::getline(in, line);
  CHECK(line == "total_km,rate_finite,rate_asymptotic,plob");
  int rows = 0;
  while (std::getline(in, line)) {
    double km, fin, asym, plob;
    char c;
    std::istringstream ls(line);
    ls >> km >> c >> fin >> c >> asym >> c >> plob;
    CHECK(km == 100.0 * (rows + 1));
    CHECK(plob == doctest::Approx(plob_bound(km, 0.7, 0.165)).epsilon(1e-11));
    CHECK(asym >= fin);
    ++rows;
  }
  CHECK(rows == 3);
  CHECK(fs::exists(scratch() / "scan.csv.config.json"));
}

TEST_CASE("network lists every pair and records the frozen settings") {
  const auto out = scratch() / "net.csv";
  REQUIRE(run("network --config " + testing::config_path("network_sigma5.json") + " --out " + out.string()) == 0);
  std::istringstream in(slurp(out));
  std::string line;
  std::getline(in, line);
  CHECK(line == "alice,bob,total_km,delta_deg,rate,plob,ratio,exceeds_plob");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 6);
  const json side = json::parse(slurp(scratch() / "net.csv.config.json"));
  CHECK(side["optimize_anchors"] == false);
  CHECK(side["nodes"].size() == 4);
}

TEST_CASE("montecarlo reports are byte-identical for a fixed seed") {
  json j = json::parse(slurp(testing::config_path("mc_toy.json")));
  j["montecarlo"]["n_rounds"] = 200000;
  const auto cfg = write_config("mc.json", j);
  const auto o1 = scratch() / "mc1.json", o2 = scratch() / "mc2.json", o3 = scratch() / "mc3.json";
  REQUIRE(run("montecarlo --config " + cfg.string() + " --out " + o1.string()) == 0);
  REQUIRE(run("montecarlo --threads 3 --config " + cfg.string() + " --out " + o2.string()) == 0);
  REQUIRE(run("montecarlo --seed 4 --config " + cfg.string() + " --out " + o3.string()) == 0);
  CHECK(slurp(o1) == slurp(o2));
  CHECK(slurp(o1) != slurp(o3));
  const json r = json::parse(slurp(o1));
  CHECK(r["metadata"]["montecarlo_seed"] == 3);
  CHECK(r["comparisons"].size() >= 20);
  for (const auto& c : r["comparisons"]) CHECK(c["flagged"] == (std::abs(c["z_score"].get<double>()) > 3.0));
}

TEST_CASE("sns-check on a balanced coin") {
  json j = json::parse(slurp(testing::config_path("mc_toy.json")));
  j.erase("montecarlo");
  const double nu_b = 0.05, mu = 0.3, t = 0.2;
  j["sns"] = {{"mu_a", mu}, {"mu_b", mu}, {"nu_a", nu_b}, {"nu_b", nu_b}, {"t_a", t}, {"t_b", t},
              {"e1x", 0.03}, {"distance_a_km", 100}, {"distance_b_km", 100}};
  const auto out = scratch() / "sns.json";
  REQUIRE(run("sns-check --config " + write_config("sns.json", j).string() + " --out " + out.string()) == 0);
  const json r = json::parse(slurp(out));
  CHECK(r["residual"] == 0.0);
  CHECK(r["delta"].get<double>() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r["usable"] == true);
  CHECK(r["phase_error_bound"].get<double>() == doctest::Approx(0.03).epsilon(1e-9));

  j["sns"]["nu_a"] = nu_b * 1.03;
  REQUIRE(run("sns-check --config " + write_config("sns2.json", j).string() + " --out " + out.string()) == 0);
  const json r2 = json::parse(slurp(out));
  CHECK(r2["residual"].get<double>() != 0.0);
  CHECK(r2["delta"].get<double>() > 0.0);

  j.erase("sns");
  CHECK(run("sns-check --config " + write_config("sns3.json", j).string() + " --out " + out.string()) == 2);
}
