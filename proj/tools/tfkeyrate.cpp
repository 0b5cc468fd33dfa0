#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "tfqkd/diagnostics.hpp"
#include "tfqkd/event_simulator.hpp"
#include "tfqkd/keyrate.hpp"
#include "tfqkd/planner.hpp"
#include "tfqkd/scenario.hpp"

using nlohmann::json;
using namespace tfqkd;

namespace {

constexpr const char* kVersion = "0.1.0";

enum ExitCode { kOk = 0, kValidation = 2, kInfeasible = 3 };

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  bool asymptotic = false;
};

unsigned resolve_threads(unsigned flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("TFKEYRATE_THREADS")) {
    try {
      const long n = std::stol(env);
      if (n > 0) return static_cast<unsigned>(n);
    } catch (const std::exception&) {
    }
    throw ValidationError("TFKEYRATE_THREADS must be a positive integer");
  }
  return 1;
}

json num(double x) {
  if (!std::isfinite(x)) return nullptr;
  return round12(x);
}

json metadata(const std::string& command, const ScenarioDocument& doc) {
  return {{"tool", "tfkeyrate"},
          {"version", kVersion},
          {"command", command},
          {"optimizer_seed", doc.optimizer.seed},
          {"montecarlo_seed", doc.montecarlo.seed}};
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << text;
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void write_csv(const std::string& path, const std::string& csv, const json& config) {
  write_text(path, csv);
  if (!path.empty()) write_json(path + ".config.json", config);
}

ScenarioDocument load(const Flags& f) {
  ScenarioDocument doc = load_scenario(f.config);
  if (f.seed) {
    doc.optimizer.seed = *f.seed;
    doc.montecarlo.seed = *f.seed;
  }
  doc.optimizer.threads = resolve_threads(f.threads);
  doc.optimizer.mode = f.asymptotic ? KeyMode::asymptotic : KeyMode::finite;
  return doc;
}

void require_two_nodes(const ScenarioDocument& doc, const char* command) {
  if (doc.nodes.size() != 2) {
    throw ValidationError(std::string(command) + " needs exactly two nodes");
  }
}

json estimates_json(const DecoyEstimates& d) {
  return {{"y01_lower", num(d.y01_lower)},         {"y10_lower", num(d.y10_lower)},
          {"s0mub_z_lower", num(d.s0mub_z_lower)}, {"s11_z_lower", num(d.s11_z_lower)},
          {"s11_x_lower", num(d.s11_x_lower)},     {"t11_x_upper", num(d.t11_x_upper)},
          {"e11_x_upper", num(d.e11_x_upper)},     {"phi11_z_upper", num(d.phi11_z_upper)}};
}

json budget_json(const EpsilonBudget& b) {
  return {{"eps_cor", num(b.eps_cor)},
          {"eps_prime", num(b.eps_prime)},
          {"eps_hat", num(b.eps_hat)},
          {"eps_e", num(b.eps_e)},
          {"eps_beta", num(b.eps_beta)},
          {"eps_pa", num(b.eps_pa)},
          {"eps_0_plus_1", num(b.eps_0_plus_1)},
          {"chernoff_applications", b.chernoff_applications},
          {"eps_sec", num(b.eps_sec)},
          {"eps_tp", num(b.eps_tp)}};
}

const char* kind_name(BoundKind k) {
  switch (k) {
    case BoundKind::expected_lower: return "expected_lower";
    case BoundKind::expected_upper: return "expected_upper";
    case BoundKind::observed_lower: return "observed_lower";
    case BoundKind::observed_upper: return "observed_upper";
  }
  return "?";
}

int cmd_keyrate(const Flags& f) {
  const ScenarioDocument doc = load(f);
  require_two_nodes(doc, "keyrate");
  const KeyMode mode = doc.optimizer.mode;

  std::vector<std::pair<const NetworkNode*, const NetworkNode*>> roles{{&doc.nodes[0], &doc.nodes[1]}};
  if (doc.keyrate.alice == RoleRule::best) roles.emplace_back(&doc.nodes[1], &doc.nodes[0]);
  if (doc.keyrate.alice == RoleRule::network && !takes_alice_role(doc.nodes[0], doc.nodes[1])) {
    std::swap(roles.front().first, roles.front().second);
  }

  SystemParams params = doc.params;
  const NetworkNode* alice = roles.front().first;
  const NetworkNode* bob = roles.front().second;
  if (doc.keyrate.optimize_delta || roles.size() > 1) {
    double best = -1.0;
    for (const auto& [al, bo] : roles) {
      const LinkGeometry g{al->distance_km, bo->distance_km};
      LinkOptimum r;
      if (doc.keyrate.optimize_delta) {
        r = optimize_delta(al->source, bo->source, g, params, doc.optimizer);
      } else {
        r.delta = params.delta;
        r.rate = link_rate(al->source, bo->source, g, params, mode);
        r.feasible = r.rate > 0.0;
      }
      if (r.rate > best) {
        best = r.rate;
        alice = al;
        bob = bo;
        if (r.feasible) params.delta = r.delta;
      }
    }
  }
  const LinkGeometry geom{alice->distance_km, bob->distance_km};
  const LinkEvaluation ev = evaluate_link(alice->source, bob->source, geom, params, mode);
  const KeyRateResult& res = ev.result;

  ScenarioDocument resolved = doc;
  resolved.params.delta = params.delta;
  json out;
  out["metadata"] = metadata("keyrate", doc);
  out["config"] = to_json(resolved);
  out["alice"] = alice->name;
  out["bob"] = bob->name;
  out["total_km"] = num(geom.total_km());
  out["delta_deg"] = num(rad_to_deg(params.delta));
  out["mode"] = mode == KeyMode::finite ? "finite" : "asymptotic";
  out["rate"] = num(res.rate);
  out["ell"] = num(res.ell);
  out["ell_unclamped"] = num(res.ell_unclamped);
  out["terms"] = {{"vacuum", num(res.vacuum_term)},
                  {"single_photon", num(res.single_photon_term)},
                  {"error_correction", num(res.error_correction_term)},
                  {"correctness", num(res.correctness_penalty)},
                  {"smoothing", num(res.smoothing_penalty)},
                  {"privacy_amplification", num(res.privacy_amplification_penalty)}};
  out["estimates"] = estimates_json(res.estimates);
  out["epsilon"] = budget_json(res.budget);
  out["counts"] = {{"n_z", num(ev.counts.n_z)}, {"m_z", num(ev.counts.m_z)},
                   {"E_z", num(ev.counts.E_z)}, {"n_x", num(ev.counts.n_x)},
                   {"m_x", num(ev.counts.m_x)}};
  out["bounds"] = json::array();
  for (const auto& b : ev.bounds) {
    out["bounds"].push_back(
        {{"quantity", b.quantity}, {"kind", kind_name(b.kind)}, {"input", num(b.input)}, {"output", num(b.output)}});
  }
  out["plob"] = num(plob_bound(geom.total_km(), params.eta_d, params.alpha));
  write_json(f.out, out);
  return kOk;
}

int cmd_scan(const Flags& f) {
  const ScenarioDocument doc = load(f);
  require_two_nodes(doc, "scan");
  if (!doc.scan) throw ValidationError("scan needs a 'scan' block");
  const auto rows = distance_scan(doc.nodes[0].source, doc.nodes[1].source, doc.params,
                                  doc.scan->channel, doc.scan->grid_km, doc.optimizer);
  std::ostringstream csv;
  csv << "total_km,rate_finite,rate_asymptotic,plob\n";
  for (const auto& r : rows) {
    csv << format12(r.total_km) << ',' << format12(r.rate_finite) << ','
        << format12(r.rate_asymptotic) << ',' << format12(r.plob) << '\n';
  }
  json config = to_json(doc);
  config["metadata"] = metadata("scan", doc);
  write_csv(f.out, csv.str(), config);
  return kOk;
}

int cmd_network(const Flags& f) {
  ScenarioDocument doc = load(f);
  NetworkScenario scn = doc.network();
  if (doc.optimize_anchors) scn = optimize_anchors(scn, doc.optimizer);
  const auto links = evaluate_network(scn, doc.optimizer);
  std::ostringstream csv;
  csv << "alice,bob,total_km,delta_deg,rate,plob,ratio,exceeds_plob\n";
  for (const auto& l : links) {
    csv << l.alice << ',' << l.bob << ',' << format12(l.total_km) << ','
        << format12(rad_to_deg(l.delta)) << ',' << format12(l.rate) << ',' << format12(l.plob)
        << ',' << format12(l.ratio) << ',' << (l.exceeds_plob ? "true" : "false") << '\n';
  }
  // Frozen settings make the sidecar replayable without re-optimizing.
  doc.nodes = scn.nodes;
  doc.optimize_anchors = false;
  json config = to_json(doc);
  config["metadata"] = metadata("network", doc);
  write_csv(f.out, csv.str(), config);
  return kOk;
}

int cmd_montecarlo(const Flags& f) {
  const ScenarioDocument doc = load(f);
  require_two_nodes(doc, "montecarlo");
  const NetworkNode& a = doc.nodes[0];
  const NetworkNode& b = doc.nodes[1];
  const LinkGeometry geom{a.distance_km, b.distance_km};
  MonteCarloOptions opt;
  opt.n_rounds = doc.montecarlo.n_rounds;
  opt.seed = doc.montecarlo.seed;
  opt.threads = doc.optimizer.threads;
  opt.sub_slices = doc.montecarlo.sub_slices;

  const MonteCarloTally tally = simulate_rounds(a.source, b.source, geom, doc.params, opt);
  const ZMatch z = post_match_z(tally, doc.params);
  const XMatch x = post_match_x(tally, a.source, b.source, geom, doc.params, opt.sub_slices);
  const auto comparisons = compare_with_analytics(tally, z, x, a.source, b.source, geom, doc.params);
  const SoundnessReport sound = check_soundness(tally, z, x, a.source, b.source, geom, doc.params);

  json out;
  out["metadata"] = metadata("montecarlo", doc);
  out["config"] = to_json(doc);
  out["tally"] = to_json(tally, z, x);
  out["comparisons"] = json::array();
  bool flagged_any = false;
  for (const auto& c : comparisons) {
    const bool flagged = !(std::abs(c.z_score) <= 3.0);
    flagged_any = flagged_any || flagged;
    out["comparisons"].push_back({{"quantity", c.quantity},
                                  {"simulated", num(c.simulated)},
                                  {"analytic", num(c.analytic)},
                                  {"std_error", num(c.std_error)},
                                  {"z_score", num(c.z_score)},
                                  {"flagged", flagged}});
  }
  out["flagged"] = flagged_any;
  json s = {{"feasible", sound.feasible}, {"checks", json::array()}};
  for (const auto& c : sound.checks) {
    s["checks"].push_back({{"quantity", c.quantity},
                           {"bound", num(c.bound)},
                           {"truth", num(c.truth)},
                           {"direction", c.lower ? "lower" : "upper"},
                           {"holds", c.holds()}});
  }
  out["soundness"] = s;
  write_json(f.out, out);
  return kOk;
}

int cmd_sns_check(const Flags& f) {
  const ScenarioDocument doc = load(f);
  if (!doc.sns) throw ValidationError("sns-check needs an 'sns' block");
  const SnsBlock& sns = *doc.sns;
  const LinkGeometry geom{sns.distance_a_km, sns.distance_b_km};
  const double y10 = sns.y10.value_or(single_photon_yield(geom.eta_a(doc.params), doc.params.p_d));
  const double y01 = sns.y01.value_or(single_photon_yield(geom.eta_b(doc.params), doc.params.p_d));

  json out;
  out["metadata"] = metadata("sns-check", doc);
  out["config"] = to_json(doc);
  out["residual"] = num(sns_constraint_residual(sns.source));
  out["fidelity_matrix_route"] = num(sns_fidelity_matrix(sns.source));
  out["y10"] = num(y10);
  out["y01"] = num(y01);
  try {
    const QuantumCoin coin = sns_quantum_coin(sns.source, y10, y01);
    out["fidelity"] = num(coin.fidelity);
    out["q1"] = num(coin.q1);
    out["delta"] = num(coin.delta);
    out["usable"] = true;
    out["phase_error_exact"] = num(std::min(sns_phase_error_exact(coin.delta, sns.e1x), 0.5));
    out["phase_error_relaxed"] = num(std::min(sns_phase_error_relaxed(coin.delta, sns.e1x), 0.5));
    out["phase_error_bound"] = num(sns_phase_error_bound(coin.delta, sns.e1x));
  } catch (const UnusableCoinError&) {
    out["usable"] = false;
    out["phase_error_bound"] = nullptr;
  }
  write_json(f.out, out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-photon twin-field QKD key rates, scans and Monte Carlo checks"};
  app.require_subcommand(1);
  Flags flags;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "scenario JSON")->required();
    sub->add_option("--out", flags.out, "output path (stdout when omitted)");
    sub->add_option("--seed", seed, "overrides optimizer and Monte Carlo seeds");
    sub->add_option("--threads", flags.threads, "worker threads (default: TFKEYRATE_THREADS or 1)");
    sub->add_flag("--asymptotic", flags.asymptotic, "drop the finite-size corrections");
  };
  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Flags&);
  };
  const Command commands[] = {
      {"keyrate", "finite-key rate of one link", cmd_keyrate},
      {"scan", "optimized rate against distance (CSV)", cmd_scan},
      {"network", "pairwise rates of a multi-user network (CSV)", cmd_network},
      {"montecarlo", "event-level simulation against the analytic model", cmd_montecarlo},
      {"sns-check", "sending-or-not-sending source diagnostics", cmd_sns_check},
  };
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    add_common(sub);
    subs.emplace_back(sub, &c);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  }

  for (const auto& [sub, cmd] : subs) {
    if (!sub->parsed()) continue;
    if (sub->count("--seed") > 0) flags.seed = seed;
    try {
      return cmd->run(flags);
    } catch (const InfeasibleDecoyError& e) {
      std::cerr << "tfkeyrate: infeasible decoy estimation: " << e.what() << '\n';
      return kInfeasible;
    } catch (const ValidationError& e) {
      std::cerr << "tfkeyrate: " << e.what() << '\n';
      return kValidation;
    } catch (const std::domain_error& e) {
      std::cerr << "tfkeyrate: " << e.what() << '\n';
      return kValidation;
    }
  }
  return kValidation;
}
