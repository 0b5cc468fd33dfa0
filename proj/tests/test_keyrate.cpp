#include "doctest.h"

#include <algorithm>
#include <random>
#include <set>

#include "support.hpp"
#include "tfqkd/keyrate.hpp"
#include "tfqkd/planner.hpp"

using namespace tfqkd;

namespace {

struct Sample {
  SourceSetting a, b;
  LinkGeometry geom;
  SystemParams params;
};

// sigma = 5 deg network sources jittered by up to +-30%, random geometry and window.
Sample near_network_sample(std::mt19937_64& rng) {
  const auto& doc = testing::network_sigma5();
  std::uniform_int_distribution<std::size_t> pick(0, doc.nodes.size() - 1);
  std::uniform_real_distribution<double> jit(0.7, 1.3), ul(0.0, 250.0), ud(2.0, 20.0), us(0.0, 15.0);
  auto jitter = [&](SourceSetting s) {
    s.mu *= jit(rng);
    s.nu = std::min(s.nu * jit(rng), 0.9 * s.mu);
    s.p_mu *= jit(rng);
    s.p_nu *= jit(rng);
    s.p_ohat *= jit(rng);
    s.p_o = 1.0 - s.p_mu - s.p_nu - s.p_ohat;
    return s;
  };
  Sample smp{jitter(doc.nodes[pick(rng)].source), jitter(doc.nodes[pick(rng)].source),
             {ul(rng), ul(rng)}, doc.params};
  smp.params.delta = deg_to_rad(ud(rng));
  smp.params.sigma = deg_to_rad(us(rng));
  return smp;
}

}  // namespace

TEST_CASE("A-C operating point at sigma = 5 deg") {
  const auto& doc = testing::network_sigma5();
  const auto& a = testing::node(doc, "A").source;
  const auto& c = testing::node(doc, "C").source;
  // C is nearer the relay, so it drives the matching.
  const auto opt = optimize_delta(c, a, {120, 200}, doc.params);
  CHECK(opt.feasible);
  CHECK(testing::rel_err(opt.rate, 8.631e-6) < 0.10);

  SystemParams p = doc.params;
  p.delta = opt.delta;
  const auto ev = evaluate_link(c, a, {120, 200}, p);
  CHECK(ev.result.rate == doctest::Approx(opt.rate).epsilon(1e-12));
  CHECK(ev.result.estimates.s11_z_lower / p.N > 0.0);
  CHECK(ev.result.estimates.s11_z_lower <= ev.counts.n_z);
  CHECK(ev.result.estimates.s11_x_lower <= ev.counts.n_x);
  CHECK(ev.result.budget.chernoff_applications == 13);
  CHECK(ev.result.budget.eps_tp == doctest::Approx(3.6e-9).epsilon(1e-14));
}

TEST_CASE("A-C operating point at sigma = 18 deg") {
  const auto& doc = testing::network_sigma18();
  const auto opt = optimize_delta(testing::node(doc, "C").source, testing::node(doc, "A").source,
                                  {120, 200}, doc.params);
  CHECK(testing::rel_err(opt.rate, 2.572e-6) < 0.10);
}

TEST_CASE("the standard pipeline charges thirteen distinct bounds") {
  const auto& doc = testing::network_sigma5();
  SystemParams p = doc.params;
  p.delta = deg_to_rad(8);
  const auto ev = evaluate_link(testing::node(doc, "D").source, testing::node(doc, "B").source, {150, 200}, p);
  CHECK(ev.bounds.size() == 13);
  std::set<std::pair<std::string, int>> seen;
  for (const auto& r : ev.bounds) seen.insert({r.quantity, int(r.kind)});
  CHECK(seen.size() == 13);
  // x_oo_d is asked for twice with the same direction and charged once.
  CHECK(std::count_if(ev.bounds.begin(), ev.bounds.end(),
                      [](const BoundRecord& r) { return r.quantity == "x_oo_d"; }) == 1);
  const auto asym = evaluate_link(testing::node(doc, "D").source, testing::node(doc, "B").source, {150, 200}, p,
                                  KeyMode::asymptotic);
  CHECK(asym.bounds.empty());
}

TEST_CASE("asymptotic singles yield tracks the one-photon detection probability") {
  SystemParams p = reference_system();
  p.delta = deg_to_rad(8);
  const SourceSetting s{0.4, 0.02, 0.3, 0.3, 0.35, 0.05};
  const LinkGeometry g{150, 150};
  BoundLedger ledger(p.eps, KeyMode::asymptotic);
  const auto counts = simulate_counts(s, s, g, p);
  const auto y = estimate_singles_yields(counts, s, s, p, ledger);
  const double truth = single_photon_yield(g.eta_b(p), p.p_d);
  CHECK(y.y01_lower >= 0.0);
  CHECK(y.y01_lower <= 1.0);
  CHECK(y.y01_lower <= truth * (1 + 1e-9));
  // Decoy truncation error is O(nu); first order agreement.
  CHECK(testing::rel_err(y.y01_lower, truth) < 0.05);
  CHECK(y.y10_lower == doctest::Approx(y.y01_lower).epsilon(1e-12));
}

TEST_CASE("missing declare-vacuum pulses are rejected") {
  SystemParams p = reference_system();
  SourceSetting s{0.4, 0.05, 0.3, 0.3, 0.4, 0.0};
  const auto counts = simulate_counts(s, s, {100, 100}, p);
  BoundLedger ledger(p.eps, KeyMode::finite);
  CHECK_THROWS_AS(estimate_s0mub_z(counts, s, s, p, ledger), ValidationError);
  CHECK_THROWS_AS(estimate_singles_yields(counts, s, s, p, ledger), ValidationError);
}

TEST_CASE("vacuum term grows linearly with the dark count probability") {
  const auto& doc = testing::network_sigma5();
  const auto& a = testing::node(doc, "A").source;
  const auto& b = testing::node(doc, "B").source;
  SystemParams p = doc.params;
  for (double pd : {1e-9, 3e-9, 1e-8, 3e-8, 1e-7}) {
    for (double l : {50.0, 150.0, 250.0}) {
      p.p_d = pd;
      BoundLedger l1(p.eps, KeyMode::asymptotic);
      const double s1 = estimate_s0mub_z(simulate_counts(a, b, {l, l}, p), a, b, p, l1);
      p.p_d = 2 * pd;
      BoundLedger l2(p.eps, KeyMode::asymptotic);
      const double s2 = estimate_s0mub_z(simulate_counts(a, b, {l, l}, p), a, b, p, l2);
      // second-order terms in p_d and in the signal leakage stay below 1%
      CHECK(s2 / s1 == doctest::Approx(2.0).epsilon(1e-2));
    }
  }
}

TEST_CASE("phase error and key length properties over a sampled grid") {
  std::mt19937_64 rng(101);
  int feasible = 0;
  for (int i = 0; i < 1500; ++i) {
    const Sample s = near_network_sample(rng);
    LinkEvaluation fin, asym;
    try {
      fin = evaluate_link(s.a, s.b, s.geom, s.params);
      asym = evaluate_link(s.a, s.b, s.geom, s.params, KeyMode::asymptotic);
    } catch (const InfeasibleDecoyError&) {
      continue;
    }
    ++feasible;
    const auto& d = fin.result.estimates;
    CHECK(d.phi11_z_upper >= d.e11_x_upper);
    CHECK(d.phi11_z_upper <= 0.5);
    CHECK(d.s11_z_lower <= fin.counts.n_z);
    CHECK(d.s11_x_lower <= fin.counts.n_x * (1 + 1e-12));
    CHECK(fin.result.ell >= 0.0);
    CHECK(fin.result.ell == std::max(fin.result.ell_unclamped, 0.0));
    CHECK(fin.result.rate == fin.result.ell / s.params.N);
    CHECK(asym.result.estimates.phi11_z_upper == asym.result.estimates.e11_x_upper);
    CHECK(asym.result.rate >= fin.result.rate);

    SystemParams tight = s.params;
    tight.eps = s.params.eps / 100;
    try {
      CHECK(evaluate_link(s.a, s.b, s.geom, tight).result.ell <= fin.result.ell);
    } catch (const InfeasibleDecoyError&) {
    }
  }
  CHECK(feasible >= 1000);
}

TEST_CASE("saturated phase error leaves no key") {
  const auto& doc = testing::network_sigma5();
  SystemParams p = doc.params;
  p.delta = deg_to_rad(8);
  const auto& a = testing::node(doc, "A").source;
  const auto ev = evaluate_link(a, a, {200, 200}, p);
  DecoyEstimates d = ev.result.estimates;
  d.phi11_z_upper = 0.5;
  d.s0mub_z_lower = 1.0;
  const auto r = key_length(ev.counts, d, ev.result.budget, p);
  CHECK(r.ell == 0.0);
  CHECK(r.ell_unclamped < 0.0);
  CHECK(r.rate == 0.0);
}

TEST_CASE("relabeling symmetry where the formulas allow it") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    const Sample s = near_network_sample(rng);
    const auto ab = x_basis_counts(s.a, s.b, s.geom, s.params);
    const auto ba = x_basis_counts(s.b, s.a, {s.geom.l_b, s.geom.l_a}, s.params);
    CHECK(ab.n_x == doctest::Approx(ba.n_x).epsilon(1e-12));
    CHECK(ab.m_x == doctest::Approx(ba.m_x).epsilon(1e-12));
  }
  const auto& doc = testing::network_sigma5();
  SystemParams p = doc.params;
  p.delta = deg_to_rad(10);
  const auto& a = testing::node(doc, "A").source;
  const auto e1 = evaluate_link(a, a, {180, 180}, p);
  const auto e2 = evaluate_link(a, a, {180, 180}, p);
  CHECK(e1.result.ell == e2.result.ell);
}
