#include "tfqkd/event_simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <thread>

namespace tfqkd {

namespace {

constexpr std::uint64_t kBlockRounds = 4096;
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kHalfPi = std::numbers::pi / 2.0;

Intensity draw_intensity(double u, const SourceSetting& s) {
  double acc = s.p_mu;
  if (u < acc) return Intensity::signal;
  acc += s.p_nu;
  if (u < acc) return Intensity::decoy;
  acc += s.p_o;
  if (u < acc) return Intensity::vacuum;
  return Intensity::declare_vacuum;
}

bool is_z_intensity(Intensity k) { return k == Intensity::signal || k == Intensity::vacuum; }

std::uint8_t saturate(unsigned n) { return static_cast<std::uint8_t>(std::min(n, 255u)); }

// Deviation of the announced phase from the nearest centre (0 or pi).
struct SliceCoordinate {
  double deviation;
  bool centre_pi;
};

SliceCoordinate slice_coordinate(double theta) {
  if (theta < kHalfPi) return {theta, false};
  if (theta >= 3.0 * kHalfPi) return {theta - kTwoPi, false};
  return {theta - std::numbers::pi, true};
}

double misaligned(const SliceCoordinate& c, double sigma) {
  double m = std::abs(c.deviation) + sigma;
  m = std::fmod(m, kHalfPi);
  const double centre = c.centre_pi ? std::numbers::pi : 0.0;
  return centre + std::copysign(m, c.deviation);
}

void run_blocks(std::uint64_t first_block, std::uint64_t last_block, const SourceSetting& a,
                const SourceSetting& b, const Transmittance& t, const SystemParams& params,
                std::uint64_t n_rounds, std::uint64_t seed, MonteCarloTally& out) {
  for (std::uint64_t block = first_block; block < last_block; ++block) {
    CounterRng rng = CounterRng::for_block(seed, block);
    const std::uint64_t begin = block * kBlockRounds;
    const std::uint64_t end = std::min(begin + kBlockRounds, n_rounds);
    for (std::uint64_t r = begin; r < end; ++r) {
      const RoundRecord rec = simulate_round(rng, a, b, t, params);
      out.sent(index(rec.k_a), index(rec.k_b)) += 1;
      if (rec.outcome == ClickOutcome::both) ++out.double_clicks;
      if (rec.outcome != ClickOutcome::left && rec.outcome != ClickOutcome::right) continue;
      out.clicks(index(rec.k_a), index(rec.k_b)) += 1;
      const bool left = rec.outcome == ClickOutcome::left;
      if (is_z_intensity(rec.k_a) && is_z_intensity(rec.k_b)) {
        out.z_events.push_back({r, rec.k_a, rec.k_b, saturate(rec.n_a + rec.n_b), left});
      } else if (rec.k_a == Intensity::decoy && rec.k_b == Intensity::decoy) {
        const SliceCoordinate c = slice_coordinate(rec.theta);
        if (std::abs(c.deviation) <= out.x_window) {
          out.x_events.push_back(
              {r, c.deviation, c.centre_pi, rec.r_a, rec.r_b, left, saturate(rec.n_a + rec.n_b)});
        }
      }
    }
  }
}

template <typename Event>
void merge_events(std::vector<Event>& into, const std::vector<Event>& from) {
  const auto mid = static_cast<std::ptrdiff_t>(into.size());
  into.insert(into.end(), from.begin(), from.end());
  std::inplace_merge(into.begin(), into.begin() + mid, into.end(),
                     [](const Event& l, const Event& r) { return l.round < r.round; });
}

Comparison compare(std::string name, double simulated, double analytic, double se) {
  Comparison c{std::move(name), simulated, analytic, se, 0.0};
  const double diff = simulated - analytic;
  if (se > 0.0) {
    c.z_score = diff / se;
  } else {
    c.z_score = diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return c;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  std::uint64_t z = x + kGolden;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

CounterRng CounterRng::for_block(std::uint64_t seed, std::uint64_t block) {
  return CounterRng(splitmix64(seed) ^ splitmix64(~block));
}

CounterRng::result_type CounterRng::operator()() {
  return splitmix64(key_ + kGolden * counter_++);
}

double CounterRng::uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

unsigned CounterRng::poisson(double mean) {
  if (!(mean > 0.0)) return 0;
  if (mean > 30.0) return std::poisson_distribution<unsigned>(mean)(*this);
  const double u = uniform();
  double p = std::exp(-mean);
  double cdf = p;
  unsigned n = 0;
  while (u >= cdf && n < 1000) {
    ++n;
    p *= mean / n;
    cdf += p;
    if (p < 1e-300) break;
  }
  return n;
}

RoundRecord simulate_round(CounterRng& rng, const SourceSetting& a, const SourceSetting& b,
                           const Transmittance& t, const SystemParams& params) {
  RoundRecord rec;
  rec.k_a = draw_intensity(rng.uniform(), a);
  rec.k_b = draw_intensity(rng.uniform(), b);
  rec.theta_a = kTwoPi * rng.uniform();
  rec.theta_b = kTwoPi * rng.uniform();
  rec.phi_ab = kTwoPi * rng.uniform();
  rec.theta = std::fmod(rec.theta_a - rec.theta_b + rec.phi_ab + kTwoPi, kTwoPi);
  const std::uint64_t bits = rng();
  rec.r_a = bits & 1u;
  rec.r_b = (bits >> 1) & 1u;
  rec.theta_eff = misaligned(slice_coordinate(rec.theta), params.sigma);

  const double ka = a.intensity(rec.k_a);
  const double kb = b.intensity(rec.k_b);
  const double s = t.eta_a * ka + t.eta_b * kb;
  const double omega = std::sqrt(t.eta_a * ka * t.eta_b * kb);
  const double phase = rec.theta_eff + ((rec.r_a != rec.r_b) ? std::numbers::pi : 0.0);
  const double c = omega * std::cos(phase);
  const unsigned n_left = rng.poisson(std::max(s / 2.0 + c, 0.0));
  const unsigned n_right = rng.poisson(std::max(s / 2.0 - c, 0.0));
  const bool click_left = n_left > 0 || rng.uniform() < params.p_d;
  const bool click_right = n_right > 0 || rng.uniform() < params.p_d;

  if (click_left && click_right) {
    rec.outcome = ClickOutcome::both;
  } else if (click_left) {
    rec.outcome = ClickOutcome::left;
  } else if (click_right) {
    rec.outcome = ClickOutcome::right;
  }
  if (rec.outcome == ClickOutcome::left || rec.outcome == ClickOutcome::right) {
    const unsigned lost = rng.poisson(ka * (1.0 - t.eta_a) + kb * (1.0 - t.eta_b));
    const unsigned n = n_left + n_right + lost;
    if (kb == 0.0) {
      rec.n_a = n;
    } else if (ka == 0.0) {
      rec.n_b = n;
    } else {
      const double share = ka / (ka + kb);
      for (unsigned i = 0; i < n; ++i) (rng.uniform() < share ? rec.n_a : rec.n_b) += 1;
    }
  }
  return rec;
}

void MonteCarloTally::merge(const MonteCarloTally& other) {
  n_rounds += other.n_rounds;
  sent += other.sent;
  clicks += other.clicks;
  double_clicks += other.double_clicks;
  merge_events(z_events, other.z_events);
  merge_events(x_events, other.x_events);
}

MonteCarloTally simulate_rounds(const SourceSetting& a, const SourceSetting& b,
                                const LinkGeometry& geom, const SystemParams& params,
                                const MonteCarloOptions& opt) {
  if (opt.n_rounds < 1) throw ValidationError("simulate_rounds: n_rounds must be >= 1");
  a.validate();
  b.validate();
  geom.validate();
  params.validate();
  const Transmittance t = transmittance(geom, params);
  const std::uint64_t n_blocks = (opt.n_rounds + kBlockRounds - 1) / kBlockRounds;
  const unsigned n_threads =
      static_cast<unsigned>(std::clamp<std::uint64_t>(opt.threads, 1, n_blocks));

  std::vector<MonteCarloTally> shards(n_threads);
  for (auto& s : shards) s.x_window = params.delta;
  auto shard_range = [&](unsigned i) { return n_blocks * i / n_threads; };
  if (n_threads == 1) {
    run_blocks(0, n_blocks, a, b, t, params, opt.n_rounds, opt.seed, shards[0]);
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n_threads; ++i) {
      pool.emplace_back([&, i] {
        run_blocks(shard_range(i), shard_range(i + 1), a, b, t, params, opt.n_rounds, opt.seed,
                   shards[i]);
      });
    }
    for (auto& th : pool) th.join();
  }

  MonteCarloTally tally;
  tally.seed = opt.seed;
  tally.x_window = params.delta;
  for (const auto& s : shards) tally.merge(s);
  tally.n_rounds = opt.n_rounds;
  return tally;
}

ZMatch post_match_z(const MonteCarloTally& tally, const SystemParams& params) {
  std::vector<const ZEvent*> pool_vacuum, pool_signal;
  for (const auto& e : tally.z_events) {
    (e.k_a == Intensity::signal ? pool_signal : pool_vacuum).push_back(&e);
  }
  CounterRng flips(splitmix64(tally.seed ^ 0x7a2f0c11d3e5b4a9ULL));
  ZMatch m;
  const std::size_t pairs = std::min(pool_vacuum.size(), pool_signal.size());
  for (std::size_t k = 0; k < pairs; ++k) {
    const ZEvent& i = *pool_signal[k];  // Alice sent mu
    const ZEvent& j = *pool_vacuum[k];  // Alice sent vacuum
    if (i.k_b == j.k_b) {
      ++m.discarded;
      continue;
    }
    const bool alice_first = i.round < j.round;
    const ZEvent& bob_signal = i.k_b == Intensity::signal ? i : j;
    const bool bob_first = bob_signal.round == std::min(i.round, j.round);
    const bool alice_bit = !alice_first;
    bool bob_bit = bob_first;  // raw bit is !bob_first; Bob always flips
    if (params.e_d_z > 0.0 && flips.uniform() < params.e_d_z) bob_bit = !bob_bit;
    const bool error = alice_bit != bob_bit;
    const bool correct_type = j.k_b == Intensity::signal;
    (correct_type ? m.n_C : m.n_E) += 1;
    m.m_z += error;
    if (correct_type && i.photons == 1 && j.photons == 1) {
      ++m.tagged_single;
      m.tagged_single_errors += error;
    }
  }
  m.n_z = m.n_C + m.n_E;
  return m;
}

XMatch post_match_x(const MonteCarloTally& tally, const SourceSetting& a,
                    const SourceSetting& b, const LinkGeometry& geom,
                    const SystemParams& params, int sub_slices) {
  if (sub_slices < 1) throw ValidationError("post_match_x: sub_slices must be >= 1");
  if (params.delta > tally.x_window * (1.0 + 1e-12)) {
    throw ValidationError("post_match_x: delta wider than the simulated window");
  }
  const double ya = single_photon_yield(geom.eta_a(params), params.p_d);
  const double yb = single_photon_yield(geom.eta_b(params), params.p_d);
  const double wa = a.nu * ya, wb = b.nu * yb;
  const double effective_weight = 2.0 * wa * wb / ((wa + wb) * (wa + wb));

  const int n_bins = 2 * sub_slices;
  std::vector<const XEvent*> pending(static_cast<std::size_t>(n_bins), nullptr);
  XMatch m;
  for (const auto& e : tally.x_events) {
    if (std::abs(e.deviation) > params.delta) continue;
    ++m.retained;
    int bin = static_cast<int>(std::floor((e.deviation + params.delta) / (2.0 * params.delta) * n_bins));
    bin = std::clamp(bin, 0, n_bins - 1);
    auto& slot = pending[static_cast<std::size_t>(bin)];
    if (slot == nullptr) {
      slot = &e;
      continue;
    }
    const XEvent& f = *slot;
    slot = nullptr;
    const bool parity = f.r_a ^ f.r_b ^ e.r_a ^ e.r_b;
    const bool same = f.left == e.left;
    const bool opposite_centres = f.centre_pi != e.centre_pi;
    const bool error = opposite_centres ? (parity != same) : (parity == same);
    ++m.n_x;
    m.m_x += error;
    if (f.photons == 1 && e.photons == 1) {
      ++m.tagged_pairs;
      m.tagged_errors += error;
      m.tagged_effective += effective_weight;
    }
  }
  m.unmatched = std::count_if(pending.begin(), pending.end(), [](auto* p) { return p != nullptr; });
  return m;
}

ObservedCounts tally_counts(const MonteCarloTally& tally, const ZMatch& z, const XMatch& x,
                            const SourceSetting& a, const SourceSetting& b) {
  using enum Intensity;
  ObservedCounts c;
  c.x = tally.clicks.cast<double>();
  c.x_oo_d = c.at(declare_vacuum, declare_vacuum) + c.at(declare_vacuum, vacuum) +
             c.at(vacuum, declare_vacuum);
  c.p_oo_d = a.p_ohat * b.p_ohat + a.p_ohat * b.p_o + a.p_o * b.p_ohat;
  c.n_z = static_cast<double>(z.n_z);
  c.m_z = static_cast<double>(z.m_z);
  c.n_C_z = static_cast<double>(z.n_C);
  c.n_E_z = static_cast<double>(z.n_E);
  c.E_z = z.n_z > 0 ? c.m_z / c.n_z : 0.0;
  c.n_x = static_cast<double>(x.n_x);
  c.m_x = static_cast<double>(x.m_x);
  return c;
}

std::vector<Comparison> compare_with_analytics(const MonteCarloTally& tally, const ZMatch& z,
                                               const XMatch& x, const SourceSetting& a,
                                               const SourceSetting& b, const LinkGeometry& geom,
                                               const SystemParams& params) {
  SystemParams p = params;
  p.N = static_cast<double>(tally.n_rounds);
  std::vector<Comparison> out;
  for (Intensity ka : kAllIntensities) {
    for (Intensity kb : kAllIntensities) {
      const auto sent = static_cast<double>(tally.sent(index(ka), index(kb)));
      if (sent == 0.0) continue;
      const double q = overall_gain(a.intensity(ka), b.intensity(kb), geom, p);
      const double freq = static_cast<double>(tally.clicks(index(ka), index(kb))) / sent;
      out.push_back(compare(std::string("gain/") + to_string(ka) + "," + to_string(kb), freq, q,
                            std::sqrt(q * (1.0 - q) / sent)));
    }
  }
  // Counts are compared with Poisson standard errors, floored at one count.
  auto count_se = [](double expected) { return std::sqrt(std::max(expected, 1.0)); };
  const ObservedCounts expected = expected_pair_counts(a, b, geom, p);
  const ZBasisCounts zb = z_basis_counts(expected, a, b, geom, p);
  out.push_back(compare("n_z", static_cast<double>(z.n_z), zb.n_z, count_se(zb.n_z)));
  out.push_back(compare("m_z", static_cast<double>(z.m_z), zb.m_z, count_se(zb.m_z)));
  const XBasisCounts xb = x_basis_counts(a, b, geom, p);
  out.push_back(compare("n_x", static_cast<double>(x.n_x), xb.n_x, count_se(xb.n_x)));
  out.push_back(compare("m_x", static_cast<double>(x.m_x), xb.m_x, count_se(xb.m_x)));
  if (x.n_x > 0 && xb.n_x > 0.0) {
    const double e = xb.m_x / xb.n_x;
    out.push_back(compare("e_x", static_cast<double>(x.m_x) / static_cast<double>(x.n_x), e,
                          std::sqrt(e * (1.0 - e) / static_cast<double>(x.n_x))));
  }
  return out;
}

SoundnessReport check_soundness(const MonteCarloTally& tally, const ZMatch& z, const XMatch& x,
                                const SourceSetting& a, const SourceSetting& b,
                                const LinkGeometry& geom, const SystemParams& params) {
  SystemParams p = params;
  p.N = static_cast<double>(tally.n_rounds);
  const ObservedCounts counts = tally_counts(tally, z, x, a, b);
  SoundnessReport rep;
  DecoyEstimates dec;
  try {
    BoundLedger ledger(p.eps, KeyMode::finite);
    dec = estimate_decoy(counts, a, b, geom, p, ledger);
  } catch (const InfeasibleDecoyError&) {
    rep.feasible = false;
    return rep;
  }
  rep.checks.push_back({"y01", dec.y01_lower, single_photon_yield(geom.eta_b(p), p.p_d), true});
  rep.checks.push_back({"y10", dec.y10_lower, single_photon_yield(geom.eta_a(p), p.p_d), true});
  rep.checks.push_back({"s11_z", dec.s11_z_lower, static_cast<double>(z.tagged_single), true});
  rep.checks.push_back({"s11_x", dec.s11_x_lower, x.tagged_effective, true});
  if (x.tagged_pairs > 0) {
    rep.checks.push_back({"e11_x", dec.e11_x_upper,
                          static_cast<double>(x.tagged_errors) / static_cast<double>(x.tagged_pairs),
                          false});
  }
  return rep;
}

nlohmann::json to_json(const MonteCarloTally& tally, const ZMatch& z, const XMatch& x) {
  auto matrix = [](const Eigen::Matrix<std::int64_t, 4, 4>& m) {
    nlohmann::json rows = nlohmann::json::object();
    for (Intensity ka : kAllIntensities) {
      nlohmann::json row = nlohmann::json::object();
      for (Intensity kb : kAllIntensities) row[to_string(kb)] = m(index(ka), index(kb));
      rows[to_string(ka)] = row;
    }
    return rows;
  };
  return {
      {"n_rounds", tally.n_rounds},
      {"seed", tally.seed},
      {"sent", matrix(tally.sent)},
      {"single_clicks", matrix(tally.clicks)},
      {"double_clicks", tally.double_clicks},
      {"z_events", tally.z_events.size()},
      {"x_events", tally.x_events.size()},
      {"z_match",
       {{"n_z", z.n_z}, {"m_z", z.m_z}, {"n_correct_type", z.n_C}, {"n_error_type", z.n_E},
        {"discarded", z.discarded}, {"tagged_single", z.tagged_single},
        {"tagged_single_errors", z.tagged_single_errors}}},
      {"x_match",
       {{"retained", x.retained}, {"n_x", x.n_x}, {"m_x", x.m_x}, {"unmatched", x.unmatched},
        {"tagged_pairs", x.tagged_pairs}, {"tagged_errors", x.tagged_errors},
        {"tagged_effective", x.tagged_effective}}},
  };
}

}  // namespace tfqkd
