#include "tfqkd/planner.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <thread>

#include "tfqkd/diagnostics.hpp"
#include "tfqkd/quadrature.hpp"

namespace tfqkd {

namespace {

constexpr double kProbFloor = 1e-9;
constexpr double kGoldenRatio = 0.6180339887498949;

double logit(double p) { return std::log(p / (1.0 - p)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Per source: log mu, logit(nu / mu), and log(p_k / p_o) for k in {mu, nu, ohat}.
constexpr int kSourceDims = 5;

void encode_source(const SourceSetting& s, Eigen::Ref<Eigen::VectorXd> x) {
  const double p_o = std::max(s.p_o, kProbFloor);
  x(0) = std::log(s.mu);
  x(1) = logit(std::clamp(s.nu / s.mu, kProbFloor, 1.0 - kProbFloor));
  x(2) = std::log(std::max(s.p_mu, kProbFloor) / p_o);
  x(3) = std::log(std::max(s.p_nu, kProbFloor) / p_o);
  x(4) = std::log(std::max(s.p_ohat, kProbFloor) / p_o);
}

SourceSetting decode_source(const Eigen::Ref<const Eigen::VectorXd>& x) {
  SourceSetting s;
  s.mu = std::exp(x(0));
  s.nu = s.mu * sigmoid(x(1));
  const double e_mu = std::exp(x(2)), e_nu = std::exp(x(3)), e_ohat = std::exp(x(4));
  const double z = 1.0 + e_mu + e_nu + e_ohat;
  s.p_mu = e_mu / z;
  s.p_nu = e_nu / z;
  s.p_ohat = e_ohat / z;
  s.p_o = 1.0 - s.p_mu - s.p_nu - s.p_ohat;
  return s;
}

struct Layout {
  FreeVariables free;
  double delta_lo = 0.0, delta_hi = 0.0;

  int dims() const {
    return (free.source_a ? kSourceDims : 0) + (free.source_b ? kSourceDims : 0) + (free.delta ? 1 : 0);
  }
};

struct Point {
  SourceSetting a, b;
  double delta = 0.0;
};

Eigen::VectorXd encode(const Point& p, const Layout& l) {
  Eigen::VectorXd x(l.dims());
  int i = 0;
  if (l.free.source_a) encode_source(p.a, x.segment(i, kSourceDims)), i += kSourceDims;
  if (l.free.source_b) encode_source(p.b, x.segment(i, kSourceDims)), i += kSourceDims;
  if (l.free.delta) {
    const double u = (p.delta - l.delta_lo) / (l.delta_hi - l.delta_lo);
    x(i) = logit(std::clamp(u, 1e-6, 1.0 - 1e-6));
  }
  return x;
}

Point decode(const Eigen::VectorXd& x, const Point& fixed, const Layout& l) {
  Point p = fixed;
  int i = 0;
  if (l.free.source_a) p.a = decode_source(x.segment(i, kSourceDims)), i += kSourceDims;
  if (l.free.source_b) p.b = decode_source(x.segment(i, kSourceDims)), i += kSourceDims;
  if (l.free.delta) p.delta = l.delta_lo + (l.delta_hi - l.delta_lo) * sigmoid(x(i));
  return p;
}

// Downhill simplex minimizing f, stopped once the simplex values agree to
// rel_tol or the iteration budget runs out.
Eigen::VectorXd nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x0, double step, double rel_tol,
                            int max_iterations, int& evaluations) {
  const int n = static_cast<int>(x0.size());
  std::vector<Eigen::VectorXd> v(n + 1, x0);
  std::vector<double> fv(n + 1);
  for (int i = 0; i < n; ++i) v[i + 1](i) += step;
  for (int i = 0; i <= n; ++i) fv[i] = f(v[i]);
  evaluations += n + 1;

  std::vector<int> order(n + 1);
  for (int it = 0; it < max_iterations; ++it) {
    for (int i = 0; i <= n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int l, int r) { return fv[l] < fv[r]; });
    const int best = order.front(), worst = order.back(), second = order[n - 1];
    const double spread = std::abs(fv[worst] - fv[best]);
    if (spread <= rel_tol * std::abs(fv[best]) || (fv[best] == 0.0 && fv[worst] == 0.0 && it > 0)) {
      break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i <= n; ++i) {
      if (i != worst) centroid += v[i];
    }
    centroid /= n;

    const Eigen::VectorXd xr = centroid + (centroid - v[worst]);
    const double fr = f(xr);
    ++evaluations;
    if (fr < fv[best]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - v[worst]);
      const double fe = f(xe);
      ++evaluations;
      if (fe < fr) {
        v[worst] = xe, fv[worst] = fe;
      } else {
        v[worst] = xr, fv[worst] = fr;
      }
      continue;
    }
    if (fr < fv[second]) {
      v[worst] = xr, fv[worst] = fr;
      continue;
    }
    const bool outside = fr < fv[worst];
    const Eigen::VectorXd xc =
        outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                : Eigen::VectorXd(centroid + 0.5 * (v[worst] - centroid));
    const double fc = f(xc);
    ++evaluations;
    if (fc < (outside ? fr : fv[worst])) {
      v[worst] = xc, fv[worst] = fc;
      continue;
    }
    for (int i = 0; i <= n; ++i) {
      if (i == best) continue;
      v[i] = v[best] + 0.5 * (v[i] - v[best]);
      fv[i] = f(v[i]);
    }
    evaluations += n;
  }
  const auto it = std::min_element(fv.begin(), fv.end());
  return v[static_cast<std::size_t>(it - fv.begin())];
}

std::vector<double> as_vector(const SourceSetting& a, const SourceSetting& b, double delta) {
  return {a.mu, a.nu, a.p_mu, a.p_nu, a.p_o, a.p_ohat,
          b.mu, b.nu, b.p_mu, b.p_nu, b.p_o, b.p_ohat, delta};
}

// Best by rate; equal rates resolved by lexicographic parameter order.
bool better(const LinkOptimum& l, const LinkOptimum& r) {
  if (l.rate != r.rate) return l.rate > r.rate;
  return as_vector(l.a, l.b, l.delta) < as_vector(r.a, r.b, r.delta);
}

template <typename Fn>
void parallel_for(int n, unsigned threads, Fn&& fn) {
  const unsigned t = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(std::max(n, 1)));
  if (t == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < t; ++w) {
    pool.emplace_back([&, w] {
      for (int i = static_cast<int>(w); i < n; i += static_cast<int>(t)) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

double link_rate(const SourceSetting& a, const SourceSetting& b, const LinkGeometry& geom,
                 const SystemParams& params, KeyMode mode) {
  try {
    const double r = evaluate_link(a, b, geom, params, mode).result.rate;
    return std::isfinite(r) ? r : 0.0;
  } catch (const InfeasibleDecoyError&) {
  } catch (const QuadratureError&) {
  } catch (const std::domain_error&) {
  } catch (const std::invalid_argument&) {
  }
  return 0.0;
}

LinkOptimum optimize_delta(const SourceSetting& a, const SourceSetting& b,
                           const LinkGeometry& geom, const SystemParams& params,
                           const OptimizerOptions& opt) {
  LinkOptimum out{a, b, params.delta, 0.0, false, 0};
  SystemParams p = params;
  auto rate_at = [&](double delta) {
    p.delta = delta;
    ++out.evaluations;
    return link_rate(a, b, geom, p, opt.mode);
  };
  const double lo = deg_to_rad(opt.delta_min_deg);
  const double hi = deg_to_rad(opt.delta_max_deg);
  const double step = deg_to_rad(1.0);
  double best_delta = lo, best = -1.0;
  for (double d = lo; d <= hi + 1e-12; d += step) {
    const double r = rate_at(d);
    if (r > best) best = r, best_delta = d;
  }
  if (!(best > 0.0)) return out;

  double left = std::max(lo, best_delta - step), right = std::min(hi, best_delta + step);
  double x1 = right - kGoldenRatio * (right - left), x2 = left + kGoldenRatio * (right - left);
  double f1 = rate_at(x1), f2 = rate_at(x2);
  while (right - left > 1e-5) {
    if (f1 < f2) {
      left = x1, x1 = x2, f1 = f2;
      x2 = left + kGoldenRatio * (right - left);
      f2 = rate_at(x2);
    } else {
      right = x2, x2 = x1, f2 = f1;
      x1 = right - kGoldenRatio * (right - left);
      f1 = rate_at(x1);
    }
  }
  for (auto [d, r] : {std::pair{x1, f1}, std::pair{x2, f2}}) {
    if (r > best) best = r, best_delta = d;
  }
  out.delta = best_delta;
  out.rate = best;
  out.feasible = true;
  return out;
}

LinkOptimum optimize_link(const SourceSetting& a, const SourceSetting& b,
                          const LinkGeometry& geom, const SystemParams& params,
                          const FreeVariables& free, const OptimizerOptions& opt) {
  auto score = [&](const SourceSetting& sa, const SourceSetting& sb) {
    if (free.delta) return optimize_delta(sa, sb, geom, params, opt);
    return LinkOptimum{sa, sb, params.delta, link_rate(sa, sb, geom, params, opt.mode),
                       false, 1};
  };
  auto finish = [](LinkOptimum r) {
    r.feasible = r.rate > 0.0;
    return r;
  };

  LinkOptimum best = finish(score(a, b));
  const Layout layout{free, deg_to_rad(opt.delta_min_deg), deg_to_rad(opt.delta_max_deg)};
  if (!free.source_a && !free.source_b) return best;

  const Point start{a, b, best.feasible ? best.delta : params.delta};
  const Eigen::VectorXd x0 = encode(start, layout);
  const int starts = std::max(opt.starts, 1);
  std::vector<LinkOptimum> results(static_cast<std::size_t>(starts));

  parallel_for(starts, opt.threads, [&](int s) {
    Eigen::VectorXd xs = x0;
    if (s > 0) {
      std::mt19937_64 gen(opt.seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(s));
      std::normal_distribution<double> jitter(0.0, 0.6);
      for (Eigen::Index i = 0; i < xs.size(); ++i) xs(i) += jitter(gen);
    }
    int evals = 0;
    auto objective = [&](const Eigen::VectorXd& x) {
      const Point p = decode(x, start, layout);
      SystemParams sp = params;
      sp.delta = p.delta;
      return -link_rate(p.a, p.b, geom, sp, opt.mode);
    };
    const Eigen::VectorXd xbest =
        nelder_mead(objective, xs, 0.3, opt.rel_tol, opt.max_iterations, evals);
    const Point p = decode(xbest, start, layout);
    LinkOptimum r = finish(score(p.a, p.b));
    r.evaluations += evals;
    results[static_cast<std::size_t>(s)] = r;
  });

  int evaluations = best.evaluations;
  for (const auto& r : results) {
    evaluations += r.evaluations;
    if (better(r, best)) best = r;
  }
  best.evaluations = evaluations;
  return best;
}

const NetworkNode& NetworkScenario::node(const std::string& name) const {
  for (const auto& n : nodes) {
    if (n.name == name) return n;
  }
  throw ValidationError("network: unknown node '" + name + "'");
}

void NetworkScenario::validate() const {
  std::set<std::string> names;
  for (const auto& n : nodes) {
    if (n.name.empty()) throw ValidationError("network: node name must not be empty");
    if (!names.insert(n.name).second) throw ValidationError("network: duplicate node '" + n.name + "'");
    if (!(n.distance_km >= 0.0)) throw ValidationError("network: distance must be >= 0");
    n.source.validate();
  }
  for (const auto& [x, y] : anchors) {
    node(x);
    node(y);
    if (x == y) throw ValidationError("network: anchor links a node to itself");
  }
  params.validate();
}

NetworkScenario optimize_anchors(const NetworkScenario& scn, const OptimizerOptions& opt) {
  scn.validate();
  NetworkScenario out = scn;
  std::map<std::string, SourceSetting> frozen;
  auto setting = [&](const std::string& name) -> SourceSetting& {
    for (auto& n : out.nodes) {
      if (n.name == name) return n.source;
    }
    throw ValidationError("network: unknown node '" + name + "'");
  };
  for (const auto& [x, y] : scn.anchors) {
    const NetworkNode& nx = out.node(x);
    const NetworkNode& ny = out.node(y);
    const bool x_is_alice = takes_alice_role(nx, ny);
    const NetworkNode& al = x_is_alice ? nx : ny;
    const NetworkNode& bo = x_is_alice ? ny : nx;
    const FreeVariables free{!frozen.count(al.name), !frozen.count(bo.name), true};
    const LinkOptimum best = optimize_link(al.source, bo.source, {al.distance_km, bo.distance_km},
                                           out.params, free, opt);
    if (best.feasible) {
      setting(x) = x_is_alice ? best.a : best.b;
      setting(y) = x_is_alice ? best.b : best.a;
    }
    frozen[x] = setting(x);
    frozen[y] = setting(y);
  }
  return out;
}

bool takes_alice_role(const NetworkNode& x, const NetworkNode& y) {
  if (x.distance_km != y.distance_km) return x.distance_km < y.distance_km;
  const auto key = [](const SourceSetting& s) {
    return std::vector<double>{s.mu, s.nu, s.p_mu, s.p_nu, s.p_o, s.p_ohat};
  };
  if (key(x.source) != key(y.source)) return key(x.source) > key(y.source);
  return x.name <= y.name;
}

NetworkLink evaluate_pair(const NetworkNode& x, const NetworkNode& y, const SystemParams& params,
                          const OptimizerOptions& opt) {
  const bool x_alice = takes_alice_role(x, y);
  const NetworkNode& al = x_alice ? x : y;
  const NetworkNode& bo = x_alice ? y : x;
  const LinkOptimum r =
      optimize_delta(al.source, bo.source, {al.distance_km, bo.distance_km}, params, opt);
  NetworkLink link;
  link.alice = al.name;
  link.bob = bo.name;
  link.total_km = x.distance_km + y.distance_km;
  link.delta = r.delta;
  link.rate = r.rate;
  link.plob = plob_bound(link.total_km, params.eta_d, params.alpha);
  link.ratio = link.plob > 0.0 ? link.rate / link.plob : 0.0;
  link.exceeds_plob = link.rate > link.plob;
  return link;
}

std::vector<NetworkLink> evaluate_network(const NetworkScenario& scn, const OptimizerOptions& opt) {
  scn.validate();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < scn.nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < scn.nodes.size(); ++j) pairs.emplace_back(i, j);
  }
  std::vector<NetworkLink> out(pairs.size());
  OptimizerOptions inner = opt;
  inner.threads = 1;
  parallel_for(static_cast<int>(pairs.size()), opt.threads, [&](int k) {
    const auto [i, j] = pairs[static_cast<std::size_t>(k)];
    out[static_cast<std::size_t>(k)] = evaluate_pair(scn.nodes[i], scn.nodes[j], scn.params, inner);
  });
  return out;
}

LinkGeometry ChannelShape::at_total(double total_km) const {
  if (symmetric) return {total_km / 2.0, total_km / 2.0};
  const double l_a = (total_km - offset_km) / 2.0;
  if (l_a < 0.0) throw ValidationError("scan: total distance shorter than the channel offset");
  return {l_a, l_a + offset_km};
}

std::vector<ScanRow> distance_scan(const SourceSetting& a, const SourceSetting& b,
                                   const SystemParams& params, const ChannelShape& channel,
                                   const std::vector<double>& grid_km,
                                   const OptimizerOptions& opt) {
  a.validate();
  b.validate();
  params.validate();
  const FreeVariables all{true, true, true};
  OptimizerOptions fin = opt, asy = opt;
  fin.mode = KeyMode::finite;
  asy.mode = KeyMode::asymptotic;
  SourceSetting fa = a, fb = b, aa = a, ab = b;
  SystemParams pf = params, pa = params;

  std::vector<ScanRow> rows;
  for (double total : grid_km) {
    ScanRow row;
    row.total_km = total;
    row.geom = channel.at_total(total);
    row.finite = optimize_link(fa, fb, row.geom, pf, all, fin);
    row.asymptotic = optimize_link(aa, ab, row.geom, pa, all, asy);
    if (row.finite.feasible) fa = row.finite.a, fb = row.finite.b, pf.delta = row.finite.delta;
    if (row.asymptotic.feasible) {
      aa = row.asymptotic.a, ab = row.asymptotic.b, pa.delta = row.asymptotic.delta;
    }
    row.rate_finite = row.finite.rate;
    row.rate_asymptotic = row.asymptotic.rate;
    row.plob = plob_bound(total, params.eta_d, params.alpha);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace tfqkd
