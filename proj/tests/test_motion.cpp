#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <vector>

#include "dtnc/motion.hpp"
#include "dtnc/network.hpp"
#include "dtnc/probability.hpp"
#include "dtnc/rng.hpp"

using namespace dtnc;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Vertex mk_vertex(std::uint64_t vid, double x, double y) {
  Vertex v;
  v.vid = vid;
  v.lat = y / Projection::kEarthRadius * 180.0 / kPi;
  v.lon = x / Projection::kEarthRadius * 180.0 / kPi;
  return v;
}

Edge mk_edge(std::uint64_t eid, std::size_t s, std::size_t d, double speed = 15.0) {
  Edge e;
  e.eid = eid;
  e.s_idx = s;
  e.d_idx = d;
  e.type = EdgeType::trunk;
  e.speed_limit_mps = speed;
  return e;
}

Network make_corridor(int n_edges = 8) {
  std::vector<Vertex> vs;
  for (int i = 0; i <= n_edges; ++i)
    vs.push_back(mk_vertex(std::uint64_t(i), i * 100.0, 0));
  std::vector<Edge> es;
  for (std::uint64_t e = 0; e < std::uint64_t(n_edges); ++e)
    es.push_back(mk_edge(e, std::size_t(e), std::size_t(e + 1)));
  return Network::from_records(vs, es, 2, 0);
}

CellularLocation mk_cl(std::int64_t t, const Network& net, Vec2 xy, int u = 3) {
  CellularLocation cl;
  cl.object_id = "obj";
  cl.t = t;
  net.projection().to_latlon(xy, cl.lat, cl.lon);
  cl.u = u;
  return cl;
}

double log_or(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

// Exhaustive path enumeration sharing the production transition cache. The
// accumulation order of log terms matches the dynamic program statement for
// statement so agreeing paths produce bit-identical scores.
struct BfState {
  std::size_t f;
  int d;
};

struct BfBest {
  bool found = false;
  double lp = kNegInf;
  std::vector<BfState> states;
};

bool reversed_less(const std::vector<BfState>& a, const std::vector<BfState>& b) {
  for (std::size_t i = a.size(); i-- > 0;) {
    if (a[i].f != b[i].f) return a[i].f < b[i].f;
    if (a[i].d != b[i].d) return a[i].d < b[i].d;
  }
  return false;
}

void bf_consider(BfBest& best, double lp, const std::vector<BfState>& states) {
  if (!best.found || lp > best.lp ||
      (lp == best.lp && reversed_less(states, best.states))) {
    best.found = true;
    best.lp = lp;
    best.states = states;
  }
}

void bf_walk(std::size_t k, double lp, std::vector<BfState>& states,
             const std::vector<FragmentSet>& sets, const std::vector<std::int64_t>& ts,
             const std::vector<std::vector<double>>& lemis,
             const std::vector<std::vector<std::map<int, double>>>& masses,
             TransitionCache& cache, BfBest& best) {
  std::size_t n = sets.size();
  if (k == n) {
    bf_consider(best, lp, states);
    return;
  }
  std::int64_t dt = ts[k] - ts[k - 1];
  const BfState& prev = states.back();
  if (prev.d >= dt) {
    // Forced stay on the same edge.
    for (std::size_t ft = 0; ft < sets[k].size(); ++ft) {
      if (sets[k][ft].eid != sets[k - 1][prev.f].eid) continue;
      double cand = lp;
      cand += 0.0;
      cand += 0.0;
      cand += lemis[k][ft];
      states.push_back({ft, prev.d - int(dt)});
      bf_walk(k + 1, cand, states, sets, ts, lemis, masses, cache, best);
      states.pop_back();
      break;
    }
    return;
  }
  auto est = cache.get(k, prev.f);
  for (std::size_t ft = 0; ft < sets[k].size(); ++ft) {
    double ltrans = log_or(est->probs[ft]);
    if (ltrans == kNegInf) continue;
    for (const auto& [j, mass] : masses[k][ft]) {
      double cand = lp;
      cand += ltrans;
      cand += log_or(mass);
      cand += lemis[k][ft];
      states.push_back({ft, j});
      bf_walk(k + 1, cand, states, sets, ts, lemis, masses, cache, best);
      states.pop_back();
    }
  }
}

BfBest brute_force(const std::vector<FragmentSet>& sets,
                   const std::vector<std::int64_t>& ts, const Network& net,
                   const std::vector<TravelTimeDistribution>& dists,
                   TransitionCache& cache) {
  std::size_t n = sets.size();
  std::vector<std::vector<double>> lemis(n);
  std::vector<std::vector<std::map<int, double>>> masses(n);
  for (std::size_t k = 0; k < n; ++k) {
    auto e = emission(sets[k]);
    for (double p : e) lemis[k].push_back(log_or(p));
    for (const auto& f : sets[k]) {
      const Edge& edge = net.edge_by_id(f.eid);
      masses[k].push_back(scaled_duration_masses(dists[net.edge_index(f.eid)], edge, f));
    }
  }
  BfBest best;
  double init_prior = std::log(1.0 / double(sets[0].size()));
  std::vector<BfState> states;
  for (std::size_t f = 0; f < sets[0].size(); ++f) {
    for (const auto& [j, mass] : masses[0][f]) {
      double lp = init_prior;
      lp += log_or(mass);
      lp += lemis[0][f];
      states.push_back({f, j});
      bf_walk(1, lp, states, sets, ts, lemis, masses, cache, best);
      states.pop_back();
    }
  }
  return best;
}

}  // namespace

TEST_CASE("duration scaling rounds half up on the remaining stretch") {
  Network net = make_corridor();
  const Edge& e = net.edges()[0];  // ~100 m
  // Fragment midpoint at three quarters: a quarter of the edge remains.
  EdgeFragment f{0, 50, 100};  // p_c = 75, frac = 0.25
  CHECK(scale_duration(40, e, f) == 10);
  CHECK(scale_duration(41, e, f) == 10);  // 10.25 rounds down
  CHECK(scale_duration(42, e, f) == 11);  // 10.5 rounds up

  EdgeFragment half{0, 0, 100};  // p_c = 50, frac = 0.5
  CHECK(scale_duration(5, e, half) == 3);   // 2.5 -> 3
  CHECK(scale_duration(7, e, half) == 4);   // 3.5 -> 4
  CHECK(scale_duration(4, e, half) == 2);   // exact
}

TEST_CASE("scaled duration masses merge colliding values") {
  Network net = make_corridor();
  const Edge& e = net.edges()[0];
  TravelTimeDistribution d(std::map<int, std::int64_t>{{4, 1}, {5, 1}});

  EdgeFragment half{0, 0, 100};  // frac 0.5: 4 -> 2, 5 -> 3 (2.5 up)
  auto m1 = scaled_duration_masses(d, e, half);
  REQUIRE(m1.size() == 2);
  CHECK(m1.at(2) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(m1.at(3) == doctest::Approx(0.5).epsilon(1e-12));

  EdgeFragment quarter{0, 50, 100};  // frac 0.25: 4 -> 1, 5 -> 1.25 -> 1
  auto m2 = scaled_duration_masses(d, e, quarter);
  REQUIRE(m2.size() == 1);
  CHECK(m2.at(1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("remaining-duration transition covers its three regimes") {
  Network net = make_corridor();
  const Edge& e = net.edges()[0];
  TravelTimeDistribution d(std::map<int, std::int64_t>{{40, 1}});
  EdgeFragment f{0, 50, 100};  // frac 0.25 -> fresh duration 10 with mass 1

  // Fresh entry: scaled mass lookup.
  CHECK(duration_prob(0, 10, e, f, 7, d) == doctest::Approx(1.0));
  CHECK(duration_prob(0, 9, e, f, 7, d) == 0.0);
  // Enough duration left: deterministic countdown.
  CHECK(duration_prob(12, 5, e, f, 7, d) == 1.0);
  CHECK(duration_prob(12, 4, e, f, 7, d) == 0.0);
  CHECK(duration_prob(7, 0, e, f, 7, d) == 1.0);
  // Mid-edge with too little duration: impossible.
  CHECK(duration_prob(3, 2, e, f, 7, d) == 0.0);
  CHECK(duration_prob(3, 0, e, f, 7, d) == 0.0);
}

TEST_CASE("edge transition is forced while duration covers the gap") {
  TransitionEstimate est;
  est.targets = {{1, 0, 50}, {2, 10, 60}};
  est.probs = {0.7, 0.3};
  EdgeFragment on1{1, 0, 50};
  EdgeFragment on1_other{1, 20, 90};
  EdgeFragment on2{2, 10, 60};

  // d_prev >= dt: stay-on-edge indicator.
  CHECK(edge_transition_prob(on1, on1_other, 10, 10, est) == 1.0);
  CHECK(edge_transition_prob(on1, on2, 10, 10, est) == 0.0);
  // d_prev < dt: simulated probabilities by exact fragment match.
  CHECK(edge_transition_prob(on1, est.targets[0], 3, 10, est) == doctest::Approx(0.7));
  CHECK(edge_transition_prob(on1, est.targets[1], 3, 10, est) == doctest::Approx(0.3));
  CHECK(edge_transition_prob(on1, on1_other, 3, 10, est) == 0.0);  // not a target
}

TEST_CASE("single-location inference picks the longest fragment") {
  Network net = make_corridor();
  // Pin every edge's travel time so duration mass is a single certain value.
  std::vector<TravelTimeDistribution> dists(net.edges().size(),
                                            TravelTimeDistribution(
                                                std::map<int, std::int64_t>{{10, 1}}));
  PrunedSequence seq;
  seq.sets = {{{0, 10, 40}, {1, 0, 90}, {2, 20, 50}}};
  seq.most_compact = {false};
  std::vector<CellularLocation> cls{mk_cl(100, net, {100, 0})};

  MotionConfig cfg;
  auto res = infer_edge_sequence(seq, cls, net, dists, cfg);
  CHECK(!res.fallback);
  CHECK(res.fragment_idx[0] == 1);
  CHECK(res.fragments[0].eid == 1);
  // Score: uniform initial prior, certain duration, emission 90/150.
  double want = std::log(1.0 / 3.0);
  want += 0.0;
  want += std::log(90.0 / 150.0);
  CHECK(res.log_prob == want);
}

TEST_CASE("exact ties resolve to the lowest edge id and smallest duration") {
  // Two disconnected identical edges far from a dead-end source edge: no
  // particle can land, so both targets keep exactly the prior probability.
  std::vector<Vertex> vs{mk_vertex(0, 0, 0), mk_vertex(1, 100, 0),
                         mk_vertex(2, 5000, 0), mk_vertex(3, 5100, 0),
                         mk_vertex(4, 5000, 300), mk_vertex(5, 5100, 300)};
  std::vector<Edge> es{mk_edge(2, 0, 1), mk_edge(5, 2, 3), mk_edge(9, 4, 5)};
  Network net = Network::from_records(vs, es, 2, 0);
  std::vector<TravelTimeDistribution> dists(3, TravelTimeDistribution(
                                                   std::map<int, std::int64_t>{{2, 1}}));

  PrunedSequence seq;
  seq.sets = {{{2, 0, 100}},                      // source, scaled duration 1
              {{5, 0, 100}, {9, 0, 100}}};       // identical twins, sorted by eid
  seq.most_compact = {true, false};
  std::vector<CellularLocation> cls{mk_cl(0, net, {50, 0}), mk_cl(10, net, {5050, 150})};

  MotionConfig cfg;
  auto res = infer_edge_sequence(seq, cls, net, dists, cfg);
  CHECK(!res.fallback);
  CHECK(res.fragments[1].eid == 5);  // tie broken toward the lower edge id

  // Same-score duration tie on a single location: the smaller duration wins.
  Network corridor = make_corridor();
  std::vector<TravelTimeDistribution> two(corridor.edges().size(),
                                          TravelTimeDistribution(
                                              std::map<int, std::int64_t>{{4, 1}, {6, 1}}));
  PrunedSequence one;
  one.sets = {{{0, 0, 100}}};  // frac 0.5: durations {2, 3}, equal mass
  one.most_compact = {true};
  std::vector<CellularLocation> single{mk_cl(0, corridor, {50, 0})};
  auto r2 = infer_edge_sequence(one, single, corridor, two, cfg);
  CHECK(r2.durations[0] == 2);
}

TEST_CASE("dynamic program matches exhaustive enumeration bit for bit") {
  Network net = make_corridor(8);
  Rng rng(5150);

  int checked = 0;
  for (int trial = 0; trial < 120; ++trial) {
    // Random per-edge travel-time distributions with small support.
    std::vector<TravelTimeDistribution> dists;
    for (std::size_t e = 0; e < net.edges().size(); ++e) {
      std::map<int, std::int64_t> m;
      int support = 1 + int(rng.uniform_index(3));
      while (int(m.size()) < support)
        m[3 + int(rng.uniform_index(25))] = 1 + std::int64_t(rng.uniform_index(5));
      dists.push_back(TravelTimeDistribution(m));
    }

    // Random candidate chain along the corridor.
    std::size_t n = 2 + rng.uniform_index(3);
    std::vector<FragmentSet> sets(n);
    std::vector<std::int64_t> ts(n);
    std::vector<CellularLocation> cls;
    std::int64_t t = 0;
    for (std::size_t k = 0; k < n; ++k) {
      t += 4 + std::int64_t(rng.uniform_index(12));
      ts[k] = t;
      std::size_t sz = 1 + rng.uniform_index(3);
      std::uint64_t base = rng.uniform_index(5);
      for (std::size_t j = 0; j < sz; ++j) {
        std::uint64_t eid = std::min<std::uint64_t>(base + j, 7);
        double lo = rng.uniform(0.0, 60.0);
        sets[k].push_back({eid, lo, lo + rng.uniform(5.0, 100.0 - lo)});
      }
      cls.push_back(mk_cl(t, net, {double(100 * (k + 1)), 0.0}));
    }

    MotionConfig cfg;
    cfg.n_particles = 10;
    cfg.rng_seed = 31337 + std::uint64_t(trial);
    cfg.policy = (trial % 3 == 0) ? DiffusionPolicy::directionP : DiffusionPolicy::evenP;

    PrunedSequence seq;
    seq.sets = sets;
    seq.most_compact.assign(n, false);

    // Shared cache: oracle and production code must see identical estimates.
    std::vector<Vec2> xs;
    for (const auto& cl : cls) xs.push_back(net.projection().to_xy(cl.lat, cl.lon));
    TransitionCache cache(net, dists, seq.sets, ts, xs, cfg);

    auto res = infer_edge_sequence(seq, cls, net, dists, cfg, cache);
    auto want = brute_force(seq.sets, ts, net, dists, cache);

    if (!want.found) {
      CHECK(res.fallback);
      CHECK(res.log_prob == kNegInf);
      continue;
    }
    ++checked;
    CHECK(!res.fallback);
    CHECK(res.log_prob == want.lp);  // bit-identical accumulation
    REQUIRE(want.states.size() == n);
    for (std::size_t k = 0; k < n; ++k) {
      CHECK(res.fragment_idx[k] == want.states[k].f);
      CHECK(res.durations[k] == want.states[k].d);
    }

    // The cache-owning overload must agree with the shared-cache run.
    auto res2 = infer_edge_sequence(seq, cls, net, dists, cfg);
    CHECK(res2.log_prob == res.log_prob);
    CHECK(res2.fragment_idx == res.fragment_idx);
  }
  CHECK(checked > 60);  // most instances exercised the full comparison
}

TEST_CASE("trellis work grows linearly with the number of locations") {
  Network net = make_corridor(8);
  std::vector<TravelTimeDistribution> dists(net.edges().size(),
                                            TravelTimeDistribution(
                                                std::map<int, std::int64_t>{
                                                    {8, 1}, {12, 1}, {20, 1}}));
  MotionConfig cfg;
  cfg.n_particles = 5;

  auto run = [&](std::size_t n) {
    PrunedSequence seq;
    std::vector<CellularLocation> cls;
    for (std::size_t k = 0; k < n; ++k) {
      std::uint64_t eid = k % 8;
      seq.sets.push_back({{eid, 0, 60}, {(eid + 1) % 8, 20, 100}});
      cls.push_back(mk_cl(std::int64_t(10 * k), net, {double(100 * (eid + 1)), 0.0}));
    }
    seq.most_compact.assign(n, false);
    auto res = infer_edge_sequence(seq, cls, net, dists, cfg);
    return res.expansions;
  };

  auto e50 = run(50);
  auto e100 = run(100);
  auto e200 = run(200);
  auto e400 = run(400);
  // Per-location cost is bounded: doubling the input roughly doubles the work.
  CHECK(double(e100) / double(e50) < 2.6);
  CHECK(double(e200) / double(e100) < 2.6);
  CHECK(double(e400) / double(e200) < 2.6);
  CHECK(e400 > e200);
  CHECK(e200 > e100);
  CHECK(e100 > e50);
}

TEST_CASE("location inference holds, marks, and trims correctly for one observation") {
  Network net = make_corridor();
  ShortestPaths sp(net);
  InferenceResult inf;
  inf.fragments = {{0, 0, 100}};
  inf.fragment_idx = {0};
  inf.durations = {1};
  inf.used_transitions = {nullptr};
  std::vector<CellularLocation> cls{mk_cl(105, net, {50, 0})};

  auto out = infer_locations(inf, cls, 100, 110, net, sp, std::nullopt, 1);
  REQUIRE(out.records.size() == 10);
  Vec2 mid = net.edges()[0].point_at(50.0);
  for (std::size_t i = 0; i < out.records.size(); ++i) {
    const auto& r = out.records[i];
    CHECK(r.t == 100 + std::int64_t(i));
    Vec2 xy = net.projection().to_xy(r.lat, r.lon);
    CHECK(distance(xy, mid) <= 1e-6);
    if (r.t == 105) {
      CHECK(r.prov == Provenance::observed_cleansed);
    } else {
      CHECK(r.prov == Provenance::inferred_missing);
    }
  }

  CHECK_THROWS(infer_locations(inf, {}, 100, 110, net, sp, std::nullopt, 1));
  CHECK_THROWS(infer_locations(inf, cls, 110, 100, net, sp, std::nullopt, 1));
  std::vector<CellularLocation> twocls{mk_cl(101, net, {50, 0}), mk_cl(102, net, {50, 0})};
  CHECK_THROWS(infer_locations(inf, twocls, 100, 110, net, sp, std::nullopt, 1));
}

TEST_CASE("gap seconds interpolate at constant speed along the edge") {
  Network net = make_corridor();
  ShortestPaths sp(net);
  // Two observations on one long stretch: midpoints 50 m and 400 m along the
  // corridor (edge 0 and edge 3); no stochastic transition recorded.
  InferenceResult inf;
  inf.fragments = {{0, 0, 100}, {3, 50, 150}};
  inf.fragment_idx = {0, 0};
  inf.durations = {1, 1};
  inf.used_transitions = {nullptr, nullptr};
  std::vector<CellularLocation> cls{mk_cl(100, net, {50, 0}), mk_cl(110, net, {400, 0})};

  auto out = infer_locations(inf, cls, 100, 110, net, sp, std::nullopt, 1);
  REQUIRE(out.records.size() == 10);
  // Start at 50 m absolute, end at 400 m (wrapped to edge 3 offset 100):
  // inferred seconds advance 35 m each.
  for (std::size_t i = 0; i < out.records.size(); ++i) {
    double want_abs = 50.0 + 35.0 * double(i);
    Vec2 xy = net.projection().to_xy(out.records[i].lat, out.records[i].lon);
    std::uint64_t eid = std::min<std::uint64_t>(std::uint64_t(want_abs / 100.0), 7);
    Vec2 want = net.edge_by_id(eid).point_at(want_abs - double(eid) * 100.0);
    CHECK(distance(xy, want) <= 1e-6);
  }
  CHECK(out.records[0].prov == Provenance::observed_cleansed);
  for (std::size_t i = 1; i < 10; ++i)
    CHECK(out.records[i].prov == Provenance::inferred_missing);
}

TEST_CASE("gap seconds follow a landed particle's breadcrumbs when available") {
  Network net = make_corridor();
  // Fast, certain edges: particles always run ahead through the corridor.
  std::vector<TravelTimeDistribution> dists(net.edges().size(),
                                            TravelTimeDistribution(
                                                std::map<int, std::int64_t>{{4, 1}}));
  ShortestPaths sp(net);

  PrunedSequence seq;
  seq.sets = {{{0, 40, 60}}, {{2, 0, 100}}};
  seq.most_compact = {true, true};
  std::vector<CellularLocation> cls{mk_cl(100, net, {50, 0}), mk_cl(110, net, {250, 0})};

  MotionConfig cfg;
  cfg.rng_seed = 88;
  std::vector<std::int64_t> ts{100, 110};
  std::vector<Vec2> xs{net.projection().to_xy(cls[0].lat, cls[0].lon),
                       net.projection().to_xy(cls[1].lat, cls[1].lon)};
  TransitionCache cache(net, dists, seq.sets, ts, xs, cfg);
  auto inf = infer_edge_sequence(seq, cls, net, dists, cfg, cache);
  REQUIRE(inf.used_transitions[1] != nullptr);

  auto out = infer_locations(inf, cls, 100, 110, net, sp, std::nullopt, cfg.rng_seed);
  REQUIRE(out.records.size() == 10);

  // Recompute which particle the fill must follow: one uniform draw from the
  // landed set, seeded by (seed, step index, fill lane).
  const TransitionEstimate& est = *inf.used_transitions[1];
  const auto& landed = est.landed[inf.fragment_idx[1]];
  REQUIRE(!landed.empty());
  Rng pick(mix_seed(cfg.rng_seed, 1, 0x66696c6cULL));
  const Particle& par = est.particles[landed[pick.uniform_index(landed.size())]];

  for (std::int64_t s = 1; s <= 9; ++s) {
    const Crumb& c = par.trace[std::size_t(s) - 1];
    Vec2 want = net.edge_by_id(c.eid).point_at(c.offset_m);
    Vec2 got = net.projection().to_xy(out.records[std::size_t(s)].lat,
                                      out.records[std::size_t(s)].lon);
    CHECK(distance(got, want) <= 1e-9);
  }
}

TEST_CASE("a lead anchor shapes the seconds before the first observation") {
  Network net = make_corridor();
  ShortestPaths sp(net);
  InferenceResult inf;
  inf.fragments = {{2, 0, 100}};  // observation midpoint at absolute 250 m
  inf.fragment_idx = {0};
  inf.durations = {1};
  inf.used_transitions = {nullptr};
  std::vector<CellularLocation> cls{mk_cl(105, net, {250, 0})};

  // Lead anchor five seconds earlier at absolute 200 m: records at 100..104
  // move from 200 m toward 250 m instead of holding.
  auto anchored = infer_locations(inf, cls, 100, 110, net, sp,
                                  std::make_pair(std::int64_t(100),
                                                 NetworkPoint{1, 100.0}),
                                  1);
  REQUIRE(anchored.records.size() == 10);
  Vec2 lead = net.edge_by_id(1).point_at(100.0);
  Vec2 first = net.projection().to_xy(anchored.records[0].lat, anchored.records[0].lon);
  CHECK(distance(first, lead) <= 1e-6);
  // Halfway now sits well away from both endpoints.
  Vec2 twoin = net.projection().to_xy(anchored.records[2].lat, anchored.records[2].lon);
  Vec2 obs_mid = net.edge_by_id(2).point_at(50.0);
  CHECK(distance(twoin, lead) > 10.0);
  CHECK(distance(twoin, obs_mid) > 10.0);
  // The unanchored run holds at the observation midpoint instead.
  auto held = infer_locations(inf, cls, 100, 110, net, sp, std::nullopt, 1);
  Vec2 h0 = net.projection().to_xy(held.records[0].lat, held.records[0].lon);
  CHECK(distance(h0, obs_mid) <= 1e-6);

  // Records never leave the window even with the out-of-window anchor.
  for (const auto& r : anchored.records) {
    CHECK(r.t >= 100);
    CHECK(r.t < 110);
  }
}

TEST_CASE("a lookahead observation shapes the tail without appearing in it") {
  Network net = make_corridor();
  ShortestPaths sp(net);
  InferenceResult inf;
  inf.fragments = {{0, 0, 100}, {1, 0, 100}};
  inf.fragment_idx = {0, 0};
  inf.durations = {1, 1};
  inf.used_transitions = {nullptr, nullptr};
  // Second observation lies past the window end.
  std::vector<CellularLocation> cls{mk_cl(102, net, {50, 0}), mk_cl(112, net, {150, 0})};

  auto out = infer_locations(inf, cls, 100, 110, net, sp, std::nullopt, 1);
  REQUIRE(out.records.size() == 10);
  for (const auto& r : out.records) CHECK(r.t < 110);
  // Tail seconds move toward the lookahead instead of holding at 50 m.
  Vec2 last = net.projection().to_xy(out.records[9].lat, out.records[9].lon);
  Vec2 first_mid = net.edges()[0].point_at(50.0);
  CHECK(distance(last, first_mid) > 50.0);
}

TEST_CASE("disconnected anchors fall back to straight-line interpolation") {
  // Two separate components: the fill cannot route over the network.
  std::vector<Vertex> vs{mk_vertex(0, 0, 0), mk_vertex(1, 100, 0),
                         mk_vertex(2, 0, 400), mk_vertex(3, 100, 400)};
  std::vector<Edge> es{mk_edge(0, 0, 1), mk_edge(1, 2, 3)};
  Network net = Network::from_records(vs, es, 2, 0);
  ShortestPaths sp(net);

  InferenceResult inf;
  inf.fragments = {{0, 0, 100}, {1, 0, 100}};
  inf.fragment_idx = {0, 0};
  inf.durations = {1, 1};
  inf.used_transitions = {nullptr, nullptr};
  std::vector<CellularLocation> cls{mk_cl(100, net, {50, 0}), mk_cl(108, net, {50, 400})};

  auto out = infer_locations(inf, cls, 100, 108, net, sp, std::nullopt, 1);
  REQUIRE(out.records.size() == 8);
  Vec2 a = net.edges()[0].point_at(50.0);
  Vec2 b = net.edges()[1].point_at(50.0);
  for (std::size_t i = 0; i < out.records.size(); ++i) {
    Vec2 xy = net.projection().to_xy(out.records[i].lat, out.records[i].lon);
    Vec2 want = a + (double(i) / 8.0) * (b - a);
    CHECK(distance(xy, want) <= 1e-6);
  }
}
