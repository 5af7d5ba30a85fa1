#include "dtnc/motion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dtnc/rng.hpp"

namespace dtnc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::uint64_t kTransStream = 0x7472616eULL;
constexpr std::uint64_t kFillStream = 0x66696c6cULL;

double log_or_neginf(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

struct Node {
  double lp = kNegInf;
  std::int32_t prev_frag = -1;
  std::int32_t prev_dur = -1;
};

std::vector<std::int64_t> collect_timestamps(const std::vector<CellularLocation>& cls) {
  std::vector<std::int64_t> ts;
  ts.reserve(cls.size());
  for (const auto& cl : cls) ts.push_back(cl.t);
  return ts;
}

std::vector<Vec2> collect_positions(const std::vector<CellularLocation>& cls,
                                    const Network& net) {
  std::vector<Vec2> xs;
  xs.reserve(cls.size());
  for (const auto& cl : cls) xs.push_back(net.projection().to_xy(cl.lat, cl.lon));
  return xs;
}

}  // namespace

int scale_duration(int d, const Edge& e, const EdgeFragment& ef) {
  double frac = (e.length_m - ef.p_c()) / e.length_m;
  return static_cast<int>(std::floor(static_cast<double>(d) * frac + 0.5));
}

std::map<int, double> scaled_duration_masses(const TravelTimeDistribution& dist,
                                             const Edge& e, const EdgeFragment& ef) {
  std::map<int, double> masses;
  double total = static_cast<double>(dist.total_count());
  for (const auto& [t, c] : dist.entries())
    masses[scale_duration(t, e, ef)] += static_cast<double>(c) / total;
  return masses;
}

double duration_prob(int i, int j, const Edge& e, const EdgeFragment& ef,
                     std::int64_t dt, const TravelTimeDistribution& dist) {
  if (i == 0) {
    auto masses = scaled_duration_masses(dist, e, ef);
    auto it = masses.find(j);
    return it == masses.end() ? 0.0 : it->second;
  }
  if (i >= dt) return j == i - static_cast<int>(dt) ? 1.0 : 0.0;
  return 0.0;
}

double edge_transition_prob(const EdgeFragment& ef_prev, const EdgeFragment& ef_next,
                            int d_prev, std::int64_t dt, const TransitionEstimate& est) {
  if (d_prev >= dt) return ef_prev.eid == ef_next.eid ? 1.0 : 0.0;
  for (std::size_t j = 0; j < est.targets.size(); ++j)
    if (est.targets[j] == ef_next) return est.probs[j];
  return 0.0;
}

TransitionCache::TransitionCache(const Network& net,
                                 const std::vector<TravelTimeDistribution>& dists,
                                 const std::vector<FragmentSet>& sets,
                                 const std::vector<std::int64_t>& timestamps,
                                 const std::vector<Vec2>& positions,
                                 const MotionConfig& cfg)
    : net_(&net),
      dists_(&dists),
      sets_(&sets),
      timestamps_(&timestamps),
      positions_(&positions),
      cfg_(cfg) {}

std::shared_ptr<const TransitionEstimate> TransitionCache::get(std::size_t k,
                                                               std::size_t src_idx) {
  auto key = std::make_pair(k, src_idx);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  const EdgeFragment& src = (*sets_)[k - 1][src_idx];
  std::int64_t dt = (*timestamps_)[k] - (*timestamps_)[k - 1];
  std::uint64_t seed = mix_seed(cfg_.rng_seed, k, src.eid, kTransStream);
  auto est = std::make_shared<TransitionEstimate>(simulate_transition(
      src, (*sets_)[k], dt, *net_, *dists_, cfg_.n_particles, cfg_.gamma0, cfg_.policy,
      seed, std::make_pair((*positions_)[k - 1], (*positions_)[k])));
  cache_.emplace(key, est);
  return est;
}

InferenceResult infer_edge_sequence(const PrunedSequence& pruned,
                                    const std::vector<CellularLocation>& cls,
                                    const Network& net,
                                    const std::vector<TravelTimeDistribution>& dists,
                                    const MotionConfig& cfg) {
  auto ts = collect_timestamps(cls);
  auto xs = collect_positions(cls, net);
  TransitionCache cache(net, dists, pruned.sets, ts, xs, cfg);
  return infer_edge_sequence(pruned, cls, net, dists, cfg, cache);
}

InferenceResult infer_edge_sequence(const PrunedSequence& pruned,
                                    const std::vector<CellularLocation>& cls,
                                    const Network& net,
                                    const std::vector<TravelTimeDistribution>& dists,
                                    const MotionConfig& /*cfg*/, TransitionCache& cache) {
  const auto& sets = pruned.sets;
  std::size_t n = sets.size();
  if (n == 0 || cls.size() != n)
    throw std::invalid_argument("infer_edge_sequence: bad sequence sizes");
  for (const auto& s : sets)
    if (s.empty()) throw std::invalid_argument("infer_edge_sequence: empty candidate set");

  auto ts = collect_timestamps(cls);

  InferenceResult res;
  res.fragment_idx.assign(n, 0);
  res.fragments.resize(n);
  res.durations.assign(n, 0);
  res.used_transitions.assign(n, nullptr);

  // Log emission per location/fragment.
  std::vector<std::vector<double>> lemis(n);
  for (std::size_t k = 0; k < n; ++k) {
    auto e = emission(sets[k]);
    lemis[k].reserve(e.size());
    for (double p : e) lemis[k].push_back(log_or_neginf(p));
  }

  // Fresh-entry duration masses per (location, fragment).
  std::vector<std::vector<std::map<int, double>>> masses(n);
  for (std::size_t k = 0; k < n; ++k) {
    masses[k].reserve(sets[k].size());
    for (const auto& f : sets[k]) {
      const Edge& e = net.edges()[net.edge_index(f.eid)];
      masses[k].push_back(scaled_duration_masses(dists[net.edge_index(f.eid)], e, f));
    }
  }

  // Trellis: per location, per fragment, remaining duration -> best node.
  std::vector<std::vector<std::map<int, Node>>> V(n);
  for (std::size_t k = 0; k < n; ++k) V[k].resize(sets[k].size());

  double init_prior = std::log(1.0 / static_cast<double>(sets[0].size()));
  for (std::size_t f = 0; f < sets[0].size(); ++f) {
    for (const auto& [j, mass] : masses[0][f]) {
      ++res.expansions;
      double lp = init_prior;
      lp += log_or_neginf(mass);
      lp += lemis[0][f];
      Node& slot = V[0][f][j];
      if (lp > slot.lp) slot = Node{lp, -1, -1};
    }
  }

  for (std::size_t k = 1; k < n; ++k) {
    std::int64_t dt = ts[k] - ts[k - 1];
    // Same-edge target index at k for each predecessor fragment (or -1).
    std::vector<std::int32_t> same_target(sets[k - 1].size(), -1);
    for (std::size_t fp = 0; fp < sets[k - 1].size(); ++fp)
      for (std::size_t ft = 0; ft < sets[k].size(); ++ft)
        if (sets[k][ft].eid == sets[k - 1][fp].eid) {
          same_target[fp] = static_cast<std::int32_t>(ft);
          break;
        }

    for (std::size_t fp = 0; fp < sets[k - 1].size(); ++fp) {
      std::shared_ptr<const TransitionEstimate> est;
      for (const auto& [dp, node] : V[k - 1][fp]) {
        if (node.lp == kNegInf) continue;
        if (dp >= dt) {
          // Remaining duration covers the gap: forced stay on the same edge.
          std::int32_t ft = same_target[fp];
          if (ft < 0) continue;
          ++res.expansions;
          double cand = node.lp;
          cand += 0.0;  // log transition prob 1
          cand += 0.0;  // log duration prob 1
          cand += lemis[k][static_cast<std::size_t>(ft)];
          int j = dp - static_cast<int>(dt);
          Node& slot = V[k][static_cast<std::size_t>(ft)][j];
          if (cand > slot.lp)
            slot = Node{cand, static_cast<std::int32_t>(fp), dp};
        } else {
          if (!est) est = cache.get(k, fp);
          for (std::size_t ft = 0; ft < sets[k].size(); ++ft) {
            double ltrans = log_or_neginf(est->probs[ft]);
            if (ltrans == kNegInf) continue;
            for (const auto& [j, mass] : masses[k][ft]) {
              ++res.expansions;
              double cand = node.lp;
              cand += ltrans;
              cand += log_or_neginf(mass);
              cand += lemis[k][ft];
              Node& slot = V[k][ft][j];
              if (cand > slot.lp)
                slot = Node{cand, static_cast<std::int32_t>(fp), dp};
            }
          }
        }
      }
    }
  }

  // Termination: best final state; ties resolved by scan order
  // (fragments ascending by edge id, durations ascending).
  double best = kNegInf;
  std::size_t best_f = 0;
  int best_d = 0;
  for (std::size_t f = 0; f < sets[n - 1].size(); ++f)
    for (const auto& [d, node] : V[n - 1][f])
      if (node.lp > best) {
        best = node.lp;
        best_f = f;
        best_d = d;
      }

  if (best == kNegInf) {
    // Degenerate trellis: fall back to per-location emission argmax.
    res.fallback = true;
    res.log_prob = kNegInf;
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t arg = 0;
      for (std::size_t f = 1; f < sets[k].size(); ++f)
        if (lemis[k][f] > lemis[k][arg]) arg = f;
      res.fragment_idx[k] = arg;
      res.fragments[k] = sets[k][arg];
    }
    return res;
  }

  res.log_prob = best;
  std::size_t f = best_f;
  int d = best_d;
  for (std::size_t k = n; k-- > 0;) {
    res.fragment_idx[k] = f;
    res.fragments[k] = sets[k][f];
    res.durations[k] = d;
    const Node& node = V[k][f].at(d);
    if (k > 0) {
      std::int64_t dt = ts[k] - ts[k - 1];
      if (node.prev_dur < dt) res.used_transitions[k] = cache.get(k, node.prev_frag);
      f = static_cast<std::size_t>(node.prev_frag);
      d = node.prev_dur;
    }
  }
  return res;
}

namespace {

// Piecewise network path between two network points, for constant-speed fill.
struct FillPath {
  struct Piece {
    std::uint64_t eid;
    double off_a;
    double off_b;
  };
  std::vector<Piece> pieces;
  double total = 0.0;
  bool planar = false;  // fallback: straight-line between endpoints
  Vec2 pa, pb;

  Vec2 eval(double s, const Network& net) const {
    if (planar) {
      double f = total > 0.0 ? s / total : 0.0;
      return pa + f * (pb - pa);
    }
    for (const auto& p : pieces) {
      double len = std::abs(p.off_b - p.off_a);
      if (s <= len || &p == &pieces.back()) {
        double off = p.off_a + (p.off_b >= p.off_a ? std::min(s, len) : -std::min(s, len));
        return net.edge_by_id(p.eid).point_at(off);
      }
      s -= len;
    }
    return pa;
  }
};

FillPath build_fill_path(const NetworkPoint& a, const NetworkPoint& b, const Network& net,
                         const ShortestPaths& sp) {
  FillPath fp;
  const Edge& ea = net.edge_by_id(a.eid);
  const Edge& eb = net.edge_by_id(b.eid);
  fp.pa = ea.point_at(a.offset_m);
  fp.pb = eb.point_at(b.offset_m);

  double d_same = std::numeric_limits<double>::infinity();
  if (a.eid == b.eid && b.offset_m >= a.offset_m) d_same = b.offset_m - a.offset_m;
  double d_via = (ea.length_m - a.offset_m) + sp.vertex_distance(ea.d_idx, eb.s_idx) +
                 b.offset_m;

  if (!std::isinf(d_same) && d_same <= d_via) {
    fp.pieces.push_back({a.eid, a.offset_m, b.offset_m});
    fp.total = d_same;
    return fp;
  }
  if (std::isinf(d_via)) {
    fp.planar = true;
    fp.total = distance(fp.pa, fp.pb);
    return fp;
  }
  fp.pieces.push_back({a.eid, a.offset_m, ea.length_m});
  for (auto ei : sp.edge_path(ea.d_idx, eb.s_idx)) {
    const Edge& e = net.edges()[ei];
    fp.pieces.push_back({e.eid, 0.0, e.length_m});
  }
  fp.pieces.push_back({b.eid, 0.0, b.offset_m});
  fp.total = d_via;
  return fp;
}

}  // namespace

CleanedTrajectory infer_locations(
    const InferenceResult& inf, const std::vector<CellularLocation>& cls,
    std::int64_t w_start, std::int64_t w_end, const Network& net,
    const ShortestPaths& sp,
    std::optional<std::pair<std::int64_t, NetworkPoint>> lead_anchor,
    std::uint64_t rng_seed) {
  if (cls.empty() || inf.fragments.size() != cls.size())
    throw std::invalid_argument("infer_locations: need one fragment per location");
  if (w_end <= w_start)
    throw std::invalid_argument("infer_locations: empty window");

  struct Anchor {
    std::int64_t t;
    NetworkPoint pt;
    bool observed;
    std::size_t k;  // index into cls, or npos for the lead anchor
  };
  constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::vector<Anchor> anchors;
  if (lead_anchor && lead_anchor->first < cls.front().t)
    anchors.push_back({lead_anchor->first, lead_anchor->second, false, npos});
  for (std::size_t k = 0; k < cls.size(); ++k) {
    const EdgeFragment& f = inf.fragments[k];
    anchors.push_back({cls[k].t, NetworkPoint{f.eid, f.p_c()}, true, k});
  }

  auto point_of = [&](const NetworkPoint& p) { return net.edge_by_id(p.eid).point_at(p.offset_m); };
  auto emit = [&](std::vector<CleanRecord>& recs, std::int64_t t, Vec2 xy, Provenance prov) {
    CleanRecord r;
    r.t = t;
    net.projection().to_latlon(xy, r.lat, r.lon);
    r.prov = prov;
    recs.push_back(r);
  };

  CleanedTrajectory out;
  out.object_id = cls.front().object_id;
  out.fallback = inf.fallback;
  out.records.reserve(static_cast<std::size_t>(w_end - w_start));

  std::size_t seg = 0;  // current anchor segment [seg, seg+1]
  // Per-segment fill state, built lazily when a gap second is first needed.
  std::size_t built_seg = npos;
  const Particle* seg_particle = nullptr;
  FillPath seg_path;

  for (std::int64_t t = w_start; t < w_end; ++t) {
    while (seg + 1 < anchors.size() && anchors[seg + 1].t <= t) ++seg;

    if (t <= anchors.front().t) {
      emit(out.records, t, point_of(anchors.front().pt),
           (t == anchors.front().t && anchors.front().observed)
               ? Provenance::observed_cleansed
               : Provenance::inferred_missing);
      continue;
    }
    if (seg == anchors.size() - 1) {
      // Past the last anchor: hold position.
      emit(out.records, t, point_of(anchors.back().pt),
           (t == anchors.back().t && anchors.back().observed)
               ? Provenance::observed_cleansed
               : Provenance::inferred_missing);
      continue;
    }
    if (t == anchors[seg].t) {
      emit(out.records, t, point_of(anchors[seg].pt),
           anchors[seg].observed ? Provenance::observed_cleansed
                                 : Provenance::inferred_missing);
      continue;
    }

    // Strictly inside segment (seg, seg+1): fill.
    const Anchor& a = anchors[seg];
    const Anchor& b = anchors[seg + 1];
    if (built_seg != seg) {
      built_seg = seg;
      seg_particle = nullptr;
      // Particle fill applies between consecutive observations whose winning
      // step was a stochastic transition with at least one landed particle.
      if (a.k != npos && b.k == a.k + 1 && inf.used_transitions[b.k]) {
        const TransitionEstimate& est = *inf.used_transitions[b.k];
        const auto& landed = est.landed[inf.fragment_idx[b.k]];
        if (!landed.empty()) {
          Rng rng(mix_seed(rng_seed, b.k, kFillStream));
          seg_particle = &est.particles[landed[rng.uniform_index(landed.size())]];
        }
      }
      if (!seg_particle) seg_path = build_fill_path(a.pt, b.pt, net, sp);
    }

    if (seg_particle) {
      std::int64_t s = t - a.t;  // 1 .. gap-1
      const auto& trace = seg_particle->trace;
      Crumb c;
      if (s >= 1 && static_cast<std::size_t>(s) <= trace.size())
        c = trace[static_cast<std::size_t>(s) - 1];
      else
        c = Crumb{seg_particle->eid, seg_particle->offset_m};
      emit(out.records, t, net.edge_by_id(c.eid).point_at(c.offset_m),
           Provenance::inferred_missing);
    } else {
      double frac = static_cast<double>(t - a.t) / static_cast<double>(b.t - a.t);
      emit(out.records, t, seg_path.eval(frac * seg_path.total, net),
           Provenance::inferred_missing);
    }
  }
  return out;
}

}  // namespace dtnc
