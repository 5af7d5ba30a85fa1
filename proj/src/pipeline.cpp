#include "dtnc/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "dtnc/csv.hpp"
#include "dtnc/errors.hpp"
#include "dtnc/pruning.hpp"
#include "dtnc/rng.hpp"

namespace dtnc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto body = [&] {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  int spawn = std::min<int>(workers, static_cast<int>(n));
  pool.reserve(static_cast<std::size_t>(spawn));
  for (int w = 0; w < spawn; ++w) pool.emplace_back(body);
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

struct ObjectOutcome {
  CleanedTrajectory traj;
  std::vector<TravelTimeSample> samples;
  std::size_t dropped_no_candidates = 0;
  bool have_anchor = false;
  std::pair<std::int64_t, NetworkPoint> new_anchor;
  double da = 0.0, ol = 0.0, pc = 0.0, in = 0.0;
};

// No on-network candidates anywhere: emit the raw observations themselves,
// linearly interpolated, so the window still gets complete output.
CleanedTrajectory passthrough_trajectory(const Network& net,
                                         const std::vector<CellularLocation>& seq,
                                         std::int64_t w_start, std::int64_t w_end) {
  CleanedTrajectory out;
  out.object_id = seq.front().object_id;
  out.degraded = true;
  const Projection& proj = net.projection();
  std::vector<std::pair<std::int64_t, Vec2>> anchors;
  anchors.reserve(seq.size());
  for (const auto& cl : seq) anchors.emplace_back(cl.t, proj.to_xy(cl.lat, cl.lon));

  std::size_t seg = 0;
  for (std::int64_t t = w_start; t < w_end; ++t) {
    while (seg + 1 < anchors.size() && anchors[seg + 1].first <= t) ++seg;
    Vec2 xy;
    bool observed = false;
    if (t <= anchors.front().first) {
      xy = anchors.front().second;
      observed = t == anchors.front().first;
    } else if (seg == anchors.size() - 1) {
      xy = anchors.back().second;
      observed = t == anchors.back().first;
    } else if (t == anchors[seg].first) {
      xy = anchors[seg].second;
      observed = true;
    } else {
      double f = static_cast<double>(t - anchors[seg].first) /
                 static_cast<double>(anchors[seg + 1].first - anchors[seg].first);
      xy = anchors[seg].second + f * (anchors[seg + 1].second - anchors[seg].second);
    }
    CleanRecord r;
    r.t = t;
    proj.to_latlon(xy, r.lat, r.lon);
    r.prov = observed ? Provenance::observed_cleansed : Provenance::inferred_missing;
    out.records.push_back(r);
  }
  return out;
}

ObjectOutcome process_object(const Network& net,
                             const std::vector<TravelTimeDistribution>& dists,
                             const Config& cfg, const ServiceWindow& win,
                             const std::string& oid,
                             const std::vector<CellularLocation>& seq,
                             std::optional<std::pair<std::int64_t, NetworkPoint>> lead) {
  ObjectOutcome oc;
  std::uint64_t oseed = mix_seed(cfg.rng_seed, win.window_id, fnv1a64(oid));

  // Candidate assembly.
  auto t0 = Clock::now();
  std::vector<FragmentSet> sets;
  std::vector<CellularLocation> kept;
  for (const auto& cl : seq) {
    FragmentSet fs = net.retrieve_fragments(cl);
    if (fs.empty()) {
      ++oc.dropped_no_candidates;
      continue;
    }
    sets.push_back(std::move(fs));
    kept.push_back(cl);
  }
  oc.da = seconds_since(t0);

  if (kept.empty()) {
    oc.traj = passthrough_trajectory(net, seq, win.start_t, win.end_t);
    return oc;
  }

  ShortestPaths sp(net);

  // Combination pruning.
  t0 = Clock::now();
  bool pair_degraded = false;
  for (std::size_t i = 0; i + 1 < sets.size(); ++i) {
    double dt = static_cast<double>(kept[i + 1].t - kept[i].t);
    auto [a, b] = pairwise_prune(sets[i], sets[i + 1], dt, sp, cfg.v_max, &pair_degraded);
    sets[i] = std::move(a);
    sets[i + 1] = std::move(b);
  }
  std::vector<std::int64_t> ts;
  ts.reserve(kept.size());
  for (const auto& cl : kept) ts.push_back(cl.t);
  PrunedSequence pruned = sequence_prune(sets, ts, sp, cfg.v_max);
  pruned.degraded = pruned.degraded || pair_degraded;
  oc.pc = seconds_since(t0);

  // Inference.
  t0 = Clock::now();
  MotionConfig mc;
  mc.n_particles = cfg.n_particles;
  mc.gamma0 = cfg.gamma0;
  mc.policy = cfg.policy;
  mc.rng_seed = oseed;
  InferenceResult inf = infer_edge_sequence(pruned, kept, net, dists, mc);
  oc.traj = infer_locations(inf, kept, win.start_t, win.end_t, net, sp, lead, oseed);
  oc.traj.degraded = pruned.degraded;
  oc.in = seconds_since(t0);

  // Travel-time measurement from most-compact same-edge runs.
  t0 = Clock::now();
  CompactExtraction ex = extract_compact_runs(pruned);
  for (auto [i, j] : ex.same_edge_pairs) {
    const EdgeFragment& fa = pruned.sets[i][0];
    const EdgeFragment& fb = pruned.sets[j][0];
    const Edge& e = net.edge_by_id(fa.eid);
    auto sample = measure_travel_time(fa.eid, fa.p_c(), kept[i].t, fb.p_c(), kept[j].t,
                                      e.length_m, win.window_id);
    if (sample) oc.samples.push_back(*sample);
  }
  oc.ol = seconds_since(t0);

  // Anchor for the next window: last in-window observation's assignment.
  for (std::size_t k = kept.size(); k-- > 0;) {
    if (kept[k].t < win.end_t) {
      oc.have_anchor = true;
      oc.new_anchor = {kept[k].t,
                       NetworkPoint{inf.fragments[k].eid, inf.fragments[k].p_c()}};
      break;
    }
  }
  return oc;
}

}  // namespace

void Config::validate() const {
  if (window_len < 1) throw ConfigError("window length must be >= 1");
  if (n_particles < 1) throw ConfigError("particle count must be >= 1");
  if (epsilon <= 0.0) throw ConfigError("epsilon must be positive");
  if (delta <= 0.0 || delta >= 1.0) throw ConfigError("delta must be in (0,1)");
  if (gamma0 < 0.0) throw ConfigError("gamma0 must be non-negative");
  if (v_max <= 0.0) throw ConfigError("v_max must be positive");
  if (min_fragment_m < 0.0) throw ConfigError("min fragment length must be >= 0");
  if (init_samples < 1) throw ConfigError("init samples must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
}

Pipeline::Pipeline(const Network& net, const Config& cfg) : net_(&net), cfg_(cfg) {
  cfg_.validate();
  dists_ = net.initial_distributions();
}

void Pipeline::set_distributions(std::vector<TravelTimeDistribution> d) {
  if (d.size() != net_->edges().size())
    throw std::invalid_argument("set_distributions: need one distribution per edge");
  dists_ = std::move(d);
}

std::int64_t Pipeline::window_anchor(std::int64_t min_t, std::int64_t window_len) {
  std::int64_t q = min_t / window_len;
  if (min_t < 0 && q * window_len != min_t) --q;  // floor division
  return q * window_len;
}

WindowResult Pipeline::run_window(const ServiceWindow& win) {
  WindowResult res;
  std::vector<const std::string*> oids;
  std::vector<const std::vector<CellularLocation>*> seqs;
  oids.reserve(win.objects.size());
  for (const auto& [oid, locs] : win.objects) {
    if (locs.empty()) continue;
    oids.push_back(&oid);
    seqs.push_back(&locs);
  }

  std::vector<ObjectOutcome> outcomes(oids.size());
  parallel_for(oids.size(), cfg_.workers, [&](std::size_t i) {
    const std::string& oid = *oids[i];
    std::vector<CellularLocation> seq = *seqs[i];
    auto la = win.lookahead.find(oid);
    if (la != win.lookahead.end()) seq.push_back(la->second);
    std::optional<std::pair<std::int64_t, NetworkPoint>> lead;
    auto lit = lead_anchor_.find(oid);
    if (lit != lead_anchor_.end() && lit->second.first < seq.front().t)
      lead = lit->second;
    outcomes[i] = process_object(*net_, dists_, cfg_, win, oid, seq, lead);
  });

  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    ObjectOutcome& oc = outcomes[i];
    res.dropped_no_candidates += oc.dropped_no_candidates;
    if (oc.traj.degraded) ++res.degraded_objects;
    for (auto& s : oc.samples) res.samples.push_back(s);
    if (oc.have_anchor) lead_anchor_[*oids[i]] = oc.new_anchor;
    timings_.da_s += oc.da;
    timings_.ol_s += oc.ol;
    timings_.pc_s += oc.pc;
    timings_.in_s += oc.in;
    res.outputs.push_back(std::move(oc.traj));
  }
  timings_.windows += 1;
  timings_.object_windows += outcomes.size();
  return res;
}

void Pipeline::apply_updates(const std::vector<TravelTimeSample>& samples) {
  auto t0 = Clock::now();
  std::map<std::uint64_t, std::vector<TravelTimeSample>> by_edge;
  for (const auto& s : samples) by_edge[s.eid].push_back(s);
  for (const auto& [eid, group] : by_edge) {
    std::size_t idx = net_->edge_index(eid);
    dists_[idx] = update_distribution(dists_[idx], group, cfg_.epsilon, cfg_.delta);
  }
  timings_.ol_s += seconds_since(t0);
}

void Pipeline::run_stream(std::vector<CellularLocation> locations, std::ostream& out) {
  write_cleansed_header(out);
  if (locations.empty()) return;

  std::stable_sort(locations.begin(), locations.end(),
                   [](const CellularLocation& a, const CellularLocation& b) {
                     if (a.object_id != b.object_id) return a.object_id < b.object_id;
                     return a.t < b.t;
                   });
  std::int64_t min_t = locations.front().t, max_t = locations.front().t;
  for (const auto& cl : locations) {
    min_t = std::min(min_t, cl.t);
    max_t = std::max(max_t, cl.t);
  }
  std::int64_t anchor = window_anchor(min_t, cfg_.window_len);

  std::map<std::int64_t, ServiceWindow> windows;
  std::size_t i = 0;
  while (i < locations.size()) {
    std::size_t j = i;
    while (j < locations.size() && locations[j].object_id == locations[i].object_id) ++j;
    const std::string& oid = locations[i].object_id;
    for (std::size_t k = i; k < j; ++k) {
      std::int64_t widx = (locations[k].t - anchor) / cfg_.window_len;
      windows[widx].objects[oid].push_back(locations[k]);
    }
    // First observation past each window end, for boundary continuity.
    for (auto& [widx, win] : windows) {
      auto oit = win.objects.find(oid);
      if (oit == win.objects.end()) continue;
      if (win.lookahead.count(oid)) continue;
      std::int64_t end_t = anchor + (widx + 1) * cfg_.window_len;
      for (std::size_t k = i; k < j; ++k) {
        if (locations[k].t >= end_t) {
          win.lookahead.emplace(oid, locations[k]);
          break;
        }
      }
    }
    i = j;
  }

  for (auto& [widx, win] : windows) {
    win.window_id = static_cast<std::uint64_t>(widx);
    win.start_t = anchor + widx * cfg_.window_len;
    win.end_t = win.start_t + cfg_.window_len;
    WindowResult res = run_window(win);
    for (const auto& traj : res.outputs) write_cleansed_records(out, traj);
    apply_updates(res.samples);
  }
}

void Pipeline::save_distributions(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (std::size_t i = 0; i < net_->edges().size(); ++i) {
    nlohmann::json j;
    j["eid"] = net_->edges()[i].eid;
    auto entries = nlohmann::json::array();
    for (const auto& [t, c] : dists_[i].entries())
      entries.push_back(nlohmann::json::array({t, c}));
    j["entries"] = entries;
    out << j.dump() << '\n';
  }
}

void Pipeline::load_distributions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open distribution store: " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::string ctx = path + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(ctx + ": invalid JSON: " + e.what());
    }
    if (!j.contains("eid") || !j.contains("entries"))
      throw ParseError(ctx + ": record needs 'eid' and 'entries'");
    std::uint64_t eid = j["eid"].get<std::uint64_t>();
    std::size_t idx;
    try {
      idx = net_->edge_index(eid);
    } catch (const std::out_of_range&) {
      throw ValidationError(ctx + ": unknown edge id " + std::to_string(eid));
    }
    std::map<int, std::int64_t> m;
    for (const auto& ent : j["entries"]) {
      if (!ent.is_array() || ent.size() != 2)
        throw ParseError(ctx + ": entry must be [t, count]");
      int t = ent[0].get<int>();
      std::int64_t c = ent[1].get<std::int64_t>();
      if (c < 1) throw ValidationError(ctx + ": counts must be >= 1");
      m[t] += c;
    }
    if (m.empty()) throw ValidationError(ctx + ": empty distribution");
    dists_[idx] = TravelTimeDistribution(m);
  }
}

}  // namespace dtnc
