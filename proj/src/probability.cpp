#include "dtnc/probability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

#include "dtnc/rng.hpp"

namespace dtnc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLandTol = 1e-9;
}  // namespace

std::vector<double> emission(const FragmentSet& r_cl) {
  std::vector<double> out;
  if (r_cl.empty()) return out;
  double total = 0.0;
  for (const auto& f : r_cl) total += f.length();
  out.reserve(r_cl.size());
  for (const auto& f : r_cl) out.push_back(f.length() / total);
  return out;
}

std::vector<double> prior_mean(DiffusionPolicy policy, const FragmentSet& r_next,
                               const Network& net,
                               std::optional<std::pair<Vec2, Vec2>> displacement) {
  std::size_t k = r_next.size();
  std::vector<double> m(k, 0.0);
  if (k == 0) return m;
  double uniform = 1.0 / static_cast<double>(k);

  bool directional = policy == DiffusionPolicy::directionP && displacement.has_value();
  Vec2 disp;
  if (directional) {
    disp = displacement->second - displacement->first;
    if (norm(disp) <= 1e-9) directional = false;  // no direction signal
  }
  if (!directional) {
    std::fill(m.begin(), m.end(), uniform);
    return m;
  }

  // Classify each fragment's edge direction against the displacement.
  std::vector<int> cls(k);  // +1 positive, 0 neutral, -1 negative
  std::size_t n_pos = 0, n_neg = 0, n_neu = 0;
  for (std::size_t j = 0; j < k; ++j) {
    const Edge& e = net.edge_by_id(r_next[j].eid);
    Vec2 dir = e.b - e.a;
    double c = dot(dir, disp);
    if (c > 1e-12) {
      cls[j] = 1;
      ++n_pos;
    } else if (c < -1e-12) {
      cls[j] = -1;
      ++n_neg;
    } else {
      cls[j] = 0;
      ++n_neu;
    }
  }
  if (n_pos + n_neg == 0) {
    std::fill(m.begin(), m.end(), uniform);
    return m;
  }
  // Weights 2a / 1 / 0.5a over |R|; a chosen so the means sum to 1.
  double kd = static_cast<double>(k);
  double alpha = (kd - static_cast<double>(n_neu)) /
                 (2.0 * static_cast<double>(n_pos) + 0.5 * static_cast<double>(n_neg));
  for (std::size_t j = 0; j < k; ++j) {
    double w = cls[j] > 0 ? 2.0 * alpha : (cls[j] < 0 ? 0.5 * alpha : 1.0);
    m[j] = w / kd;
  }
  return m;
}

TransitionEstimate simulate_transition(const EdgeFragment& source,
                                       const FragmentSet& r_next, std::int64_t dt,
                                       const Network& net,
                                       const std::vector<TravelTimeDistribution>& dists,
                                       int n_particles, double gamma0,
                                       DiffusionPolicy policy, std::uint64_t rng_seed,
                                       std::optional<std::pair<Vec2, Vec2>> displacement) {
  if (dt < 0) throw std::invalid_argument("simulate_transition: negative time gap");
  if (n_particles < 1) throw std::invalid_argument("simulate_transition: need >= 1 particle");

  TransitionEstimate est;
  est.source = source;
  est.targets = r_next;
  est.gamma0 = gamma0;
  est.prior = prior_mean(policy, r_next, net, displacement);
  est.counts.assign(r_next.size(), 0);
  est.landed.assign(r_next.size(), {});

  std::size_t src_idx = net.edge_index(source.eid);
  const std::int64_t total_seconds = dt;

  est.particles.reserve(static_cast<std::size_t>(n_particles));
  for (int i = 0; i < n_particles; ++i) {
    Rng rng(mix_seed(rng_seed, static_cast<std::uint64_t>(i)));
    Particle par;
    std::size_t cur = src_idx;
    double offset =
        source.p_l + (static_cast<double>(i) + 0.5) * source.length() /
                         static_cast<double>(n_particles);
    par.trace.reserve(static_cast<std::size_t>(total_seconds));

    double tau = 0.0;            // elapsed simulated seconds
    std::int64_t next_crumb = 1; // next whole second to record
    bool done = total_seconds == 0;
    if (done) {
      par.eid = net.edges()[cur].eid;
      par.offset_m = offset;
    }
    int guard = 0;
    while (!done) {
      if (++guard > 1000000)
        throw std::logic_error("simulate_transition: particle failed to terminate");
      const Edge& e = net.edges()[cur];
      int t_full = dists[cur].sample(rng);
      if (t_full < 1) t_full = 1;
      double speed = e.length_m / static_cast<double>(t_full);
      double remaining = e.length_m - offset;
      double t_seg = remaining / speed;  // = t_full * remaining / |e|
      double tau_end = tau + t_seg;

      double horizon = std::min(tau_end, static_cast<double>(total_seconds));
      while (next_crumb <= total_seconds &&
             static_cast<double>(next_crumb) <= horizon + kLandTol) {
        double at = offset + speed * (static_cast<double>(next_crumb) - tau);
        at = std::min(at, e.length_m);
        par.trace.push_back(Crumb{e.eid, at});
        ++next_crumb;
      }

      if (tau_end >= static_cast<double>(total_seconds) - kLandTol) {
        double at = offset + speed * (static_cast<double>(total_seconds) - tau);
        at = std::clamp(at, 0.0, e.length_m);
        par.eid = e.eid;
        par.offset_m = at;
        done = true;
        break;
      }

      // Edge completed before the horizon: transit at e's end vertex.
      const auto& outs = net.outgoing(e.d_idx);
      if (outs.empty()) {
        // Dead end: halt in place for the remaining seconds.
        par.alive = false;
        while (next_crumb <= total_seconds) {
          par.trace.push_back(Crumb{e.eid, e.length_m});
          ++next_crumb;
        }
        par.eid = e.eid;
        par.offset_m = e.length_m;
        done = true;
        break;
      }
      cur = outs[rng.uniform_index(outs.size())];
      offset = 0.0;
      tau = tau_end;
    }
    est.particles.push_back(std::move(par));
  }

  // Tally landings per target fragment.
  for (std::size_t p = 0; p < est.particles.size(); ++p) {
    const Particle& par = est.particles[p];
    for (std::size_t j = 0; j < r_next.size(); ++j) {
      const EdgeFragment& tgt = r_next[j];
      if (par.eid == tgt.eid && par.offset_m >= tgt.p_l - kLandTol &&
          par.offset_m <= tgt.p_r + kLandTol) {
        est.counts[j] += 1;
        est.landed[j].push_back(p);
      }
    }
  }
  est.total_count = 0;
  for (auto c : est.counts) est.total_count += c;

  est.probs.assign(r_next.size(), 0.0);
  double denom = static_cast<double>(est.total_count) + gamma0;
  for (std::size_t j = 0; j < r_next.size(); ++j) {
    if (denom > 0.0) {
      est.probs[j] = (static_cast<double>(est.counts[j]) + gamma0 * est.prior[j]) / denom;
    } else {
      est.probs[j] = est.prior[j];  // no landings and no smoothing mass
    }
  }
  return est;
}

const ShortestPaths::SourceTable& ShortestPaths::table_for(std::size_t from_v) const {
  auto it = cache_.find(from_v);
  if (it != cache_.end()) return it->second;

  std::size_t nv = net_->vertices().size();
  SourceTable tab;
  tab.dist.assign(nv, kInf);
  tab.pred_edge.assign(nv, -1);
  tab.dist[from_v] = 0.0;

  using QE = std::pair<double, std::size_t>;
  std::priority_queue<QE, std::vector<QE>, std::greater<QE>> pq;
  pq.push({0.0, from_v});
  while (!pq.empty()) {
    auto [d, v] = pq.top();
    pq.pop();
    if (d > tab.dist[v]) continue;
    for (auto ei : net_->outgoing(v)) {
      const Edge& e = net_->edges()[ei];
      double nd = d + e.length_m;
      if (nd < tab.dist[e.d_idx]) {
        tab.dist[e.d_idx] = nd;
        tab.pred_edge[e.d_idx] = static_cast<std::int32_t>(ei);
        pq.push({nd, e.d_idx});
      }
    }
  }
  return cache_.emplace(from_v, std::move(tab)).first->second;
}

double ShortestPaths::vertex_distance(std::size_t from_v, std::size_t to_v) const {
  return table_for(from_v).dist[to_v];
}

double ShortestPaths::fragment_distance(const EdgeFragment& a,
                                        const EdgeFragment& b) const {
  const Edge& ea = net_->edges()[net_->edge_index(a.eid)];
  const Edge& eb = net_->edges()[net_->edge_index(b.eid)];
  double best = kInf;
  if (a.eid == b.eid && b.p_c() >= a.p_c()) best = b.p_c() - a.p_c();
  double via = (ea.length_m - a.p_c()) + vertex_distance(ea.d_idx, eb.s_idx) + b.p_c();
  return std::min(best, via);
}

double ShortestPaths::min_travel_time(const EdgeFragment& a, const EdgeFragment& b,
                                      double v_max) const {
  if (v_max <= 0.0) throw std::invalid_argument("min_travel_time: v_max must be positive");
  double d = fragment_distance(a, b);
  return d == kInf ? kInf : d / v_max;
}

std::vector<std::size_t> ShortestPaths::edge_path(std::size_t from_v,
                                                  std::size_t to_v) const {
  const SourceTable& tab = table_for(from_v);
  std::vector<std::size_t> path;
  if (tab.dist[to_v] == kInf || from_v == to_v) return path;
  std::size_t v = to_v;
  while (v != from_v) {
    std::int32_t ei = tab.pred_edge[v];
    if (ei < 0) return {};  // defensive: broken chain
    path.push_back(static_cast<std::size_t>(ei));
    v = net_->edges()[static_cast<std::size_t>(ei)].s_idx;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace dtnc
