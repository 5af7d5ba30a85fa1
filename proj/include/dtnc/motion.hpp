#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dtnc/pruning.hpp"

namespace dtnc {

struct MotionConfig {
  int n_particles = 15;
  double gamma0 = 1.0;
  DiffusionPolicy policy = DiffusionPolicy::evenP;
  std::uint64_t rng_seed = 0;
};

// Full-edge travel time d scaled to the remaining stretch past the fragment
// midpoint, rounded half-up to whole seconds.
int scale_duration(int d, const Edge& e, const EdgeFragment& ef);

// Probability mass per scaled entry duration for a fragment on its edge.
std::map<int, double> scaled_duration_masses(const TravelTimeDistribution& dist,
                                             const Edge& e, const EdgeFragment& ef);

// Remaining-duration transition probability. i == 0 means the edge was just
// entered (fresh scaled sample); i >= dt continues deterministically to
// j = i - dt; anything else is impossible.
double duration_prob(int i, int j, const Edge& e, const EdgeFragment& ef,
                     std::int64_t dt, const TravelTimeDistribution& dist);

// Edge-level transition probability: staying is forced while the remaining
// duration covers the gap; otherwise the Monte-Carlo estimate applies.
double edge_transition_prob(const EdgeFragment& ef_prev, const EdgeFragment& ef_next,
                            int d_prev, std::int64_t dt, const TransitionEstimate& est);

// Lazily computed transition estimates for one trajectory, keyed by
// (step k, source fragment index at k-1). Deterministic: each estimate's RNG
// stream is derived from (seed, k, source edge id).
class TransitionCache {
 public:
  TransitionCache(const Network& net, const std::vector<TravelTimeDistribution>& dists,
                  const std::vector<FragmentSet>& sets,
                  const std::vector<std::int64_t>& timestamps,
                  const std::vector<Vec2>& positions, const MotionConfig& cfg);

  // Estimate for moving from sets[k-1][src_idx] to the targets sets[k].
  std::shared_ptr<const TransitionEstimate> get(std::size_t k, std::size_t src_idx);

 private:
  const Network* net_;
  const std::vector<TravelTimeDistribution>* dists_;
  const std::vector<FragmentSet>* sets_;
  const std::vector<std::int64_t>* timestamps_;
  const std::vector<Vec2>* positions_;
  MotionConfig cfg_;
  std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<const TransitionEstimate>>
      cache_;
};

struct InferenceResult {
  std::vector<std::size_t> fragment_idx;  // winning fragment index per location
  std::vector<EdgeFragment> fragments;    // winning fragments
  std::vector<int> durations;             // winning remaining durations (seconds)
  double log_prob = 0.0;
  bool fallback = false;      // trellis was all -inf; used max-emission instead
  std::uint64_t expansions = 0;  // trellis work counter (complexity checks)
  // Estimate used on the winning step k-1 -> k (null for forced same-edge moves).
  std::vector<std::shared_ptr<const TransitionEstimate>> used_transitions;
};

// Most probable edge/fragment sequence over the pruned candidates via a
// log-space dynamic program over (location, fragment, remaining duration).
InferenceResult infer_edge_sequence(const PrunedSequence& pruned,
                                    const std::vector<CellularLocation>& cls,
                                    const Network& net,
                                    const std::vector<TravelTimeDistribution>& dists,
                                    const MotionConfig& cfg);

// Variant reusing an external transition cache (shared with test oracles).
InferenceResult infer_edge_sequence(const PrunedSequence& pruned,
                                    const std::vector<CellularLocation>& cls,
                                    const Network& net,
                                    const std::vector<TravelTimeDistribution>& dists,
                                    const MotionConfig& cfg, TransitionCache& cache);

enum class Provenance { observed_cleansed, inferred_missing };

inline const char* provenance_name(Provenance p) {
  return p == Provenance::observed_cleansed ? "observed_cleansed" : "inferred_missing";
}

struct CleanRecord {
  std::int64_t t = 0;
  double lat = 0.0;
  double lon = 0.0;
  Provenance prov = Provenance::inferred_missing;
};

struct CleanedTrajectory {
  std::string object_id;
  std::vector<CleanRecord> records;  // one per second of the window
  bool degraded = false;
  bool fallback = false;
};

// A position on the network (for cross-window continuity anchors).
struct NetworkPoint {
  std::uint64_t eid = 0;
  double offset_m = 0.0;
};

// Emits one record per second of [w_start, w_end): observed locations map to
// their fragment midpoints; gap seconds follow a surviving particle's
// breadcrumbs, or constant-speed movement along the network shortest path
// when no particle is available. Anchors outside the window shape the fill
// but are trimmed from the output.
CleanedTrajectory infer_locations(
    const InferenceResult& inf, const std::vector<CellularLocation>& cls,
    std::int64_t w_start, std::int64_t w_end, const Network& net,
    const ShortestPaths& sp,
    std::optional<std::pair<std::int64_t, NetworkPoint>> lead_anchor,
    std::uint64_t rng_seed);

}  // namespace dtnc
