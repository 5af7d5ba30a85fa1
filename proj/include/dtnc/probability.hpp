#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dtnc/network.hpp"

namespace dtnc {

enum class DiffusionPolicy { evenP, directionP };

// Emission probability per candidate fragment: proportional to fragment
// length. Returns a vector parallel to r_cl; empty input yields empty output
// (no-candidate condition for the caller).
std::vector<double> emission(const FragmentSet& r_cl);

// Dirichlet prior mean over target fragments. evenP is uniform; directionP
// weights fragments by the sign of the angle between the fragment's edge
// direction and the observed displacement (positive 2a, neutral 1,
// negative 0.5a, with a solved so the means sum to 1).
std::vector<double> prior_mean(DiffusionPolicy policy, const FragmentSet& r_next,
                               const Network& net,
                               std::optional<std::pair<Vec2, Vec2>> displacement);

// Breadcrumb: where a simulated particle was at one whole second.
struct Crumb {
  std::uint64_t eid = 0;
  double offset_m = 0.0;
};

struct Particle {
  std::uint64_t eid = 0;      // final edge
  double offset_m = 0.0;      // final position
  std::vector<Crumb> trace;   // trace[k] = position k+1 seconds after start
  bool alive = true;          // false once halted at a dead end
};

struct TransitionEstimate {
  EdgeFragment source;
  FragmentSet targets;
  std::vector<double> prior;          // m, parallel to targets
  std::vector<std::int64_t> counts;   // N_ij, parallel to targets
  std::int64_t total_count = 0;       // N_i = sum of counts
  double gamma0 = 1.0;
  std::vector<double> probs;          // (N_ij + g0 m_j)/(N_i + g0)
  std::vector<Particle> particles;    // all simulated particles with traces
  std::vector<std::vector<std::size_t>> landed;  // per target: particle indexes
};

// Monte-Carlo transition estimate: n_particles spread evenly over the source
// fragment travel for dt seconds (sampling per-edge travel times, uniform
// choice at vertices), then land-counts are Dirichlet-smoothed.
TransitionEstimate simulate_transition(const EdgeFragment& source,
                                       const FragmentSet& r_next, std::int64_t dt,
                                       const Network& net,
                                       const std::vector<TravelTimeDistribution>& dists,
                                       int n_particles, double gamma0,
                                       DiffusionPolicy policy, std::uint64_t rng_seed,
                                       std::optional<std::pair<Vec2, Vec2>> displacement =
                                           std::nullopt);

// Directed network shortest paths with a per-source cache. Not thread-safe;
// give each worker its own instance.
class ShortestPaths {
 public:
  explicit ShortestPaths(const Network& net) : net_(&net) {}

  // Meters from vertex from_v to vertex to_v along directed edges; +inf if
  // unreachable.
  double vertex_distance(std::size_t from_v, std::size_t to_v) const;

  // Meters from a's midpoint to b's midpoint respecting edge direction.
  double fragment_distance(const EdgeFragment& a, const EdgeFragment& b) const;

  double min_travel_time(const EdgeFragment& a, const EdgeFragment& b,
                         double v_max) const;

  // Edge indexes of a shortest vertex-to-vertex path, in travel order;
  // empty when from_v == to_v or unreachable.
  std::vector<std::size_t> edge_path(std::size_t from_v, std::size_t to_v) const;

 private:
  struct SourceTable {
    std::vector<double> dist;
    std::vector<std::int32_t> pred_edge;  // edge index reaching each vertex, -1 none
  };

  const Network* net_;
  mutable std::unordered_map<std::size_t, SourceTable> cache_;

  const SourceTable& table_for(std::size_t from_v) const;
};

}  // namespace dtnc
