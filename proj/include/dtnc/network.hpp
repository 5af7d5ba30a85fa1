#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "dtnc/geo.hpp"
#include "dtnc/travel_time.hpp"

namespace dtnc {

enum class EdgeType { trunk, motorway, subway, footway, other };

EdgeType parse_edge_type(const std::string& s);
std::string edge_type_name(EdgeType t);

struct Vertex {
  std::uint64_t vid = 0;
  double lat = 0.0;
  double lon = 0.0;
  Vec2 xy;  // planar position under the network projection
};

struct Edge {
  std::uint64_t eid = 0;
  std::size_t s_idx = 0;  // vertex indexes into Network::vertices()
  std::size_t d_idx = 0;
  EdgeType type = EdgeType::other;
  double length_m = 0.0;
  double speed_limit_mps = 0.0;
  Vec2 a;  // projected start
  Vec2 b;  // projected end

  // Planar point at arc-length offset from the edge start.
  Vec2 point_at(double offset_m) const {
    double f = length_m > 0.0 ? offset_m / length_m : 0.0;
    return {a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)};
  }
};

struct CellularLocation {
  std::string object_id;
  std::int64_t t = 0;
  double lat = 0.0;
  double lon = 0.0;
  int u = 1;
};

// Sub-segment of a directed edge in arc-length offsets from the edge start.
struct EdgeFragment {
  std::uint64_t eid = 0;
  double p_l = 0.0;
  double p_r = 0.0;

  double length() const { return p_r - p_l; }
  double p_c() const { return 0.5 * (p_l + p_r); }

  bool operator==(const EdgeFragment& o) const {
    return eid == o.eid && p_l == o.p_l && p_r == o.p_r;
  }
};

using FragmentSet = std::vector<EdgeFragment>;

// Spatial-error upper bound in meters for an uncertainty degree u in [1,5].
double uncertainty_radius(int u);

// Uniform grid over projected space mapping cells to overlapping edges.
class GridIndex {
 public:
  GridIndex() = default;

  void build(const std::vector<Edge>& edges, double cell_size_m);

  // Indexes of edges whose cells intersect the disk's bounding box
  // (a superset of the edges intersecting the disk), deduplicated.
  std::vector<std::size_t> query_disk(Vec2 center, double radius) const;

  double cell_size() const { return cell_size_; }
  bool empty() const { return cells_.empty(); }

 private:
  double cell_size_ = 100.0;
  Vec2 min_corner_;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<std::vector<std::uint32_t>> cells_;

  void cell_range(Vec2 lo, Vec2 hi, int& ix0, int& iy0, int& ix1, int& iy1) const;
};

// Directed transportation network plus per-edge travel-time distributions
// and a grid spatial index. Graph and index are immutable after load.
class Network {
 public:
  static constexpr double kMinFragmentM = 1.0;

  // Parses the JSON-lines network file, projects coordinates, builds the
  // index, and seeds every edge's travel-time distribution.
  static Network load(const std::string& path, int init_samples = 30,
                      std::uint64_t seed = 0, double cell_size_m = 100.0);

  // Assembles a network from in-memory records (used by the generator).
  static Network from_records(const std::vector<Vertex>& vertices,
                              const std::vector<Edge>& raw_edges, int init_samples,
                              std::uint64_t seed, double cell_size_m = 100.0);

  const std::vector<Vertex>& vertices() const { return vertices_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Projection& projection() const { return proj_; }
  const GridIndex& index() const { return index_; }

  std::size_t edge_index(std::uint64_t eid) const;
  const Edge& edge_by_id(std::uint64_t eid) const { return edges_[edge_index(eid)]; }
  std::size_t vertex_index(std::uint64_t vid) const;

  // Outgoing edge indexes keyed by vertex index.
  const std::vector<std::uint32_t>& outgoing(std::size_t vertex_idx) const {
    return out_edges_[vertex_idx];
  }

  // Initial distributions, one per edge index.
  const std::vector<TravelTimeDistribution>& initial_distributions() const {
    return dists_;
  }

  // Candidate fragments: every edge clipped to the disk of radius r(u)
  // around the location. Fragments shorter than kMinFragmentM are dropped.
  FragmentSet retrieve_fragments(const CellularLocation& cl) const;
  FragmentSet retrieve_fragments(Vec2 center, double radius) const;

  // Same result via a full linear scan of all edges (oracle for the index).
  FragmentSet retrieve_fragments_scan(Vec2 center, double radius) const;

 private:
  std::vector<Vertex> vertices_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::uint32_t>> out_edges_;
  std::unordered_map<std::uint64_t, std::size_t> vid_to_idx_;
  std::unordered_map<std::uint64_t, std::size_t> eid_to_idx_;
  Projection proj_;
  GridIndex index_;
  std::vector<TravelTimeDistribution> dists_;

  void finalize(int init_samples, std::uint64_t seed, double cell_size_m);
  FragmentSet clip_edges(const std::vector<std::size_t>& edge_idxs, Vec2 center,
                         double radius) const;
};

}  // namespace dtnc
