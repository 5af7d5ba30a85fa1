#include "dtnc/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "dtnc/errors.hpp"

namespace dtnc {

namespace {

using nlohmann::json;

constexpr std::uint64_t kInitDistStream = 0x74646973ULL;  // distribution seeding lane

struct RawEdge {
  std::uint64_t eid = 0;
  std::uint64_t svid = 0;
  std::uint64_t dvid = 0;
  std::string type;
  double speed = 0.0;
  int line = 0;
};

std::uint64_t require_id(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key) || !j[key].is_number_unsigned())
    throw ParseError(ctx + ": missing or non-integer field '" + key + "'");
  return j[key].get<std::uint64_t>();
}

double require_number(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key) || !j[key].is_number())
    throw ParseError(ctx + ": missing or non-numeric field '" + key + "'");
  return j[key].get<double>();
}

std::string require_string(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key) || !j[key].is_string())
    throw ParseError(ctx + ": missing or non-string field '" + key + "'");
  return j[key].get<std::string>();
}

}  // namespace

EdgeType parse_edge_type(const std::string& s) {
  if (s == "trunk") return EdgeType::trunk;
  if (s == "motorway") return EdgeType::motorway;
  if (s == "subway") return EdgeType::subway;
  if (s == "footway") return EdgeType::footway;
  return EdgeType::other;
}

std::string edge_type_name(EdgeType t) {
  switch (t) {
    case EdgeType::trunk: return "trunk";
    case EdgeType::motorway: return "motorway";
    case EdgeType::subway: return "subway";
    case EdgeType::footway: return "footway";
    default: return "other";
  }
}

double uncertainty_radius(int u) {
  if (u < 1 || u > 5) throw std::domain_error("uncertainty degree must be in [1,5]");
  return 150.0 + 50.0 * (u - 1);
}

void GridIndex::build(const std::vector<Edge>& edges, double cell_size_m) {
  cell_size_ = cell_size_m;
  cells_.clear();
  nx_ = ny_ = 0;
  if (edges.empty()) return;

  double min_x = std::numeric_limits<double>::infinity();
  double min_y = min_x, max_x = -min_x, max_y = -min_x;
  for (const auto& e : edges) {
    min_x = std::min({min_x, e.a.x, e.b.x});
    min_y = std::min({min_y, e.a.y, e.b.y});
    max_x = std::max({max_x, e.a.x, e.b.x});
    max_y = std::max({max_y, e.a.y, e.b.y});
  }
  min_corner_ = {min_x - cell_size_, min_y - cell_size_};
  nx_ = static_cast<int>(std::ceil((max_x - min_corner_.x) / cell_size_)) + 1;
  ny_ = static_cast<int>(std::ceil((max_y - min_corner_.y) / cell_size_)) + 1;
  cells_.assign(static_cast<std::size_t>(nx_) * ny_, {});

  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    Vec2 lo{std::min(e.a.x, e.b.x), std::min(e.a.y, e.b.y)};
    Vec2 hi{std::max(e.a.x, e.b.x), std::max(e.a.y, e.b.y)};
    int ix0, iy0, ix1, iy1;
    cell_range(lo, hi, ix0, iy0, ix1, iy1);
    for (int iy = iy0; iy <= iy1; ++iy)
      for (int ix = ix0; ix <= ix1; ++ix)
        cells_[static_cast<std::size_t>(iy) * nx_ + ix].push_back(
            static_cast<std::uint32_t>(i));
  }
}

void GridIndex::cell_range(Vec2 lo, Vec2 hi, int& ix0, int& iy0, int& ix1,
                           int& iy1) const {
  auto clamp = [](int v, int max_v) { return std::max(0, std::min(v, max_v - 1)); };
  ix0 = clamp(static_cast<int>(std::floor((lo.x - min_corner_.x) / cell_size_)), nx_);
  iy0 = clamp(static_cast<int>(std::floor((lo.y - min_corner_.y) / cell_size_)), ny_);
  ix1 = clamp(static_cast<int>(std::floor((hi.x - min_corner_.x) / cell_size_)), nx_);
  iy1 = clamp(static_cast<int>(std::floor((hi.y - min_corner_.y) / cell_size_)), ny_);
}

std::vector<std::size_t> GridIndex::query_disk(Vec2 center, double radius) const {
  std::vector<std::size_t> out;
  if (cells_.empty()) return out;
  Vec2 lo{center.x - radius, center.y - radius};
  Vec2 hi{center.x + radius, center.y + radius};
  int ix0, iy0, ix1, iy1;
  cell_range(lo, hi, ix0, iy0, ix1, iy1);
  for (int iy = iy0; iy <= iy1; ++iy)
    for (int ix = ix0; ix <= ix1; ++ix)
      for (auto idx : cells_[static_cast<std::size_t>(iy) * nx_ + ix])
        out.push_back(idx);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Network Network::load(const std::string& path, int init_samples, std::uint64_t seed,
                      double cell_size_m) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open network file: " + path);

  Network net;
  std::vector<RawEdge> raw_edges;
  std::string line;
  int line_no = 0;
  bool edges_started = false;

  while (std::getline(in, line)) {
    ++line_no;
    std::string::size_type pos = line.find_first_not_of(" \t\r\n");
    if (pos == std::string::npos) continue;
    std::string ctx = path + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(ctx + ": invalid JSON: " + e.what());
    }
    if (!j.is_object()) throw ParseError(ctx + ": record is not a JSON object");
    if (j.contains("v")) {
      if (edges_started)
        throw ParseError(ctx + ": vertex record after edge records (vertices must come first)");
      Vertex v;
      v.vid = require_id(j, "v", ctx);
      v.lat = require_number(j, "lat", ctx);
      v.lon = require_number(j, "lon", ctx);
      if (v.lat < -90.0 || v.lat > 90.0)
        throw ValidationError(ctx + ": latitude out of range");
      if (v.lon < -180.0 || v.lon > 180.0)
        throw ValidationError(ctx + ": longitude out of range");
      if (net.vid_to_idx_.count(v.vid))
        throw ValidationError(ctx + ": duplicate vertex id " + std::to_string(v.vid));
      net.vid_to_idx_[v.vid] = net.vertices_.size();
      net.vertices_.push_back(v);
    } else if (j.contains("e")) {
      edges_started = true;
      RawEdge re;
      re.eid = require_id(j, "e", ctx);
      re.svid = require_id(j, "s", ctx);
      re.dvid = require_id(j, "d", ctx);
      re.type = require_string(j, "type", ctx);
      re.speed = require_number(j, "speed_mps", ctx);
      re.line = line_no;
      raw_edges.push_back(std::move(re));
    } else {
      throw ParseError(ctx + ": record has neither 'v' nor 'e' key");
    }
  }

  for (const auto& re : raw_edges) {
    std::string ctx = path + ":" + std::to_string(re.line);
    auto s_it = net.vid_to_idx_.find(re.svid);
    if (s_it == net.vid_to_idx_.end())
      throw ValidationError(ctx + ": edge " + std::to_string(re.eid) +
                            " references undefined vertex " + std::to_string(re.svid));
    auto d_it = net.vid_to_idx_.find(re.dvid);
    if (d_it == net.vid_to_idx_.end())
      throw ValidationError(ctx + ": edge " + std::to_string(re.eid) +
                            " references undefined vertex " + std::to_string(re.dvid));
    if (re.svid == re.dvid)
      throw ValidationError(ctx + ": self-loop edge " + std::to_string(re.eid) +
                            " rejected");
    if (re.speed <= 0.0)
      throw ValidationError(ctx + ": edge " + std::to_string(re.eid) +
                            " has non-positive speed");
    if (net.eid_to_idx_.count(re.eid))
      throw ValidationError(ctx + ": duplicate edge id " + std::to_string(re.eid));
    Edge e;
    e.eid = re.eid;
    e.s_idx = s_it->second;
    e.d_idx = d_it->second;
    e.type = parse_edge_type(re.type);
    e.speed_limit_mps = re.speed;
    net.eid_to_idx_[e.eid] = net.edges_.size();
    net.edges_.push_back(e);
  }

  net.finalize(init_samples, seed, cell_size_m);
  return net;
}

Network Network::from_records(const std::vector<Vertex>& vertices,
                              const std::vector<Edge>& raw_edges, int init_samples,
                              std::uint64_t seed, double cell_size_m) {
  Network net;
  net.vertices_ = vertices;
  for (std::size_t i = 0; i < net.vertices_.size(); ++i) {
    if (net.vid_to_idx_.count(net.vertices_[i].vid))
      throw ValidationError("duplicate vertex id " +
                            std::to_string(net.vertices_[i].vid));
    net.vid_to_idx_[net.vertices_[i].vid] = i;
  }
  net.edges_ = raw_edges;
  for (std::size_t i = 0; i < net.edges_.size(); ++i) {
    const Edge& e = net.edges_[i];
    if (e.s_idx >= net.vertices_.size() || e.d_idx >= net.vertices_.size())
      throw ValidationError("edge " + std::to_string(e.eid) +
                            " references out-of-range vertex index");
    if (e.s_idx == e.d_idx)
      throw ValidationError("self-loop edge " + std::to_string(e.eid) + " rejected");
    if (e.speed_limit_mps <= 0.0)
      throw ValidationError("edge " + std::to_string(e.eid) + " has non-positive speed");
    if (net.eid_to_idx_.count(e.eid))
      throw ValidationError("duplicate edge id " + std::to_string(e.eid));
    net.eid_to_idx_[e.eid] = i;
  }
  net.finalize(init_samples, seed, cell_size_m);
  return net;
}

void Network::finalize(int init_samples, std::uint64_t seed, double cell_size_m) {
  double min_lat = 0.0, max_lat = 0.0, min_lon = 0.0, max_lon = 0.0;
  if (!vertices_.empty()) {
    min_lat = max_lat = vertices_[0].lat;
    min_lon = max_lon = vertices_[0].lon;
    for (const auto& v : vertices_) {
      min_lat = std::min(min_lat, v.lat);
      max_lat = std::max(max_lat, v.lat);
      min_lon = std::min(min_lon, v.lon);
      max_lon = std::max(max_lon, v.lon);
    }
  }
  proj_ = Projection(0.5 * (min_lat + max_lat), 0.5 * (min_lon + max_lon));
  for (auto& v : vertices_) v.xy = proj_.to_xy(v.lat, v.lon);

  for (auto& e : edges_) {
    e.a = vertices_[e.s_idx].xy;
    e.b = vertices_[e.d_idx].xy;
    e.length_m = distance(e.a, e.b);
    if (e.length_m <= 1e-9)
      throw ValidationError("edge " + std::to_string(e.eid) + " has zero length");
  }

  out_edges_.assign(vertices_.size(), {});
  for (std::size_t i = 0; i < edges_.size(); ++i)
    out_edges_[edges_[i].s_idx].push_back(static_cast<std::uint32_t>(i));

  index_.build(edges_, cell_size_m);

  dists_.clear();
  dists_.reserve(edges_.size());
  for (const auto& e : edges_)
    dists_.push_back(init_distribution(e.length_m, e.speed_limit_mps, init_samples,
                                       mix_seed(seed, e.eid, kInitDistStream)));
}

std::size_t Network::edge_index(std::uint64_t eid) const {
  auto it = eid_to_idx_.find(eid);
  if (it == eid_to_idx_.end())
    throw std::out_of_range("unknown edge id " + std::to_string(eid));
  return it->second;
}

std::size_t Network::vertex_index(std::uint64_t vid) const {
  auto it = vid_to_idx_.find(vid);
  if (it == vid_to_idx_.end())
    throw std::out_of_range("unknown vertex id " + std::to_string(vid));
  return it->second;
}

FragmentSet Network::retrieve_fragments(const CellularLocation& cl) const {
  Vec2 center = proj_.to_xy(cl.lat, cl.lon);
  return retrieve_fragments(center, uncertainty_radius(cl.u));
}

FragmentSet Network::retrieve_fragments(Vec2 center, double radius) const {
  return clip_edges(index_.query_disk(center, radius), center, radius);
}

FragmentSet Network::retrieve_fragments_scan(Vec2 center, double radius) const {
  std::vector<std::size_t> all(edges_.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return clip_edges(all, center, radius);
}

FragmentSet Network::clip_edges(const std::vector<std::size_t>& edge_idxs, Vec2 center,
                                double radius) const {
  FragmentSet out;
  for (auto idx : edge_idxs) {
    const Edge& e = edges_[idx];
    auto ov = segment_disk_overlap(e.a, e.b, center, radius);
    if (!ov) continue;
    auto [lo, hi] = *ov;
    if (hi - lo < kMinFragmentM) continue;
    out.push_back(EdgeFragment{e.eid, lo, hi});
  }
  std::sort(out.begin(), out.end(),
            [](const EdgeFragment& x, const EdgeFragment& y) { return x.eid < y.eid; });
  return out;
}

}  // namespace dtnc
