#include "dtnc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "dtnc/errors.hpp"
#include "dtnc/rng.hpp"

namespace dtnc {

namespace {

using nlohmann::json;

constexpr double kPi = 3.14159265358979323846;
constexpr std::uint64_t kWalkStream = 0x77616c6bULL;

double standard_normal(Rng& rng) {
  double u1 = 1.0 - rng.next_unit();  // (0, 1]
  double u2 = rng.next_unit();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

void latlon_from_plane(const GridSpec& g, double x, double y, double& lat, double& lon) {
  constexpr double rad_to_deg = 180.0 / kPi;
  double cos0 = std::cos(g.origin_lat * kPi / 180.0);
  lat = g.origin_lat + y / Projection::kEarthRadius * rad_to_deg;
  lon = g.origin_lon + x / (Projection::kEarthRadius * cos0) * rad_to_deg;
}

}  // namespace

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": invalid JSON: " + e.what());
  }

  Scenario sc;
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    GridSpec& gs = sc.grid;
    if (g.contains("nx")) gs.nx = g["nx"].get<int>();
    if (g.contains("ny")) gs.ny = g["ny"].get<int>();
    if (g.contains("spacing_m")) gs.spacing_m = g["spacing_m"].get<double>();
    if (g.contains("subdivisions")) gs.subdivisions = g["subdivisions"].get<int>();
    if (g.contains("speed_mps")) gs.speed_mps = g["speed_mps"].get<double>();
    if (g.contains("type")) gs.edge_type = g["type"].get<std::string>();
    if (g.contains("bidirectional")) gs.bidirectional = g["bidirectional"].get<bool>();
    if (g.contains("origin_lat")) gs.origin_lat = g["origin_lat"].get<double>();
    if (g.contains("origin_lon")) gs.origin_lon = g["origin_lon"].get<double>();
  }
  if (j.contains("objects")) sc.objects = j["objects"].get<int>();
  if (j.contains("duration_s")) sc.duration_s = j["duration_s"].get<std::int64_t>();
  if (j.contains("start_t")) sc.start_t = j["start_t"].get<std::int64_t>();
  if (j.contains("speed_range_mps")) {
    const auto& r = j["speed_range_mps"];
    if (!r.is_array() || r.size() != 2)
      throw ParseError(path + ": speed_range_mps must be [lo, hi]");
    sc.speed_lo = r[0].get<double>();
    sc.speed_hi = r[1].get<double>();
  }
  if (j.contains("u_weights")) {
    sc.u_weights.clear();
    for (const auto& [key, val] : j["u_weights"].items()) {
      int u = std::stoi(key);
      if (u < 1 || u > 5) throw ValidationError(path + ": u_weights key out of [1,5]");
      double w = val.get<double>();
      if (w < 0.0) throw ValidationError(path + ": negative u weight");
      sc.u_weights.emplace_back(u, w);
    }
    std::sort(sc.u_weights.begin(), sc.u_weights.end());
  }
  if (j.contains("gap_mean_s")) sc.gap_mean = j["gap_mean_s"].get<std::int64_t>();
  if (j.contains("gap_jitter_s")) sc.gap_jitter = j["gap_jitter_s"].get<std::int64_t>();
  if (j.contains("noise_sigma_frac")) sc.noise_sigma_frac = j["noise_sigma_frac"].get<double>();
  if (j.contains("turn_prob")) sc.turn_prob = j["turn_prob"].get<double>();

  if (sc.grid.nx < 2 || sc.grid.ny < 2 || sc.grid.spacing_m <= 0.0 ||
      sc.grid.subdivisions < 1 || sc.grid.speed_mps <= 0.0)
    throw ValidationError(path + ": bad grid parameters");
  if (sc.objects < 0 || sc.duration_s < 1)
    throw ValidationError(path + ": bad objects/duration");
  if (sc.speed_lo <= 0.0 || sc.speed_hi < sc.speed_lo)
    throw ValidationError(path + ": bad speed range");
  if (sc.gap_mean < 1 || sc.gap_jitter < 0)
    throw ValidationError(path + ": bad observation gap");
  if (sc.turn_prob > 1.0)
    throw ValidationError(path + ": turn_prob must be <= 1");
  double wsum = 0.0;
  for (auto& [u, w] : sc.u_weights) wsum += w;
  if (sc.u_weights.empty() || wsum <= 0.0)
    throw ValidationError(path + ": u_weights must have positive total");
  return sc;
}

Network build_grid_network(const GridSpec& g, int init_samples, std::uint64_t seed) {
  std::vector<Vertex> vertices;
  double cx = 0.5 * g.spacing_m * (g.nx - 1);
  double cy = 0.5 * g.spacing_m * (g.ny - 1);
  auto add_vertex = [&](double x, double y) {
    Vertex v;
    v.vid = vertices.size();
    latlon_from_plane(g, x - cx, y - cy, v.lat, v.lon);
    vertices.push_back(v);
    return vertices.size() - 1;
  };
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix)
      add_vertex(ix * g.spacing_m, iy * g.spacing_m);

  std::vector<Edge> edges;
  auto add_corridor = [&](std::size_t a, std::size_t b, double ax, double ay, double bx,
                          double by) {
    // Split a->b into g.subdivisions sub-segments with intermediate vertices.
    std::size_t prev = a;
    for (int s = 1; s <= g.subdivisions; ++s) {
      std::size_t nxt;
      if (s == g.subdivisions) {
        nxt = b;
      } else {
        double f = static_cast<double>(s) / g.subdivisions;
        nxt = add_vertex(ax + f * (bx - ax), ay + f * (by - ay));
      }
      Edge e;
      e.eid = edges.size();
      e.s_idx = prev;
      e.d_idx = nxt;
      e.type = parse_edge_type(g.edge_type);
      e.speed_limit_mps = g.speed_mps;
      edges.push_back(e);
      if (g.bidirectional) {
        Edge r;
        r.eid = edges.size();
        r.s_idx = nxt;
        r.d_idx = prev;
        r.type = e.type;
        r.speed_limit_mps = e.speed_limit_mps;
        edges.push_back(r);
      }
      prev = nxt;
    }
  };

  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      std::size_t here = static_cast<std::size_t>(iy) * g.nx + ix;
      double hx = ix * g.spacing_m, hy = iy * g.spacing_m;
      if (ix + 1 < g.nx)
        add_corridor(here, here + 1, hx, hy, hx + g.spacing_m, hy);
      if (iy + 1 < g.ny)
        add_corridor(here, here + g.nx, hx, hy, hx, hy + g.spacing_m);
    }
  }
  return Network::from_records(vertices, edges, init_samples, seed);
}

void write_network_jsonl(const Network& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (const auto& v : net.vertices()) {
    json j;
    j["v"] = v.vid;
    j["lat"] = v.lat;
    j["lon"] = v.lon;
    out << j.dump() << '\n';
  }
  for (const auto& e : net.edges()) {
    json j;
    j["e"] = e.eid;
    j["s"] = net.vertices()[e.s_idx].vid;
    j["d"] = net.vertices()[e.d_idx].vid;
    j["type"] = edge_type_name(e.type);
    j["speed_mps"] = e.speed_limit_mps;
    out << j.dump() << '\n';
  }
}

GeneratedData generate(const Scenario& sc, const Network& net, std::uint64_t seed) {
  GeneratedData out;
  if (net.edges().empty()) throw ValidationError("generate: network has no edges");

  double wsum = 0.0;
  for (const auto& [u, w] : sc.u_weights) wsum += w;

  for (int obj = 0; obj < sc.objects; ++obj) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(obj), kWalkStream));
    std::string oid = "o" + std::to_string(obj);

    // Observation schedule.
    std::vector<std::int64_t> obs_times;
    for (std::int64_t t = sc.start_t; t < sc.start_t + sc.duration_s;) {
      obs_times.push_back(t);
      std::int64_t gap = sc.gap_mean;
      if (sc.gap_jitter > 0)
        gap += static_cast<std::int64_t>(rng.uniform_index(
                   static_cast<std::size_t>(2 * sc.gap_jitter + 1))) -
               sc.gap_jitter;
      t += std::max<std::int64_t>(1, gap);
    }
    std::size_t next_obs = 0;

    // Start on a random edge.
    std::size_t start_v = rng.uniform_index(net.vertices().size());
    while (net.outgoing(start_v).empty())
      start_v = rng.uniform_index(net.vertices().size());
    const auto& outs0 = net.outgoing(start_v);
    std::size_t cur = outs0[rng.uniform_index(outs0.size())];
    double offset = 0.0;
    double speed = rng.uniform(sc.speed_lo, sc.speed_hi);

    for (std::int64_t t = sc.start_t; t < sc.start_t + sc.duration_s; ++t) {
      const Edge& e = net.edges()[cur];
      TruthRecord tr;
      tr.object_id = oid;
      tr.t = t;
      Vec2 xy = e.point_at(offset);
      net.projection().to_latlon(xy, tr.lat, tr.lon);
      tr.eid = e.eid;
      tr.offset_m = offset;
      out.truth.push_back(tr);

      if (next_obs < obs_times.size() && obs_times[next_obs] == t) {
        ++next_obs;
        // Draw uncertainty degree.
        double pick = rng.next_unit() * wsum;
        int u = sc.u_weights.back().first;
        for (const auto& [uu, w] : sc.u_weights) {
          if (pick < w) {
            u = uu;
            break;
          }
          pick -= w;
        }
        CellularLocation cl;
        cl.object_id = oid;
        cl.t = t;
        cl.u = u;
        Vec2 obs_xy = xy;
        if (sc.noise_sigma_frac > 0.0) {
          double r_u = uncertainty_radius(u);
          double theta = rng.uniform(0.0, 2.0 * kPi);
          double dist = std::abs(standard_normal(rng)) * sc.noise_sigma_frac * r_u;
          dist = std::min(dist, r_u * 0.999);
          obs_xy.x += dist * std::cos(theta);
          obs_xy.y += dist * std::sin(theta);
        }
        net.projection().to_latlon(obs_xy, cl.lat, cl.lon);
        out.raw.push_back(cl);
        out.raw_truth.push_back(NetworkPoint{e.eid, offset});
      }

      // Advance one second of motion.
      double dt = 1.0;
      int guard = 0;
      while (dt > 0.0) {
        if (++guard > 10000) throw std::logic_error("generate: walker stuck");
        const Edge& ce = net.edges()[cur];
        double time_to_end = (ce.length_m - offset) / speed;
        if (time_to_end > dt) {
          offset += speed * dt;
          dt = 0.0;
          break;
        }
        dt -= time_to_end;
        // Transit: prefer not to reverse direction.
        const auto& outs = net.outgoing(ce.d_idx);
        std::vector<std::size_t> choices;
        for (auto ei : outs)
          if (net.edges()[ei].d_idx != ce.s_idx) choices.push_back(ei);
        if (choices.empty())
          for (auto ei : outs) choices.push_back(ei);
        std::size_t pick = choices[rng.uniform_index(choices.size())];
        if (sc.turn_prob >= 0.0 && choices.size() > 1) {
          // Straight-biased routing: keep the current heading unless a turn
          // is drawn; a straight-ahead option needs near-parallel headings.
          const Projection& proj = net.projection();
          auto heading = [&](const Edge& ed) {
            const Vertex& a = net.vertices()[ed.s_idx];
            const Vertex& b = net.vertices()[ed.d_idx];
            Vec2 pa = proj.to_xy(a.lat, a.lon);
            Vec2 pb = proj.to_xy(b.lat, b.lon);
            double len = std::max(distance(pa, pb), 1e-9);
            return Vec2{(pb.x - pa.x) / len, (pb.y - pa.y) / len};
          };
          Vec2 d0 = heading(ce);
          std::size_t straight = choices.front();
          double best = -2.0;
          for (auto ei : choices) {
            Vec2 d1 = heading(net.edges()[ei]);
            double dot = d0.x * d1.x + d0.y * d1.y;
            if (dot > best) {
              best = dot;
              straight = ei;
            }
          }
          if (best > 0.866) {
            if (rng.next_unit() >= sc.turn_prob) {
              pick = straight;
            } else {
              std::vector<std::size_t> turns;
              for (auto ei : choices)
                if (ei != straight) turns.push_back(ei);
              pick = turns[rng.uniform_index(turns.size())];
            }
          }
        }
        cur = pick;
        offset = 0.0;
        speed = rng.uniform(sc.speed_lo, sc.speed_hi);
      }
    }
  }
  return out;
}

void write_raw_csv(const std::string& path, const std::vector<CellularLocation>& raw) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "object_id,t,lat,lon,u\n";
  for (const auto& cl : raw)
    out << cl.object_id << ',' << cl.t << ',' << format_coord(cl.lat) << ','
        << format_coord(cl.lon) << ',' << cl.u << '\n';
}

void write_truth_csv(const std::string& path, const std::vector<TruthRecord>& truth) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "object_id,t,lat,lon\n";
  for (const auto& tr : truth)
    out << tr.object_id << ',' << tr.t << ',' << format_coord(tr.lat) << ','
        << format_coord(tr.lon) << '\n';
}

DeviationReport deviation_report(const std::vector<PointRecord>& estimates,
                                 const std::vector<PointRecord>& truth) {
  std::unordered_map<std::string, std::unordered_map<std::int64_t, std::pair<double, double>>>
      truth_map;
  for (const auto& tr : truth) truth_map[tr.object_id][tr.t] = {tr.lat, tr.lon};

  DeviationReport rep;
  std::vector<double> devs;
  devs.reserve(estimates.size());
  for (const auto& est : estimates) {
    auto oit = truth_map.find(est.object_id);
    if (oit == truth_map.end()) {
      ++rep.unmatched;
      continue;
    }
    auto tit = oit->second.find(est.t);
    if (tit == oit->second.end()) {
      ++rep.unmatched;
      continue;
    }
    devs.push_back(
        geo_distance_m(est.lat, est.lon, tit->second.first, tit->second.second));
  }
  rep.count = devs.size();
  if (devs.empty()) return rep;

  double sum = 0.0;
  std::size_t hist[6] = {0, 0, 0, 0, 0, 0};
  for (double d : devs) {
    sum += d;
    if (d <= 50.0) ++hist[0];
    else if (d <= 100.0) ++hist[1];
    else if (d <= 150.0) ++hist[2];
    else if (d <= 200.0) ++hist[3];
    else if (d <= 300.0) ++hist[4];
    else ++hist[5];
  }
  rep.mean_m = sum / static_cast<double>(devs.size());
  std::sort(devs.begin(), devs.end());
  std::size_t n = devs.size();
  rep.median_m = n % 2 == 1 ? devs[n / 2] : 0.5 * (devs[n / 2 - 1] + devs[n / 2]);
  for (int i = 0; i < 6; ++i)
    rep.buckets[i] = static_cast<double>(hist[i]) / static_cast<double>(n);
  return rep;
}

void PdrAggregate::add(double p_max, double p_true) {
  if (p_max <= 0.0) {
    ++excluded_;
    return;
  }
  sum_ += (p_max - p_true) / p_max;
  ++n_;
}

double accuracy_loss(double narrowed_mean, double full_mean) {
  if (full_mean <= 0.0) throw std::invalid_argument("accuracy_loss: full mean must be positive");
  return std::abs(narrowed_mean - full_mean) / full_mean;
}

}  // namespace dtnc
