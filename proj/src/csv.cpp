#include "dtnc/csv.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <unordered_map>

#include "dtnc/errors.hpp"

namespace dtnc {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::int64_t parse_int(const std::string& s, const std::string& ctx) {
  try {
    std::size_t used = 0;
    std::int64_t v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ParseError(ctx + ": invalid integer '" + s + "'");
  }
}

double parse_double(const std::string& s, const std::string& ctx) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ParseError(ctx + ": invalid number '" + s + "'");
  }
}

}  // namespace

RawLocations read_locations_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open input file: " + path);
  return read_locations_csv(in, path);
}

RawLocations read_locations_csv(std::istream& in, const std::string& path) {
  RawLocations out;
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file (header required)");
  ++line_no;
  auto header = split_csv_line(line);
  const std::vector<std::string> expected = {"object_id", "t", "lat", "lon", "u"};
  if (header != expected)
    throw ParseError(path + ":1: header must be 'object_id,t,lat,lon,u'");

  std::unordered_map<std::string, std::int64_t> last_t;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::string ctx = path + ":" + std::to_string(line_no);
    auto f = split_csv_line(line);
    if (f.size() != 5) throw ParseError(ctx + ": expected 5 fields, got " +
                                        std::to_string(f.size()));
    CellularLocation cl;
    cl.object_id = f[0];
    if (cl.object_id.empty()) throw ParseError(ctx + ": empty object_id");
    cl.t = parse_int(f[1], ctx);
    cl.lat = parse_double(f[2], ctx);
    cl.lon = parse_double(f[3], ctx);
    std::int64_t u = parse_int(f[4], ctx);
    if (u < 1 || u > 5)
      throw ValidationError(ctx + ": uncertainty degree must be in [1,5], got " + f[4]);
    cl.u = static_cast<int>(u);
    if (cl.lat < -90.0 || cl.lat > 90.0 || cl.lon < -180.0 || cl.lon > 180.0)
      throw ValidationError(ctx + ": coordinate out of range");

    auto it = last_t.find(cl.object_id);
    if (it != last_t.end() && cl.t <= it->second) {
      ++out.dropped_nonmonotonic;
      continue;
    }
    last_t[cl.object_id] = cl.t;
    out.locations.push_back(std::move(cl));
  }
  return out;
}

std::vector<PointRecord> read_points_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);
  std::vector<PointRecord> out;
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file (header required)");
  ++line_no;
  auto header = split_csv_line(line);
  int c_obj = -1, c_t = -1, c_lat = -1, c_lon = -1;
  for (int i = 0; i < static_cast<int>(header.size()); ++i) {
    if (header[i] == "object_id") c_obj = i;
    else if (header[i] == "t") c_t = i;
    else if (header[i] == "lat") c_lat = i;
    else if (header[i] == "lon") c_lon = i;
  }
  if (c_obj < 0 || c_t < 0 || c_lat < 0 || c_lon < 0)
    throw ParseError(path + ":1: header must contain object_id,t,lat,lon");

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::string ctx = path + ":" + std::to_string(line_no);
    auto f = split_csv_line(line);
    int need = std::max(std::max(c_obj, c_t), std::max(c_lat, c_lon));
    if (static_cast<int>(f.size()) <= need)
      throw ParseError(ctx + ": too few fields");
    PointRecord r;
    r.object_id = f[static_cast<std::size_t>(c_obj)];
    r.t = parse_int(f[static_cast<std::size_t>(c_t)], ctx);
    r.lat = parse_double(f[static_cast<std::size_t>(c_lat)], ctx);
    r.lon = parse_double(f[static_cast<std::size_t>(c_lon)], ctx);
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.7f", v);
  return buf;
}

void write_cleansed_header(std::ostream& out) {
  out << "object_id,t,lat,lon,provenance\n";
}

void write_cleansed_records(std::ostream& out, const CleanedTrajectory& traj) {
  for (const auto& r : traj.records) {
    out << traj.object_id << ',' << r.t << ',' << format_coord(r.lat) << ','
        << format_coord(r.lon) << ',' << provenance_name(r.prov) << '\n';
  }
}

}  // namespace dtnc
