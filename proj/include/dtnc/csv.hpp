#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "dtnc/motion.hpp"
#include "dtnc/network.hpp"

namespace dtnc {

// Raw cellular input: object_id,t,lat,lon,u with a header line. Records that
// break an object's strictly-increasing timestamp order are dropped and
// counted.
struct RawLocations {
  std::vector<CellularLocation> locations;  // file order, minus dropped
  std::size_t dropped_nonmonotonic = 0;
};

RawLocations read_locations_csv(const std::string& path);
RawLocations read_locations_csv(std::istream& in, const std::string& name);

// Timestamped positions: any CSV with object_id,t,lat,lon columns (extra
// columns ignored). Used for ground-truth and re-reading cleansed output.
struct PointRecord {
  std::string object_id;
  std::int64_t t = 0;
  double lat = 0.0;
  double lon = 0.0;
};

std::vector<PointRecord> read_points_csv(const std::string& path);

void write_cleansed_header(std::ostream& out);
void write_cleansed_records(std::ostream& out, const CleanedTrajectory& traj);

// Fixed-precision coordinate formatting shared by all writers so identical
// runs produce byte-identical files.
std::string format_coord(double v);

}  // namespace dtnc
