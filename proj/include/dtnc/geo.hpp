#pragma once

#include <cmath>
#include <optional>
#include <utility>

namespace dtnc {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 v) { return std::sqrt(v.x * v.x + v.y * v.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(b - a); }

// Equirectangular projection around a fixed origin. Adequate for city-scale
// networks; keeps all geometry in planar meters.
class Projection {
 public:
  static constexpr double kEarthRadius = 6371000.0;

  Projection() = default;
  Projection(double origin_lat, double origin_lon)
      : origin_lat_(origin_lat),
        origin_lon_(origin_lon),
        cos_lat0_(std::cos(origin_lat * kDegToRad)) {}

  Vec2 to_xy(double lat, double lon) const {
    double x = kEarthRadius * (lon - origin_lon_) * kDegToRad * cos_lat0_;
    double y = kEarthRadius * (lat - origin_lat_) * kDegToRad;
    return {x, y};
  }

  void to_latlon(Vec2 p, double& lat, double& lon) const {
    lat = origin_lat_ + p.y / kEarthRadius * kRadToDeg;
    lon = origin_lon_ + p.x / (kEarthRadius * cos_lat0_) * kRadToDeg;
  }

  double origin_lat() const { return origin_lat_; }
  double origin_lon() const { return origin_lon_; }

 private:
  static constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
  static constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;

  double origin_lat_ = 0.0;
  double origin_lon_ = 0.0;
  double cos_lat0_ = 1.0;
};

// Great-circle distance in meters (haversine, spherical earth).
inline double geo_distance_m(double lat1, double lon1, double lat2, double lon2) {
  constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
  double phi1 = lat1 * kDegToRad, phi2 = lat2 * kDegToRad;
  double dphi = (lat2 - lat1) * kDegToRad;
  double dlam = (lon2 - lon1) * kDegToRad;
  double a = std::sin(dphi / 2) * std::sin(dphi / 2) +
             std::cos(phi1) * std::cos(phi2) * std::sin(dlam / 2) * std::sin(dlam / 2);
  return 2.0 * Projection::kEarthRadius * std::asin(std::min(1.0, std::sqrt(a)));
}

// Overlap between segment a->b and the closed disk centered at c with radius r,
// expressed as offsets in meters from a along the segment. Empty if disjoint.
inline std::optional<std::pair<double, double>> segment_disk_overlap(Vec2 a, Vec2 b,
                                                                    Vec2 c, double r) {
  Vec2 d = b - a;
  double len2 = dot(d, d);
  if (len2 <= 0.0) {
    if (distance(a, c) <= r) return std::make_pair(0.0, 0.0);
    return std::nullopt;
  }
  Vec2 f = a - c;
  // |f + t d|^2 <= r^2  =>  len2 t^2 + 2 (f.d) t + |f|^2 - r^2 <= 0
  double bq = dot(f, d);
  double cq = dot(f, f) - r * r;
  double disc = bq * bq - len2 * cq;
  if (disc < 0.0) return std::nullopt;
  double sq = std::sqrt(disc);
  double t_lo = (-bq - sq) / len2;
  double t_hi = (-bq + sq) / len2;
  t_lo = std::max(t_lo, 0.0);
  t_hi = std::min(t_hi, 1.0);
  if (t_lo > t_hi) return std::nullopt;
  double len = std::sqrt(len2);
  return std::make_pair(t_lo * len, t_hi * len);
}

}  // namespace dtnc
