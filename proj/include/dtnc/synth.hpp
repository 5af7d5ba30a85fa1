#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dtnc/csv.hpp"
#include "dtnc/motion.hpp"
#include "dtnc/network.hpp"

namespace dtnc {

// Square-grid street network: nx x ny intersections spaced spacing_m apart,
// each corridor segment split into `subdivisions` straight edges.
struct GridSpec {
  int nx = 10;
  int ny = 10;
  double spacing_m = 400.0;
  int subdivisions = 1;
  double speed_mps = 15.0;
  std::string edge_type = "trunk";
  bool bidirectional = true;
  double origin_lat = 1.35;
  double origin_lon = 103.8;
};

struct Scenario {
  GridSpec grid;
  int objects = 100;
  std::int64_t duration_s = 600;
  std::int64_t start_t = 0;
  double speed_lo = 8.0;   // true movement speeds, uniform per edge
  double speed_hi = 14.0;
  std::vector<std::pair<int, double>> u_weights = {{3, 1.0}};
  std::int64_t gap_mean = 14;    // observation spacing in seconds
  std::int64_t gap_jitter = 0;   // uniform jitter around gap_mean
  double noise_sigma_frac = 0.0; // half-normal sigma as a fraction of r(u); 0 = exact
  // Probability of leaving the straight-ahead corridor at a junction where one
  // exists. Negative = legacy behavior (uniform over non-reversing edges).
  double turn_prob = -1.0;
};

Scenario load_scenario(const std::string& path);

Network build_grid_network(const GridSpec& spec, int init_samples, std::uint64_t seed);
void write_network_jsonl(const Network& net, const std::string& path);

struct TruthRecord {
  std::string object_id;
  std::int64_t t = 0;
  double lat = 0.0;
  double lon = 0.0;
  std::uint64_t eid = 0;   // ground-truth network position
  double offset_m = 0.0;
};

struct GeneratedData {
  std::vector<CellularLocation> raw;     // noisy, gappy observations
  std::vector<TruthRecord> truth;        // one per object per second
  std::vector<NetworkPoint> raw_truth;   // true network position per raw record
};

GeneratedData generate(const Scenario& sc, const Network& net, std::uint64_t seed);

void write_raw_csv(const std::string& path, const std::vector<CellularLocation>& raw);
void write_truth_csv(const std::string& path, const std::vector<TruthRecord>& truth);

// Euclidean-deviation histogram between estimated and true positions joined
// on (object_id, t). Bucket edges: 50/100/150/200/300 meters.
struct DeviationReport {
  std::size_t count = 0;      // matched records
  std::size_t unmatched = 0;  // estimate records with no truth at that second
  double mean_m = 0.0;
  double median_m = 0.0;
  double buckets[6] = {0, 0, 0, 0, 0, 0};  // fractions, sum to 1 when count > 0
};

DeviationReport deviation_report(const std::vector<PointRecord>& estimates,
                                 const std::vector<PointRecord>& truth);

// Mean probability-difference ratio (p_max - p_true)/p_max over locations or
// transitions where the truth candidate is present.
class PdrAggregate {
 public:
  void add(double p_max, double p_true);
  void exclude() { ++excluded_; }
  double value() const { return n_ == 0 ? 0.0 : sum_ / static_cast<double>(n_); }
  std::size_t count() const { return n_; }
  std::size_t excluded() const { return excluded_; }

 private:
  double sum_ = 0.0;
  std::size_t n_ = 0;
  std::size_t excluded_ = 0;
};

// Relative error of the narrowed distribution mean against the full mean.
double accuracy_loss(double narrowed_mean, double full_mean);

}  // namespace dtnc
