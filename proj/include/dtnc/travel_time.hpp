#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dtnc/rng.hpp"

namespace dtnc {

// One measured edge traversal, kept in real seconds until batched into a
// distribution update (where it is ceiled to integer seconds).
struct TravelTimeSample {
  std::uint64_t eid = 0;
  double t_e = 0.0;
  std::uint64_t window_id = 0;
};

// Discrete travel-time distribution: multiset of integer seconds with counts.
class TravelTimeDistribution {
 public:
  using Entry = std::pair<int, std::int64_t>;  // (t seconds, count)

  TravelTimeDistribution() = default;
  explicit TravelTimeDistribution(const std::map<int, std::int64_t>& m);

  const std::vector<Entry>& entries() const { return entries_; }
  std::int64_t total_count() const { return total_; }
  bool empty() const { return entries_.empty(); }
  int min_t() const { return entries_.front().first; }
  int max_t() const { return entries_.back().first; }
  int range() const { return empty() ? 0 : max_t() - min_t(); }

  void add(int t, std::int64_t count);
  double probability(int t) const;
  double mean() const;
  int sample(Rng& rng) const;

  std::map<int, std::int64_t> as_map() const;

 private:
  std::vector<Entry> entries_;  // sorted by t, distinct t
  std::int64_t total_ = 0;
};

// Interval half-width bound R = sqrt(2 n eps^2 / ln(1/delta)).
double hoeffding_range(std::int64_t n, double epsilon, double delta);

// Iterative endpoint removal until the support range fits the bound.
std::map<int, std::int64_t> narrow(std::map<int, std::int64_t> samples, double epsilon,
                                   double delta);

// Seed a distribution from the speed limit: speeds ~ U(s_min, limit),
// times ceil(length/speed).
TravelTimeDistribution init_distribution(double length_m, double speed_limit_mps,
                                         int n_samples, std::uint64_t rng_seed,
                                         double s_min = 1.0);

// Travel time implied by two same-edge fragment midpoints; empty when the
// motion is backward or slower than s_floor.
std::optional<TravelTimeSample> measure_travel_time(std::uint64_t eid, double pc_a,
                                                    std::int64_t t_a, double pc_b,
                                                    std::int64_t t_b, double edge_length_m,
                                                    std::uint64_t window_id,
                                                    double s_floor = 0.1);

// Merge ceiled new samples into the distribution, then narrow.
TravelTimeDistribution update_distribution(const TravelTimeDistribution& dist,
                                           const std::vector<TravelTimeSample>& new_samples,
                                           double epsilon, double delta);

}  // namespace dtnc
