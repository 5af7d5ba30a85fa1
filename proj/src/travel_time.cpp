#include "dtnc/travel_time.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dtnc {

TravelTimeDistribution::TravelTimeDistribution(const std::map<int, std::int64_t>& m) {
  entries_.reserve(m.size());
  for (const auto& [t, c] : m) {
    if (c <= 0) throw std::invalid_argument("travel-time count must be positive");
    entries_.emplace_back(t, c);
    total_ += c;
  }
}

void TravelTimeDistribution::add(int t, std::int64_t count) {
  if (count <= 0) throw std::invalid_argument("travel-time count must be positive");
  auto it = std::lower_bound(entries_.begin(), entries_.end(), t,
                             [](const Entry& e, int v) { return e.first < v; });
  if (it != entries_.end() && it->first == t) {
    it->second += count;
  } else {
    entries_.insert(it, {t, count});
  }
  total_ += count;
}

double TravelTimeDistribution::probability(int t) const {
  if (total_ == 0) return 0.0;
  auto it = std::lower_bound(entries_.begin(), entries_.end(), t,
                             [](const Entry& e, int v) { return e.first < v; });
  if (it == entries_.end() || it->first != t) return 0.0;
  return static_cast<double>(it->second) / static_cast<double>(total_);
}

double TravelTimeDistribution::mean() const {
  if (total_ == 0) return 0.0;
  double acc = 0.0;
  for (const auto& [t, c] : entries_) acc += static_cast<double>(t) * static_cast<double>(c);
  return acc / static_cast<double>(total_);
}

int TravelTimeDistribution::sample(Rng& rng) const {
  if (entries_.empty()) throw std::logic_error("sampling empty travel-time distribution");
  auto pick = static_cast<std::int64_t>(rng.uniform_index(static_cast<std::size_t>(total_)));
  for (const auto& [t, c] : entries_) {
    pick -= c;
    if (pick < 0) return t;
  }
  return entries_.back().first;
}

std::map<int, std::int64_t> TravelTimeDistribution::as_map() const {
  std::map<int, std::int64_t> m;
  for (const auto& [t, c] : entries_) m[t] = c;
  return m;
}

double hoeffding_range(std::int64_t n, double epsilon, double delta) {
  if (n < 1 || epsilon <= 0.0 || delta <= 0.0 || delta >= 1.0)
    throw std::invalid_argument("hoeffding_range: bad parameters");
  return std::sqrt(2.0 * static_cast<double>(n) * epsilon * epsilon / std::log(1.0 / delta));
}

std::map<int, std::int64_t> narrow(std::map<int, std::int64_t> samples, double epsilon,
                                   double delta) {
  if (samples.empty()) throw std::invalid_argument("narrow: empty multiset");
  std::int64_t n = 0;
  for (const auto& [t, c] : samples) n += c;
  while (samples.size() > 2) {
    auto first = samples.begin();
    auto last = std::prev(samples.end());
    auto second = std::next(first);
    auto penult = std::prev(last);
    int t_l = first->first, t_r = last->first;
    int t_li = second->first, t_ri = penult->first;
    int gap_l = t_li - t_l;
    int gap_r = t_r - t_ri;
    if (gap_l > gap_r) {
      std::int64_t n_after = n - first->second;
      if (static_cast<double>(t_r - t_li) > hoeffding_range(n_after, epsilon, delta)) {
        samples.erase(first);
        n = n_after;
        continue;
      }
    } else {
      std::int64_t n_after = n - last->second;
      if (static_cast<double>(t_ri - t_l) > hoeffding_range(n_after, epsilon, delta)) {
        samples.erase(last);
        n = n_after;
        continue;
      }
    }
    break;
  }
  return samples;
}

TravelTimeDistribution init_distribution(double length_m, double speed_limit_mps,
                                         int n_samples, std::uint64_t rng_seed,
                                         double s_min) {
  if (length_m <= 0.0 || speed_limit_mps <= 0.0 || n_samples < 1)
    throw std::invalid_argument("init_distribution: bad parameters");
  double lo = std::min(s_min, speed_limit_mps);
  Rng rng(rng_seed);
  std::map<int, std::int64_t> m;
  for (int i = 0; i < n_samples; ++i) {
    double s = rng.uniform(lo, speed_limit_mps);
    if (s <= 0.0) s = lo;
    int t = static_cast<int>(std::ceil(length_m / s));
    if (t < 1) t = 1;
    m[t] += 1;
  }
  return TravelTimeDistribution(m);
}

std::optional<TravelTimeSample> measure_travel_time(std::uint64_t eid, double pc_a,
                                                    std::int64_t t_a, double pc_b,
                                                    std::int64_t t_b, double edge_length_m,
                                                    std::uint64_t window_id,
                                                    double s_floor) {
  if (t_b <= t_a) return std::nullopt;
  double dp = pc_b - pc_a;
  if (dp <= 0.0) return std::nullopt;  // stationary or backward
  double s_e = dp / static_cast<double>(t_b - t_a);
  if (s_e < s_floor) return std::nullopt;
  TravelTimeSample sample;
  sample.eid = eid;
  sample.t_e = edge_length_m / s_e;
  sample.window_id = window_id;
  return sample;
}

TravelTimeDistribution update_distribution(const TravelTimeDistribution& dist,
                                           const std::vector<TravelTimeSample>& new_samples,
                                           double epsilon, double delta) {
  if (new_samples.empty()) return dist;
  std::map<int, std::int64_t> merged = dist.as_map();
  for (const auto& s : new_samples) {
    int t = static_cast<int>(std::ceil(s.t_e));
    if (t < 1) t = 1;
    merged[t] += 1;
  }
  return TravelTimeDistribution(narrow(std::move(merged), epsilon, delta));
}

}  // namespace dtnc
