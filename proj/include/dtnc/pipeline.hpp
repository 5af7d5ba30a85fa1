#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "dtnc/motion.hpp"
#include "dtnc/network.hpp"

namespace dtnc {

struct Config {
  std::int64_t window_len = 70;
  int n_particles = 15;
  double epsilon = 2.0;
  double delta = 0.05;
  double gamma0 = 1.0;
  double v_max = 50.0;
  DiffusionPolicy policy = DiffusionPolicy::evenP;
  std::uint64_t rng_seed = 0;
  double min_fragment_m = 1.0;
  int init_samples = 30;
  int workers = 1;

  void validate() const;  // throws ConfigError on out-of-range values
};

// Wall-clock seconds per processing phase: candidate data assembly, online
// learning, pruning of combinations, inference.
struct PhaseTimings {
  double da_s = 0.0;
  double ol_s = 0.0;
  double pc_s = 0.0;
  double in_s = 0.0;
  std::size_t windows = 0;
  std::size_t object_windows = 0;
};

// One closed service window: per-object in-window observations plus an
// optional first observation past the window end for boundary continuity.
struct ServiceWindow {
  std::uint64_t window_id = 0;
  std::int64_t start_t = 0;
  std::int64_t end_t = 0;
  std::map<std::string, std::vector<CellularLocation>> objects;
  std::map<std::string, CellularLocation> lookahead;
};

struct WindowResult {
  std::vector<CleanedTrajectory> outputs;  // object-id order
  std::vector<TravelTimeSample> samples;   // measured this window
  std::size_t dropped_no_candidates = 0;   // locations with empty fragment sets
  std::size_t degraded_objects = 0;
};

class Pipeline {
 public:
  Pipeline(const Network& net, const Config& cfg);

  const Config& config() const { return cfg_; }
  const std::vector<TravelTimeDistribution>& distributions() const { return dists_; }
  void set_distributions(std::vector<TravelTimeDistribution> d);

  // Cleanses every object of a closed window against the current
  // distribution snapshot. Does not modify distributions.
  WindowResult run_window(const ServiceWindow& win);

  // Batch travel-time update between windows (single writer phase).
  void apply_updates(const std::vector<TravelTimeSample>& samples);

  // Slices the stream into contiguous windows, processes them in time order,
  // evolves distributions across windows, and streams cleansed CSV records.
  void run_stream(std::vector<CellularLocation> locations, std::ostream& out);

  const PhaseTimings& timings() const { return timings_; }

  void save_distributions(const std::string& path) const;
  void load_distributions(const std::string& path);

  // Windows are aligned to multiples of window_len.
  static std::int64_t window_anchor(std::int64_t min_t, std::int64_t window_len);

 private:
  const Network* net_;
  Config cfg_;
  std::vector<TravelTimeDistribution> dists_;
  PhaseTimings timings_;
  // Last assigned network position per object, to anchor the next window's
  // leading gap seconds.
  std::map<std::string, std::pair<std::int64_t, NetworkPoint>> lead_anchor_;
};

}  // namespace dtnc
