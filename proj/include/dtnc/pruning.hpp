#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dtnc/probability.hpp"

namespace dtnc {

// Candidate fragment sets for one trajectory after pruning.
struct PrunedSequence {
  std::vector<FragmentSet> sets;
  std::vector<bool> most_compact;  // per location: set is a singleton
  bool degraded = false;           // empty-set protection or infeasible chain hit
};

// Drops fragments of r_i with no successor reachable within dt and fragments
// of r_next with no such predecessor. If either side would empty, that side
// is restored unpruned and *degraded is set.
std::pair<FragmentSet, FragmentSet> pairwise_prune(const FragmentSet& r_i,
                                                   const FragmentSet& r_next,
                                                   double dt, const ShortestPaths& sp,
                                                   double v_max, bool* degraded = nullptr);

// Keeps exactly the fragments lying on at least one feasible source-to-sink
// combination (forward+backward reachability over adjacent-pair feasibility).
// A fully infeasible chain leaves the input unchanged and flags degraded.
PrunedSequence sequence_prune(const std::vector<FragmentSet>& candidates,
                              const std::vector<std::int64_t>& timestamps,
                              const ShortestPaths& sp, double v_max);

// Most-compact positions and the same-edge consecutive singleton pairs that
// feed travel-time measurement.
struct CompactExtraction {
  std::vector<std::size_t> singleton_indexes;            // positions with |R*| = 1
  std::vector<std::pair<std::size_t, std::size_t>> same_edge_pairs;  // adjacent singleton
                                                                     // positions, same eid
  double compact_ratio = 0.0;  // #singletons / #locations
};

CompactExtraction extract_compact_runs(const PrunedSequence& seq);

}  // namespace dtnc
