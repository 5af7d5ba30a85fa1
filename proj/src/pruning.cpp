#include "dtnc/pruning.hpp"

#include <stdexcept>

namespace dtnc {

std::pair<FragmentSet, FragmentSet> pairwise_prune(const FragmentSet& r_i,
                                                   const FragmentSet& r_next,
                                                   double dt, const ShortestPaths& sp,
                                                   double v_max, bool* degraded) {
  if (dt <= 0.0) throw std::invalid_argument("pairwise_prune: dt must be positive");
  std::vector<bool> keep_a(r_i.size(), false), keep_b(r_next.size(), false);
  for (std::size_t a = 0; a < r_i.size(); ++a) {
    for (std::size_t b = 0; b < r_next.size(); ++b) {
      if (sp.min_travel_time(r_i[a], r_next[b], v_max) <= dt) {
        keep_a[a] = true;
        keep_b[b] = true;
      }
    }
  }
  FragmentSet out_a, out_b;
  for (std::size_t a = 0; a < r_i.size(); ++a)
    if (keep_a[a]) out_a.push_back(r_i[a]);
  for (std::size_t b = 0; b < r_next.size(); ++b)
    if (keep_b[b]) out_b.push_back(r_next[b]);
  if (out_a.empty() && !r_i.empty()) {
    out_a = r_i;
    if (degraded) *degraded = true;
  }
  if (out_b.empty() && !r_next.empty()) {
    out_b = r_next;
    if (degraded) *degraded = true;
  }
  return {std::move(out_a), std::move(out_b)};
}

PrunedSequence sequence_prune(const std::vector<FragmentSet>& candidates,
                              const std::vector<std::int64_t>& timestamps,
                              const ShortestPaths& sp, double v_max) {
  if (candidates.size() != timestamps.size())
    throw std::invalid_argument("sequence_prune: candidates/timestamps size mismatch");
  PrunedSequence out;
  out.sets = candidates;
  std::size_t n = candidates.size();
  out.most_compact.assign(n, false);
  if (n == 0) return out;
  for (const auto& s : candidates)
    if (s.empty())
      throw std::invalid_argument("sequence_prune: empty candidate set (drop such locations first)");

  if (n > 1) {
    // Adjacent-pair feasibility, then forward/backward reachability.
    std::vector<std::vector<std::vector<bool>>> feas(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      double dt = static_cast<double>(timestamps[i + 1] - timestamps[i]);
      feas[i].assign(candidates[i].size(),
                     std::vector<bool>(candidates[i + 1].size(), false));
      for (std::size_t a = 0; a < candidates[i].size(); ++a)
        for (std::size_t b = 0; b < candidates[i + 1].size(); ++b)
          feas[i][a][b] =
              sp.min_travel_time(candidates[i][a], candidates[i + 1][b], v_max) <= dt;
    }

    std::vector<std::vector<bool>> fwd(n), bwd(n);
    fwd[0].assign(candidates[0].size(), true);
    for (std::size_t i = 1; i < n; ++i) {
      fwd[i].assign(candidates[i].size(), false);
      for (std::size_t a = 0; a < candidates[i - 1].size(); ++a) {
        if (!fwd[i - 1][a]) continue;
        for (std::size_t b = 0; b < candidates[i].size(); ++b)
          if (feas[i - 1][a][b]) fwd[i][b] = true;
      }
    }
    bwd[n - 1].assign(candidates[n - 1].size(), true);
    for (std::size_t i = n - 1; i > 0; --i) {
      bwd[i - 1].assign(candidates[i - 1].size(), false);
      for (std::size_t a = 0; a < candidates[i - 1].size(); ++a) {
        for (std::size_t b = 0; b < candidates[i].size(); ++b) {
          if (feas[i - 1][a][b] && bwd[i][b]) {
            bwd[i - 1][a] = true;
            break;
          }
        }
      }
    }

    std::vector<FragmentSet> pruned(n);
    bool any_empty = false;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t a = 0; a < candidates[i].size(); ++a)
        if (fwd[i][a] && bwd[i][a]) pruned[i].push_back(candidates[i][a]);
      if (pruned[i].empty()) any_empty = true;
    }
    if (any_empty) {
      out.degraded = true;  // no full feasible combination; keep input as-is
    } else {
      out.sets = std::move(pruned);
    }
  }

  for (std::size_t i = 0; i < n; ++i) out.most_compact[i] = out.sets[i].size() == 1;
  return out;
}

CompactExtraction extract_compact_runs(const PrunedSequence& seq) {
  CompactExtraction ex;
  std::size_t n = seq.sets.size();
  if (n == 0) return ex;
  for (std::size_t i = 0; i < n; ++i)
    if (seq.most_compact[i]) ex.singleton_indexes.push_back(i);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (seq.most_compact[i] && seq.most_compact[i + 1] &&
        seq.sets[i][0].eid == seq.sets[i + 1][0].eid) {
      ex.same_edge_pairs.emplace_back(i, i + 1);
    }
  }
  ex.compact_ratio =
      static_cast<double>(ex.singleton_indexes.size()) / static_cast<double>(n);
  return ex;
}

}  // namespace dtnc
