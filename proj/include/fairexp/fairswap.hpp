#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fairexp/data.hpp"
#include "fairexp/fairness.hpp"
#include "fairexp/random.hpp"
#include "fairexp/ranker.hpp"

namespace fairexp {

struct SwapOptions {
  // Follow certain orders when choosing donors and when arranging documents
  // inside a block. Off gives uniformly random choices.
  bool certain_order_heuristic = true;
};

// One promotion step: block `block_position` of the working partition lacked
// `deficit` documents of group `needed`.
struct CalibrationEvent {
  std::size_t block_position = 0;
  std::size_t segment_start = 0;
  Group needed = Group::A;
  std::size_t deficit = 0;                  // M
  std::vector<std::size_t> donor_distance;  // i - b for every donor block
  std::vector<std::size_t> taken;           // m_i, aligned with donor_distance
  std::vector<std::size_t> passed_over;     // n_j for the blocks between b and the last donor
  std::size_t other_in_block = 0;           // documents of the other group in block b beforehand
  std::vector<std::size_t> promoted;
  std::vector<std::size_t> demoted;

  // sum_i m_i * (M + sum_{j<i} n_j)
  double swap_bound() const;
  // Same, with every other-group document of block b counted as passed over.
  double swap_bound_with_block() const;
};

struct CalibratedRanking {
  std::vector<std::size_t> order;  // displayed documents, top first
  std::size_t added_regret = 0;
  GroupTemplate applied;
  BlockPartition partition_after;
  std::vector<CalibrationEvent> events;
};

// Number of certain pairs (i beats j) where j is shown above i.
std::size_t added_regret(std::span<const std::size_t> order, const PairOrderSets& certain);

// Calibrates a block partition to satisfy `tmpl` on the top positions.
// `scores` (theta^T x per document) may be empty; it only breaks donor ties.
CalibratedRanking fair_swap(const BlockPartition& partition, const GroupTemplate& tmpl,
                            const PairOrderSets& certain, std::span<const Group> groups, Rng& rng,
                            const SwapOptions& options = {}, std::span<const double> scores = {});

// Runs fair_swap for every template and keeps the least added regret; ties go
// to smaller |projected unfairness| and then to the lexicographically smaller
// template. Each template draws from its own seed derived from one draw of rng.
CalibratedRanking select_ranking(const BlockPartition& partition, const TemplateSet& qualified,
                                 const PairOrderSets& certain, std::span<const Group> groups,
                                 const UnfairnessLedger& ledger, Rng& rng,
                                 const SwapOptions& options = {},
                                 std::span<const double> scores = {});

// Plain PairRank presentation: blocks in order, each block shuffled (as a
// random linear extension of its certain orders when the heuristic is on).
std::vector<std::size_t> rank_by_partition(const BlockPartition& partition,
                                           const PairOrderSets& certain, Rng& rng,
                                           const SwapOptions& options = {});

// Group pattern of the first k documents of an order.
std::vector<Group> group_pattern(std::span<const std::size_t> order, std::span<const Group> groups,
                                 std::size_t k);

// Human-readable one-line trace of a calibration, for diagnostics.
std::string describe(const CalibratedRanking& ranking);

}  // namespace fairexp
