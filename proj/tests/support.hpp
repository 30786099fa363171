#pragma once

// Independent oracles shared by the unit and acceptance suites. Nothing here
// calls into fair_swap; the searches enumerate rankings directly.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "fairexp/fairness.hpp"
#include "fairexp/fairswap.hpp"
#include "fairexp/random.hpp"
#include "fairexp/ranker.hpp"

namespace fairexp::testing {

// Certain set of a weak order: every document beats every document of a later
// block and nothing inside a block is ordered.
inline PairOrderSets weak_order(const BlockPartition& p) {
  PairOrderSets s(p.document_count());
  for (std::size_t a = 0; a < p.blocks.size(); ++a)
    for (std::size_t b = a + 1; b < p.blocks.size(); ++b)
      for (std::size_t w : p.blocks[a])
        for (std::size_t l : p.blocks[b]) s.set_certain(w, l);
  return s;
}

inline std::size_t count_inversions(const std::vector<std::size_t>& order, const PairOrderSets& s) {
  std::size_t v = 0;
  for (std::size_t i = 0; i < order.size(); ++i)
    for (std::size_t j = i + 1; j < order.size(); ++j) v += s.beats(order[j], order[i]);
  return v;
}

struct SearchResult {
  std::size_t min_regret = std::numeric_limits<std::size_t>::max();
  std::size_t candidates = 0;
};

// Minimum inversion count over every ordered choice of k distinct documents
// whose groups spell `placement`. With `reachable`, a choice is kept only if
// no hidden document of a group sits in a strictly earlier block than a
// displayed document of the same group: block calibration never skips over a
// same-group document.
inline SearchResult exhaustive_min_regret(const BlockPartition& partition,
                                          const std::vector<Group>& groups,
                                          const std::vector<Group>& placement,
                                          const PairOrderSets& certain, bool reachable) {
  const std::size_t n = groups.size();
  const std::size_t k = placement.size();
  const auto block = partition.block_of();
  SearchResult best;
  std::vector<std::size_t> chosen;
  std::vector<bool> used(n, false);

  auto admissible = [&]() {
    if (!reachable) return true;
    for (Group g : {Group::A, Group::B}) {
      std::size_t deepest_shown = 0;
      bool any = false;
      for (std::size_t d : chosen)
        if (groups[d] == g) deepest_shown = std::max(deepest_shown, block[d]), any = true;
      if (!any) continue;
      for (std::size_t d = 0; d < n; ++d)
        if (!used[d] && groups[d] == g && block[d] < deepest_shown) return false;
    }
    return true;
  };

  auto rec = [&](auto&& self) -> void {
    if (chosen.size() == k) {
      if (!admissible()) return;
      ++best.candidates;
      best.min_regret = std::min(best.min_regret, count_inversions(chosen, certain));
      return;
    }
    const Group want = placement[chosen.size()];
    for (std::size_t d = 0; d < n; ++d) {
      if (used[d] || groups[d] != want) continue;
      used[d] = true;
      chosen.push_back(d);
      self(self);
      chosen.pop_back();
      used[d] = false;
    }
  };
  rec(rec);
  return best;
}

struct Instance {
  BlockPartition partition;
  std::vector<Group> groups;
  std::vector<Group> placement;
};

// Random weak-order instance: up to max_docs documents in up to max_blocks
// blocks, random groups, and a random template feasible for the counts.
inline Instance random_instance(Rng& rng, std::size_t max_docs = 8, std::size_t max_blocks = 3) {
  Instance inst;
  const std::size_t n = 2 + rng.below(max_docs - 1);
  const std::size_t nb = 1 + rng.below(std::min(max_blocks, n));
  std::vector<std::size_t> docs(n);
  std::iota(docs.begin(), docs.end(), 0);
  rng.shuffle(std::span<std::size_t>(docs));
  // Cut points give every block at least one document.
  std::vector<std::size_t> cuts(n - 1);
  std::iota(cuts.begin(), cuts.end(), 1);
  rng.shuffle(std::span<std::size_t>(cuts));
  cuts.resize(nb - 1);
  std::sort(cuts.begin(), cuts.end());
  std::size_t start = 0;
  for (std::size_t c = 0; c <= cuts.size(); ++c) {
    const std::size_t end = c < cuts.size() ? cuts[c] : n;
    inst.partition.blocks.emplace_back(docs.begin() + static_cast<std::ptrdiff_t>(start),
                                       docs.begin() + static_cast<std::ptrdiff_t>(end));
    start = end;
  }
  inst.groups.resize(n);
  std::size_t a = 0;
  for (auto& g : inst.groups) {
    g = rng.uniform() < 0.5 ? Group::A : Group::B;
    a += g == Group::A;
  }
  const std::size_t b = n - a;
  const std::size_t k = 1 + rng.below(n);
  for (;;) {
    inst.placement.clear();
    std::size_t ua = 0;
    for (std::size_t r = 0; r < k; ++r) {
      inst.placement.push_back(rng.uniform() < 0.5 ? Group::A : Group::B);
      ua += inst.placement.back() == Group::A;
    }
    if (ua <= a && k - ua <= b) break;
  }
  return inst;
}

}  // namespace fairexp::testing
