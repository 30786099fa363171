#include "fairexp/fairswap.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <sstream>

#include "fairexp/errors.hpp"

namespace fairexp {

namespace {

Group other(Group g) { return g == Group::A ? Group::B : Group::A; }

std::size_t count_group(const std::vector<std::size_t>& docs, std::span<const Group> groups, Group g) {
  return static_cast<std::size_t>(
      std::count_if(docs.begin(), docs.end(), [&](std::size_t d) { return groups[d] == g; }));
}

std::size_t wins_within(std::size_t doc, const std::vector<std::size_t>& block, const PairOrderSets& certain) {
  std::size_t w = 0;
  for (std::size_t e : block) w += certain.beats(doc, e);
  return w;
}

double score_of(std::span<const double> scores, std::size_t doc) {
  return scores.empty() ? 0.0 : scores[doc];
}

// r distinct members of `pool`, uniformly at random.
std::vector<std::size_t> random_subset(std::vector<std::size_t> pool, std::size_t r, Rng& rng) {
  for (std::size_t i = 0; i < r; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(r);
  return pool;
}

// Donors from a lower block: most certain wins inside that block first, then
// higher score, then lower index.
std::vector<std::size_t> choose_promoted(const std::vector<std::size_t>& block, Group g,
                                         std::size_t r, std::span<const Group> groups,
                                         const PairOrderSets& certain,
                                         std::span<const double> scores, Rng& rng,
                                         bool heuristic) {
  std::vector<std::size_t> pool;
  for (std::size_t d : block)
    if (groups[d] == g) pool.push_back(d);
  if (!heuristic) return random_subset(std::move(pool), r, rng);
  std::vector<std::size_t> wins(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) wins[i] = wins_within(pool[i], block, certain);
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (wins[a] != wins[b]) return wins[a] > wins[b];
    double sa = score_of(scores, pool[a]), sb = score_of(scores, pool[b]);
    if (sa != sb) return sa > sb;
    return pool[a] < pool[b];
  });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < r; ++i) out.push_back(pool[idx[i]]);
  return out;
}

// Mirror of choose_promoted for documents pushed out of the current block.
std::vector<std::size_t> choose_demoted(const std::vector<std::size_t>& block, Group h,
                                        std::size_t r, std::span<const Group> groups,
                                        const PairOrderSets& certain,
                                        std::span<const double> scores, Rng& rng,
                                        bool heuristic) {
  std::vector<std::size_t> pool;
  for (std::size_t d : block)
    if (groups[d] == h) pool.push_back(d);
  if (!heuristic) return random_subset(std::move(pool), r, rng);
  std::vector<std::size_t> wins(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) wins[i] = wins_within(pool[i], block, certain);
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (wins[a] != wins[b]) return wins[a] < wins[b];
    double sa = score_of(scores, pool[a]), sb = score_of(scores, pool[b]);
    if (sa != sb) return sa < sb;
    return pool[a] > pool[b];
  });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < r; ++i) out.push_back(pool[idx[i]]);
  return out;
}

void erase_docs(std::vector<std::size_t>& block, const std::vector<std::size_t>& docs) {
  std::erase_if(block, [&](std::size_t d) { return std::find(docs.begin(), docs.end(), d) != docs.end(); });
}

// Orders one block. Position p takes a document of pattern[p] when p is
// inside the pattern. With the heuristic, each pick is restricted to the
// documents beaten by the fewest remaining block members, so certain orders
// are followed whenever the pattern allows.
std::vector<std::size_t> arrange_block(std::vector<std::size_t> docs, std::span<const Group> pattern,
                                       std::span<const Group> groups, const PairOrderSets& certain,
                                       Rng& rng, bool heuristic) {
  std::sort(docs.begin(), docs.end());
  std::vector<std::size_t> out;
  out.reserve(docs.size());
  std::vector<std::size_t> cand;
  while (!docs.empty()) {
    const std::size_t pos = out.size();
    cand.clear();
    for (std::size_t i = 0; i < docs.size(); ++i)
      if (pos >= pattern.size() || groups.empty() || groups[docs[i]] == pattern[pos]) cand.push_back(i);
    if (cand.empty()) throw InfeasibleTemplateError("block cannot supply the required group");
    if (heuristic) {
      std::vector<std::size_t> preds(cand.size(), 0);
      std::size_t fewest = docs.size();
      for (std::size_t c = 0; c < cand.size(); ++c) {
        for (std::size_t e : docs) preds[c] += certain.beats(e, docs[cand[c]]);
        fewest = std::min(fewest, preds[c]);
      }
      std::size_t keep = 0;
      for (std::size_t c = 0; c < cand.size(); ++c)
        if (preds[c] == fewest) cand[keep++] = cand[c];
      cand.resize(keep);
    }
    const std::size_t pick = cand.size() > 1 ? cand[rng.below(cand.size())] : cand.front();
    out.push_back(docs[pick]);
    docs.erase(docs.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return out;
}

std::uint64_t template_code(const GroupTemplate& t) {
  std::uint64_t code = 1;
  for (Group g : t.placement) code = code * 2 + (g == Group::B);
  return code;
}

}  // namespace

double CalibrationEvent::swap_bound() const {
  double total = 0.0;
  for (std::size_t k = 0; k < taken.size(); ++k) {
    double over = static_cast<double>(deficit);
    for (std::size_t j = 1; j < donor_distance[k]; ++j) over += static_cast<double>(passed_over[j - 1]);
    total += static_cast<double>(taken[k]) * over;
  }
  return total;
}

double CalibrationEvent::swap_bound_with_block() const {
  double total = 0.0;
  for (std::size_t k = 0; k < taken.size(); ++k) {
    double over = static_cast<double>(other_in_block);
    for (std::size_t j = 1; j < donor_distance[k]; ++j) over += static_cast<double>(passed_over[j - 1]);
    total += static_cast<double>(taken[k]) * over;
  }
  return total;
}

std::size_t added_regret(std::span<const std::size_t> order, const PairOrderSets& certain) {
  std::size_t violations = 0;
  for (std::size_t a = 0; a < order.size(); ++a)
    for (std::size_t b = a + 1; b < order.size(); ++b) violations += certain.beats(order[b], order[a]);
  return violations;
}

std::vector<Group> group_pattern(std::span<const std::size_t> order, std::span<const Group> groups,
                                 std::size_t k) {
  std::vector<Group> out;
  for (std::size_t p = 0; p < std::min(k, order.size()); ++p) out.push_back(groups[order[p]]);
  return out;
}

CalibratedRanking fair_swap(const BlockPartition& partition, const GroupTemplate& tmpl,
                            const PairOrderSets& certain, std::span<const Group> groups, Rng& rng,
                            const SwapOptions& options, std::span<const double> scores) {
  const std::size_t n = certain.size();
  if (groups.size() != n) throw ValidationError("group labels do not match the candidate count");
  if (!scores.empty() && scores.size() != n) throw ValidationError("scores do not match the candidate count");
  validate_partition(partition, certain);
  const std::size_t k = tmpl.size();
  if (k > n) throw ShortListError("template longer than the candidate list");
  for (Group g : {Group::A, Group::B}) {
    const std::size_t avail = static_cast<std::size_t>(std::count(groups.begin(), groups.end(), g));
    if (tmpl.count(g) > avail)
      throw InfeasibleTemplateError("template " + tmpl.str() + " needs " + std::to_string(tmpl.count(g)) +
                                    " documents of group " + group_letter(g) + ", query has " +
                                    std::to_string(avail));
  }
  const bool heuristic = options.certain_order_heuristic;

  std::vector<std::vector<std::size_t>> work = partition.blocks;
  for (auto& b : work) std::sort(b.begin(), b.end());

  CalibratedRanking result;
  result.applied = tmpl;
  std::size_t pos = 0;
  for (std::size_t b = 0; pos < k; ++b) {
    const std::size_t width = std::min(work[b].size(), k - pos);
    std::span<const Group> segment(tmpl.placement.data() + pos, width);
    const bool full = width == work[b].size();

    for (Group g : {Group::A, Group::B}) {
      const auto need = static_cast<std::size_t>(std::count(segment.begin(), segment.end(), g));
      const std::size_t have = count_group(work[b], groups, g);
      if (have >= need) continue;

      CalibrationEvent ev;
      ev.block_position = b;
      ev.segment_start = pos;
      ev.needed = g;
      ev.deficit = need - have;
      ev.other_in_block = count_group(work[b], groups, other(g));

      if (full) {
        ev.demoted = choose_demoted(work[b], other(g), ev.deficit, groups, certain, scores, rng, heuristic);
        erase_docs(work[b], ev.demoted);
      }

      // Nearest lower blocks first.
      std::size_t left = ev.deficit;
      std::size_t last_donor = b;
      for (std::size_t i = b + 1; left > 0 && i < work.size(); ++i) {
        const std::size_t avail = count_group(work[i], groups, g);
        if (avail == 0) continue;
        const std::size_t take = std::min(left, avail);
        auto chosen = choose_promoted(work[i], g, take, groups, certain, scores, rng, heuristic);
        erase_docs(work[i], chosen);
        work[b].insert(work[b].end(), chosen.begin(), chosen.end());
        ev.promoted.insert(ev.promoted.end(), chosen.begin(), chosen.end());
        ev.donor_distance.push_back(i - b);
        ev.taken.push_back(take);
        left -= take;
        last_donor = i;
      }
      if (left > 0)
        throw InfeasibleTemplateError("not enough group " + std::string(1, group_letter(g)) +
                                      " documents below block " + std::to_string(b));
      for (std::size_t j = b + 1; j < last_donor; ++j)
        ev.passed_over.push_back(count_group(work[j], groups, other(g)));

      for (std::size_t i = work.size(); i-- > b + 1;)
        if (work[i].empty()) work.erase(work.begin() + static_cast<std::ptrdiff_t>(i));
      if (!ev.demoted.empty()) {
        auto demoted = ev.demoted;
        std::sort(demoted.begin(), demoted.end());
        work.insert(work.begin() + static_cast<std::ptrdiff_t>(b + 1), std::move(demoted));
      }
      result.events.push_back(std::move(ev));
    }

    work[b] = arrange_block(std::move(work[b]), segment, groups, certain, rng, heuristic);
    result.order.insert(result.order.end(), work[b].begin(),
                        work[b].begin() + static_cast<std::ptrdiff_t>(width));
    pos += width;
  }

  if (group_pattern(result.order, groups, k) != tmpl.placement)
    throw Error("fair_swap produced a ranking that does not follow template " + tmpl.str());
  result.added_regret = added_regret(result.order, certain);
  result.partition_after.blocks = std::move(work);
  return result;
}

CalibratedRanking select_ranking(const BlockPartition& partition, const TemplateSet& qualified,
                                 const PairOrderSets& certain, std::span<const Group> groups,
                                 const UnfairnessLedger& ledger, Rng& rng,
                                 const SwapOptions& options, std::span<const double> scores) {
  if (qualified.empty()) throw ValidationError("select_ranking needs at least one template");
  const std::uint64_t base = rng.next_u64();
  std::optional<CalibratedRanking> best;
  double best_gap = 0.0;
  std::string failures;
  for (const auto& t : qualified) {
    Rng local(mix_seed(base, template_code(t)));
    CalibratedRanking candidate;
    try {
      candidate = fair_swap(partition, t, certain, groups, local, options, scores);
    } catch (const InfeasibleTemplateError& e) {
      failures += (failures.empty() ? "" : "; ") + t.str() + ": " + e.what();
      continue;
    }
    const double gap = std::abs(ledger.projected(t));
    const bool better = !best || candidate.added_regret < best->added_regret ||
                        (candidate.added_regret == best->added_regret &&
                         (gap < best_gap || (gap == best_gap && template_less(t, best->applied))));
    if (better) {
      best = std::move(candidate);
      best_gap = gap;
    }
  }
  if (!best) throw InfeasibleTemplateError("every qualified template is infeasible: " + failures);
  return std::move(*best);
}

std::vector<std::size_t> rank_by_partition(const BlockPartition& partition, const PairOrderSets& certain,
                                           Rng& rng, const SwapOptions& options) {
  std::vector<std::size_t> order;
  order.reserve(partition.document_count());
  for (const auto& block : partition.blocks) {
    auto arranged = arrange_block(block, {}, {}, certain, rng, options.certain_order_heuristic);
    order.insert(order.end(), arranged.begin(), arranged.end());
  }
  return order;
}

std::string describe(const CalibratedRanking& r) {
  std::ostringstream out;
  out << "template=" << r.applied.str() << " added_regret=" << r.added_regret << " order=";
  for (std::size_t i = 0; i < r.order.size(); ++i) out << (i ? "," : "") << r.order[i];
  out << " blocks=";
  for (const auto& b : r.partition_after.blocks) {
    out << '{';
    for (std::size_t i = 0; i < b.size(); ++i) out << (i ? "," : "") << b[i];
    out << '}';
  }
  for (const auto& ev : r.events) {
    out << " | block " << ev.block_position << " needs " << ev.deficit << group_letter(ev.needed)
        << " promoted=";
    for (std::size_t i = 0; i < ev.promoted.size(); ++i) out << (i ? "," : "") << ev.promoted[i];
    out << " demoted=";
    for (std::size_t i = 0; i < ev.demoted.size(); ++i) out << (i ? "," : "") << ev.demoted[i];
    out << " bound=" << ev.swap_bound();
  }
  return out.str();
}

}  // namespace fairexp
