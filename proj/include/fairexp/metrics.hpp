#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace fairexp {

// DCG@k with gain 2^g - 1 and discount 1/log2(r+1), normalised by the ideal
// ordering of the same grades. 1.0 when the ideal DCG is zero.
double ndcg_at_k(std::span<const int> ranked_grades, std::size_t k);

// As above, but the ideal ordering is taken over `pool` (e.g. every candidate
// of the query) rather than over the ranked list alone.
double ndcg_at_k(std::span<const int> ranked_grades, std::span<const int> pool, std::size_t k);

// sum_t series[t] * gamma^t  (t from 0)
double cumulative_ndcg(std::span<const double> series, double gamma);

// Pairs shown in the wrong order with respect to the grades.
std::size_t pairwise_regret(std::span<const int> ranked_grades);

struct RoundRecord {
  std::uint64_t round = 0;
  std::size_t query = 0;
  double online_ndcg = 0.0;
  double offline_ndcg = 0.0;  // NaN on rounds skipped by the evaluation stride
  double instantaneous_unfairness = 0.0;
  double cumulative_unfairness = 0.0;
  std::size_t added_regret = 0;
  std::size_t pairwise_regret = 0;
  bool fallback = false;
  bool infeasible = false;
  std::size_t clicks = 0;
};

constexpr const char* kTraceFormat = "# fairexp-trace v1";
constexpr const char* kTraceHeader =
    "round,query,online_ndcg,offline_ndcg,instantaneous_unfairness,cumulative_unfairness,"
    "added_regret,pairwise_regret,fallback,infeasible,clicks";

void write_trace_header(std::ostream& out);
void write_trace_row(std::ostream& out, const RoundRecord& r);

}  // namespace fairexp
