#include "fairexp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>

#include "fairexp/errors.hpp"

namespace fairexp {

namespace {

double dcg(std::span<const int> grades, std::size_t k) {
  double total = 0.0;
  for (std::size_t r = 0; r < std::min(k, grades.size()); ++r)
    total += (std::exp2(grades[r]) - 1.0) / std::log2(static_cast<double>(r + 2));
  return total;
}

}  // namespace

double ndcg_at_k(std::span<const int> ranked, std::size_t k) { return ndcg_at_k(ranked, ranked, k); }

double ndcg_at_k(std::span<const int> ranked, std::span<const int> pool, std::size_t k) {
  if (k == 0) throw ValidationError("ndcg cutoff must be at least 1");
  std::vector<int> ideal(pool.begin(), pool.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double best = dcg(ideal, k);
  if (best <= 0.0) return 1.0;
  return dcg(ranked, k) / best;
}

double cumulative_ndcg(std::span<const double> series, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ValidationError("gamma must lie in (0, 1]");
  double total = 0.0, weight = 1.0;
  for (double v : series) {
    total += v * weight;
    weight *= gamma;
  }
  return total;
}

std::size_t pairwise_regret(std::span<const int> ranked) {
  std::size_t inversions = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i)
    for (std::size_t j = i + 1; j < ranked.size(); ++j) inversions += ranked[j] > ranked[i];
  return inversions;
}

void write_trace_header(std::ostream& out) { out << kTraceFormat << '\n' << kTraceHeader << '\n'; }

void write_trace_row(std::ostream& out, const RoundRecord& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%llu,%zu,%.17g,%.17g,%.17g,%.17g,%zu,%zu,%d,%d,%zu\n",
                static_cast<unsigned long long>(r.round), r.query, r.online_ndcg, r.offline_ndcg,
                r.instantaneous_unfairness, r.cumulative_unfairness, r.added_regret,
                r.pairwise_regret, r.fallback ? 1 : 0, r.infeasible ? 1 : 0, r.clicks);
  out << buf;
}

}  // namespace fairexp
