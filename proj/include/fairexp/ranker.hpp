#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fairexp/data.hpp"

namespace fairexp {

// One pairwise training example: x_m - x_n with preference label y.
struct PairSample {
  Eigen::VectorXd diff;
  double label = 1.0;
};

struct UpdateReport {
  double loss_at_warm_start = 0.0;
  double loss = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
};

inline double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// Online pairwise logistic-regression ranker.
//
// Holds theta, the information matrix M = lambda*I + sum x x^T over every pair
// seen so far, and the pair buffer itself. update() re-minimises the
// regularised cross-entropy over the whole buffer with Newton steps
// warm-started at the previous theta.
class RankerState {
 public:
  static constexpr double kGradientTolerance = 1e-6;
  static constexpr int kMaxIterations = 100;
  static constexpr double kDecrementTolerance = 1e-13;

  RankerState(std::size_t dimension, double lambda, double theta_norm_bound = 1.0);

  std::size_t dimension() const { return static_cast<std::size_t>(theta_.size()); }
  double lambda() const { return lambda_; }
  double theta_norm_bound() const { return theta_norm_bound_; }
  std::uint64_t round() const { return round_; }
  const Eigen::VectorXd& theta() const { return theta_; }
  const Eigen::MatrixXd& info_matrix() const { return info_; }
  std::size_t pair_count() const { return labels_.size(); }
  PairSample pair(std::size_t i) const;

  double score(const Eigen::VectorXd& x) const;
  double pairwise_prob(const Eigen::VectorXd& xi, const Eigen::VectorXd& xj) const;
  // alpha * ||x_i - x_j||_{M^{-1}}
  double confidence_width(const Eigen::VectorXd& xi, const Eigen::VectorXd& xj,
                          double alpha) const;
  // Squared M^{-1} norm of an arbitrary vector.
  double inverse_norm_sq(const Eigen::VectorXd& v) const;

  // Regularised loss and its gradient over the current buffer.
  double loss(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const;

  // Appends pairs, grows M by their outer products, re-fits theta and
  // advances the round counter.
  UpdateReport update(std::span<const PairSample> new_pairs);

  // Overwrites theta, e.g. to evaluate a known model.
  void set_theta(const Eigen::VectorXd& theta);

  // Closed-form exploration width alpha_t from the link/noise constants.
  double closed_form_alpha(double k_mu, double c_mu, double noise_r, double delta1) const;

  void save(std::ostream& out) const;
  static RankerState load(std::istream& in);

 private:
  void refresh_factorisation();

  double lambda_;
  double theta_norm_bound_;
  std::uint64_t round_ = 0;
  Eigen::VectorXd theta_;
  Eigen::MatrixXd info_;
  Eigen::LLT<Eigen::MatrixXd> info_llt_;
  std::vector<double> rows_;  // pair buffer, row-major N x d
  std::vector<double> labels_;
};

// Pair relation over the candidates of one query. beats(i, j) means i is
// ranked above j with high confidence; a pair that is certain in neither
// direction is uncertain.
class PairOrderSets {
 public:
  explicit PairOrderSets(std::size_t n = 0) : n_(n), beats_(n * n, 0) {}

  std::size_t size() const { return n_; }
  void set_certain(std::size_t winner, std::size_t loser);
  bool beats(std::size_t i, std::size_t j) const { return beats_[i * n_ + j] != 0; }
  bool certain(std::size_t i, std::size_t j) const { return beats(i, j) || beats(j, i); }
  bool uncertain(std::size_t i, std::size_t j) const { return i != j && !certain(i, j); }

  // (winner, loser) pairs
  std::vector<std::pair<std::size_t, std::size_t>> certain_pairs() const;
  // (i, j) with i < j
  std::vector<std::pair<std::size_t, std::size_t>> uncertain_pairs() const;

 private:
  std::size_t n_;
  std::vector<std::uint8_t> beats_;
};

struct BlockPartition {
  std::vector<std::vector<std::size_t>> blocks;

  std::size_t document_count() const;
  // Block index per document.
  std::vector<std::size_t> block_of() const;
};

// Certain iff the confidence interval around sigma(x_ij^T theta) excludes 1/2.
// An interval touching 1/2 is uncertain.
PairOrderSets classify_pairs(const RankerState& state, const QueryCandidates& candidates,
                             double alpha);

// Connected components of the uncertain-pair graph, ordered so that every
// cross-block pair is certain in the forward direction. Throws
// PartitionInfeasibleError when the component order has a cycle.
BlockPartition partition_blocks(const PairOrderSets& order_sets);

// As partition_blocks, but every cycle among components is merged into one
// block. Pair-specific widths can make i > k and k > j certain while (i, j)
// stays uncertain, which closes a cycle through the component of i and j.
struct CondensedPartition {
  BlockPartition partition;
  std::size_t merged_components = 0;  // components folded into cycle blocks
};
CondensedPartition partition_blocks_condensed(const PairOrderSets& order_sets);

// Throws if the partition is not exhaustive and disjoint or if some
// cross-block pair is not certain in the forward direction.
void validate_partition(const BlockPartition& partition, const PairOrderSets& order_sets);

// Preference pairs from one impression: every clicked document against every
// unclicked document at or above the last click.
std::vector<PairSample> infer_pairs(const QueryCandidates& candidates,
                                    std::span<const std::size_t> displayed,
                                    const std::vector<bool>& clicks);

}  // namespace fairexp
