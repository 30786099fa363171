#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairexp/click_sim.hpp"
#include "fairexp/data.hpp"
#include "fairexp/fairness.hpp"
#include "fairexp/metrics.hpp"
#include "fairexp/ranker.hpp"

namespace fairexp {

enum class Algorithm { FairExpPairRank, PairRank, PropControl, Random };

Algorithm parse_algorithm(const std::string& name);
const char* algorithm_name(Algorithm a);

struct DatasetSource {
  bool synthetic = true;
  SyntheticSpec synthetic_spec;
  std::size_t synthetic_validation_queries = 20;
  std::size_t synthetic_test_queries = 50;

  std::string train_path;
  std::string validation_path;
  std::string test_path;
  std::size_t group_feature = 0;  // 1-based; required for file data
  GroupStrategy group_strategy;
  bool min_max_scale = false;
};

struct ExperimentConfig {
  Algorithm algorithm = Algorithm::FairExpPairRank;
  DatasetSource data;
  ClickModelConfig click_model = ClickModelConfig::perfect();
  std::uint64_t rounds = 1000;
  std::size_t k = 10;
  double lambda = 0.1;
  double alpha = 0.1;
  double delta = 0.1;
  double beta = 1.0;
  bool beta_auto = false;
  double epsilon = 0.1;  // +inf disables the fairness constraint
  double gamma = 0.9995;
  double lambda_f = 0.01;  // proportional-controller gain
  std::string exposure = "log_discount";  // log_discount | inverse_rank | table:<path>
  std::uint64_t seed = 0;
  std::string out_dir;
  bool certain_order_heuristic = true;
  bool diagnostics = false;
  bool write_checkpoint = true;
  std::size_t eval_stride = 1;

  void validate() const;
};

// Applies one key=value setting. Unknown keys raise ConfigError.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);
// Plain-text key=value lines; '#' starts a comment.
ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {});
ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {});

struct ExperimentData {
  GroupedDataset train;
  GroupedDataset validation;
  GroupedDataset test;
};

ExperimentData load_data(const DatasetSource& source);

ExposureModel build_exposure(const ExperimentConfig& config);

struct ExperimentSummary {
  double final_offline_ndcg = 0.0;
  double cumulative_ndcg = 0.0;
  double final_unfairness = 0.0;
  std::size_t total_added_regret = 0;
  std::size_t fallback_rounds = 0;
  std::size_t infeasible_rounds = 0;
  std::size_t violation_rounds = 0;  // rounds ending with |UF_t| > epsilon
  std::size_t cycle_rounds = 0;      // rounds whose partition merged a certain-order cycle
  double beta = 1.0;
};

struct ExperimentResult {
  std::vector<RoundRecord> trace;
  RankerState final_state;
  ExperimentSummary summary;
  std::vector<double> ledger_history;
};

// Optional streaming outputs; rows are flushed as rounds complete so an
// aborted run leaves its partial trace behind.
struct RunSinks {
  std::ostream* trace = nullptr;
  std::ostream* diagnostics = nullptr;
};

ExperimentResult run_experiment(const ExperimentConfig& config);
ExperimentResult run_experiment(const ExperimentConfig& config, const ExperimentData& data,
                                const RunSinks& sinks = {});

// Runs and writes trace.csv, summary.txt, checkpoint and (with diagnostics)
// fairswap.log into config.out_dir.
ExperimentResult run_to_directory(const ExperimentConfig& config);

void write_summary(std::ostream& out, const ExperimentConfig& config, const ExperimentSummary& s);

// Score ranking with every document of the under-exposed group lifted by
// lambda_f times the ledger imbalance. Stable on index.
std::vector<std::size_t> prop_control_rank(std::span<const double> scores, std::span<const Group> groups,
                                           const UnfairnessLedger& ledger, double lambda_f);

// Mean NDCG@cutoff of theta-score rankings (ties by index) over a split.
double evaluate_offline(const RankerState& state, const GroupedDataset& split, std::size_t cutoff = 10);

// Mean grade of group A over mean grade of group B.
double beta_from_utility(const GroupedDataset& dataset);

struct SweepPoint {
  double lambda = 0.0;
  double alpha = 0.0;
  double lambda_f = 0.0;
  double validation_ndcg = 0.0;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  SweepPoint best;
};

// Grid search over lambda, alpha (and lambda_f for prop_control), selecting
// on final validation NDCG@10. Configurations run concurrently.
SweepResult sweep(const ExperimentConfig& base, std::span<const double> grid = {});

}  // namespace fairexp
