#include "fairexp/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>
#include <tuple>

#include "fairexp/errors.hpp"
#include "fairexp/fairswap.hpp"

namespace fairexp {

namespace {

constexpr std::size_t kOfflineCutoff = 10;
constexpr std::size_t kOnlineCutoff = 10;

// Independent streams so that the query sequence does not depend on how much
// randomness an algorithm spends on ranking.
enum StreamTag : std::uint64_t { kQueryStream = 101, kRankStream = 102, kClickStream = 103 };

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  if (v == "inf" || v == "+inf" || v == "infinity") return std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) throw ConfigError(key + ": not a number '" + v + "'");
  return x;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const auto x = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || v[0] == '-' || end != v.c_str() + v.size())
    throw ConfigError(key + ": not a non-negative integer '" + v + "'");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw ConfigError(key + ": not a boolean '" + v + "'");
}

GroupStrategy to_strategy(const std::string& key, const std::string& v) {
  if (v == "median") return GroupStrategy::median_split();
  if (v.rfind("threshold:", 0) == 0) return GroupStrategy::at(to_double(key, v.substr(10)));
  throw ConfigError(key + ": expected 'median' or 'threshold:<value>'");
}

}  // namespace

Algorithm parse_algorithm(const std::string& name) {
  if (name == "fairexp_pairrank" || name == "fairexp") return Algorithm::FairExpPairRank;
  if (name == "pairrank") return Algorithm::PairRank;
  if (name == "prop_control") return Algorithm::PropControl;
  if (name == "random") return Algorithm::Random;
  throw ConfigError("unknown algorithm '" + name + "'");
}

const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::FairExpPairRank: return "fairexp_pairrank";
    case Algorithm::PairRank: return "pairrank";
    case Algorithm::PropControl: return "prop_control";
    case Algorithm::Random: return "random";
  }
  return "?";
}

void ExperimentConfig::validate() const {
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  if (k < 1) throw ConfigError("k must be >= 1");
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be non-negative");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
  if (!beta_auto && !(beta > 0.0)) throw ConfigError("beta must be positive");
  if (!(lambda_f >= 0.0)) throw ConfigError("lambda_f must be non-negative");
  if (eval_stride < 1) throw ConfigError("eval_stride must be >= 1");
  click_model.validate();
  if (!data.synthetic) {
    if (data.train_path.empty() || data.test_path.empty())
      throw ConfigError("file datasets need both train and test paths");
    if (data.group_feature == 0) throw ConfigError("file datasets need group_feature");
  }
}

void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value) {
  auto& d = c.data;
  if (key == "algorithm" || key == "algo") c.algorithm = parse_algorithm(value);
  else if (key == "rounds") c.rounds = to_uint(key, value);
  else if (key == "k") c.k = to_uint(key, value);
  else if (key == "lambda") c.lambda = to_double(key, value);
  else if (key == "alpha") c.alpha = to_double(key, value);
  else if (key == "delta") c.delta = to_double(key, value);
  else if (key == "beta") {
    c.beta_auto = value == "auto";
    if (!c.beta_auto) c.beta = to_double(key, value);
  }
  else if (key == "epsilon") c.epsilon = to_double(key, value);
  else if (key == "gamma") c.gamma = to_double(key, value);
  else if (key == "lambda_f") c.lambda_f = to_double(key, value);
  else if (key == "seed") c.seed = to_uint(key, value);
  else if (key == "out") c.out_dir = value;
  else if (key == "exposure") c.exposure = value;
  else if (key == "click_model") {
    if (value.rfind("custom:", 0) == 0) {
      std::vector<double> v;
      std::stringstream ss(value.substr(7));
      std::string item;
      while (std::getline(ss, item, ',')) v.push_back(to_double(key, trim(item)));
      c.click_model = ClickModelConfig::custom(v);
    } else {
      c.click_model = ClickModelConfig::by_name(value);
    }
  }
  else if (key == "heuristic") c.certain_order_heuristic = to_bool(key, value);
  else if (key == "diagnostics") c.diagnostics = to_bool(key, value);
  else if (key == "checkpoint") c.write_checkpoint = to_bool(key, value);
  else if (key == "eval_stride") c.eval_stride = to_uint(key, value);
  else if (key == "synthetic") d.synthetic = to_bool(key, value);
  else if (key == "train") { d.train_path = value; d.synthetic = false; }
  else if (key == "validation") d.validation_path = value;
  else if (key == "test") d.test_path = value;
  else if (key == "group_feature") d.group_feature = to_uint(key, value);
  else if (key == "group_split") d.group_strategy = to_strategy(key, value);
  else if (key == "min_max_scale") d.min_max_scale = to_bool(key, value);
  else if (key == "syn_queries") d.synthetic_spec.n_queries = to_uint(key, value);
  else if (key == "syn_validation_queries") d.synthetic_validation_queries = to_uint(key, value);
  else if (key == "syn_test_queries") d.synthetic_test_queries = to_uint(key, value);
  else if (key == "syn_docs") d.synthetic_spec.docs_per_query = to_uint(key, value);
  else if (key == "syn_dim") d.synthetic_spec.dimension = to_uint(key, value);
  else if (key == "syn_balance") d.synthetic_spec.group_balance = to_double(key, value);
  else if (key == "syn_noise") d.synthetic_spec.grade_noise = to_double(key, value);
  else if (key == "syn_norm") d.synthetic_spec.theta_norm = to_double(key, value);
  else if (key == "syn_seed") d.synthetic_spec.seed = to_uint(key, value);
  else throw ConfigError("unknown configuration key '" + key + "'");
}

ExperimentConfig parse_config(std::istream& in, ExperimentConfig base) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected key=value");
    try {
      apply_setting(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return base;
}

ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  return parse_config(in, std::move(base));
}

ExperimentData load_data(const DatasetSource& source) {
  ExperimentData out;
  if (source.synthetic) {
    SyntheticSpec spec = source.synthetic_spec;
    spec.split = Split::Train;
    out.train = generate_synthetic(spec);
    spec.split = Split::Validation;
    spec.n_queries = std::max<std::size_t>(1, source.synthetic_validation_queries);
    out.validation = generate_synthetic(spec);
    spec.split = Split::Test;
    spec.n_queries = std::max<std::size_t>(1, source.synthetic_test_queries);
    out.test = generate_synthetic(spec);
    return out;
  }

  auto prepare = [&](const std::string& path, Split split) {
    GroupedDataset ds = load_svmlight(path, split);
    if (source.min_max_scale) ds = min_max_scale(std::move(ds));
    return ds;
  };
  out.train = prepare(source.train_path, Split::Train);
  out.test = prepare(source.test_path, Split::Test);
  // The cut is fixed on the training split and replayed on the others.
  out.train = assign_groups(std::move(out.train), source.group_feature, source.group_strategy);
  const auto replay = GroupStrategy::at(out.train.grouping.cut);
  out.test = assign_groups(std::move(out.test), source.group_feature, replay);
  if (!source.validation_path.empty()) {
    out.validation = prepare(source.validation_path, Split::Validation);
    out.validation = assign_groups(std::move(out.validation), source.group_feature, replay);
  } else {
    out.validation = out.test;
    out.validation.split = Split::Validation;
  }
  for (auto* ds : {&out.validation, &out.test})
    if (ds->dimension != out.train.dimension) {
      // Sparse files can disagree on the highest feature id; pad to the widest.
      const std::size_t d = std::max(ds->dimension, out.train.dimension);
      for (auto* fix : {&out.train, &out.validation, &out.test}) {
        for (auto& q : fix->queries)
          for (auto& doc : q.documents) doc.features.conservativeResizeLike(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d)));
        fix->dimension = d;
      }
    }
  return out;
}

ExposureModel build_exposure(const ExperimentConfig& config) {
  if (config.exposure == "log_discount") return ExposureModel::log_discount(config.k);
  if (config.exposure == "inverse_rank") return ExposureModel::inverse_rank(config.k);
  if (config.exposure.rfind("table:", 0) == 0) {
    auto model = ExposureModel::load_table_file(config.exposure.substr(6));
    if (model.max_rank() < config.k)
      throw ConfigError("exposure table covers " + std::to_string(model.max_rank()) +
                        " ranks but k=" + std::to_string(config.k));
    return model;
  }
  throw ConfigError("unknown exposure model '" + config.exposure + "'");
}

std::vector<std::size_t> prop_control_rank(std::span<const double> scores, std::span<const Group> groups,
                                           const UnfairnessLedger& ledger, double lambda_f) {
  if (scores.size() != groups.size()) throw ValidationError("scores and groups differ in length");
  if (!(lambda_f >= 0.0)) throw ValidationError("lambda_f must be non-negative");
  // Positive cumulative unfairness means group A has been over-exposed.
  const double error_b = ledger.cumulative();
  const double error_a = -ledger.cumulative();
  std::vector<double> adjusted(scores.begin(), scores.end());
  for (std::size_t i = 0; i < adjusted.size(); ++i)
    adjusted[i] += lambda_f * std::max(0.0, groups[i] == Group::A ? error_a : error_b);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return adjusted[a] > adjusted[b]; });
  return order;
}

double evaluate_offline(const RankerState& state, const GroupedDataset& split, std::size_t cutoff) {
  if (split.empty()) throw EmptyDatasetError("offline evaluation needs a non-empty split");
  double total = 0.0;
  std::vector<double> scores;
  std::vector<std::size_t> order;
  std::vector<int> ranked;
  for (const auto& q : split.queries) {
    scores.clear();
    for (const auto& doc : q.documents) scores.push_back(state.score(doc.features));
    order.resize(q.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    ranked.clear();
    for (std::size_t i : order) ranked.push_back(q.documents[i].grade);
    total += ndcg_at_k(ranked, cutoff);
  }
  return total / static_cast<double>(split.queries.size());
}

double beta_from_utility(const GroupedDataset& dataset) {
  double sum_a = 0, sum_b = 0;
  std::size_t n_a = 0, n_b = 0;
  for (const auto& q : dataset.queries)
    for (const auto& doc : q.documents) {
      if (doc.group == Group::A) sum_a += doc.grade, ++n_a;
      else sum_b += doc.grade, ++n_b;
    }
  if (n_a == 0 || n_b == 0 || sum_b <= 0.0 || sum_a <= 0.0)
    throw DegenerateGroupingError("group utility ratio undefined (empty group or zero utility)");
  return (sum_a / static_cast<double>(n_a)) / (sum_b / static_cast<double>(n_b));
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  return run_experiment(config, load_data(config.data));
}

ExperimentResult run_experiment(const ExperimentConfig& config, const ExperimentData& data,
                                const RunSinks& sinks) {
  config.validate();
  if (data.train.empty()) throw EmptyDatasetError("training split is empty");
  if (data.test.empty()) throw EmptyDatasetError("test split is empty");

  const ExposureModel exposure_model = build_exposure(config);
  const double beta = config.beta_auto ? beta_from_utility(data.train) : config.beta;
  UnfairnessLedger ledger(beta, config.epsilon);
  RankerState state(data.train.dimension, config.lambda,
                    data.train.theta_norm_bound > 0 ? data.train.theta_norm_bound : 1.0);
  const SwapOptions swap_options{config.certain_order_heuristic};

  Rng query_rng(mix_seed(config.seed, kQueryStream));
  Rng rank_rng(mix_seed(config.seed, kRankStream));
  Rng click_rng(mix_seed(config.seed, kClickStream));

  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, TemplateSet> template_cache;
  auto templates_for = [&](std::size_t k, GroupCounts counts) -> const TemplateSet& {
    const auto key = std::make_tuple(k, std::min(counts.a, k), std::min(counts.b, k));
    auto it = template_cache.find(key);
    if (it == template_cache.end())
      it = template_cache.emplace(key, enumerate_templates(k, counts, exposure_model)).first;
    return it->second;
  };

  if (sinks.trace) write_trace_header(*sinks.trace);
  if (sinks.diagnostics) *sinks.diagnostics << "# fairexp-fairswap-log v1\n";

  ExperimentResult result{{}, state, {}, {}};
  result.trace.reserve(config.rounds);
  std::vector<double> online_series;
  online_series.reserve(config.rounds);
  double last_offline = std::nan("");

  for (std::uint64_t t = 1; t <= config.rounds; ++t) {
    const std::size_t qi = static_cast<std::size_t>(query_rng.below(data.train.queries.size()));
    const QueryCandidates& cands = data.train.queries[qi];
    const std::size_t k = std::min(config.k, cands.size());
    const std::vector<Group> groups = cands.groups();
    std::vector<double> scores;
    scores.reserve(cands.size());
    for (const auto& doc : cands.documents) scores.push_back(state.score(doc.features));

    RoundRecord rec;
    rec.round = t;
    rec.query = qi;
    std::vector<std::size_t> order;
    std::optional<PairOrderSets> sets;
    std::string diag;

    switch (config.algorithm) {
      case Algorithm::PairRank:
      case Algorithm::FairExpPairRank: {
        sets = classify_pairs(state, cands, config.alpha);
        const CondensedPartition condensed = partition_blocks_condensed(*sets);
        const BlockPartition& partition = condensed.partition;
        if (condensed.merged_components > 0) {
          ++result.summary.cycle_rounds;
          if (sinks.diagnostics)
            diag = "merged " + std::to_string(condensed.merged_components) + " components on a certain-order cycle; ";
        }
        order = rank_by_partition(partition, *sets, rank_rng, swap_options);
        if (config.algorithm == Algorithm::PairRank) break;

        const TemplateSet& templates = templates_for(k, cands.counts());
        const QualifiedTemplates qualified = qualified_templates(ledger, templates);
        rec.fallback = qualified.fallback;
        const auto own = group_pattern(order, groups, k);
        const bool own_ok = std::any_of(qualified.templates.begin(), qualified.templates.end(),
                                        [&](const GroupTemplate& q) { return q.placement == own; });
        if (own_ok) {
          if (sinks.diagnostics) diag += "pairrank pattern qualified";
          break;
        }
        try {
          CalibratedRanking calibrated = select_ranking(partition, qualified.templates, *sets, groups,
                                                        ledger, rank_rng, swap_options, scores);
          if (sinks.diagnostics) diag += describe(calibrated);
          order = std::move(calibrated.order);
        } catch (const InfeasibleTemplateError& e) {
          rec.infeasible = true;
          if (sinks.diagnostics) diag += std::string("infeasible: ") + e.what();
        }
        break;
      }
      case Algorithm::PropControl:
        sets = classify_pairs(state, cands, config.alpha);
        order = prop_control_rank(scores, groups, ledger, config.lambda_f);
        break;
      case Algorithm::Random:
        order.resize(cands.size());
        std::iota(order.begin(), order.end(), 0);
        rank_rng.shuffle(std::span<std::size_t>(order));
        break;
    }

    const std::span<const std::size_t> displayed(order.data(), k);
    std::vector<int> shown_grades, pool = cands.grades();
    for (std::size_t d : displayed) shown_grades.push_back(cands.documents[d].grade);

    const ClickOutcome clicks = simulate(shown_grades, config.click_model, click_rng);
    const GroupTemplate realized = make_template(group_pattern(displayed, groups, k), exposure_model);
    rec.instantaneous_unfairness = ledger.record(realized);
    rec.cumulative_unfairness = ledger.cumulative();
    rec.added_regret = sets ? added_regret(displayed, *sets) : 0;
    rec.pairwise_regret = pairwise_regret(shown_grades);
    rec.online_ndcg = ndcg_at_k(shown_grades, pool, std::min(kOnlineCutoff, k));
    rec.clicks = clicks.click_count();

    if (config.algorithm != Algorithm::Random) {
      const auto pairs = infer_pairs(cands, displayed, clicks.clicks);
      try {
        state.update(pairs);
      } catch (const NumericError&) {
        if (sinks.trace) sinks.trace->flush();
        throw;
      }
    }

    if (t % config.eval_stride == 0 || t == config.rounds || t == 1)
      last_offline = evaluate_offline(state, data.test, kOfflineCutoff);
    rec.offline_ndcg = (t % config.eval_stride == 0 || t == config.rounds || t == 1) ? last_offline
                                                                                     : std::nan("");

    online_series.push_back(rec.online_ndcg);
    result.summary.total_added_regret += rec.added_regret;
    result.summary.fallback_rounds += rec.fallback;
    result.summary.infeasible_rounds += rec.infeasible;
    if (sinks.trace) write_trace_row(*sinks.trace, rec);
    if (sinks.diagnostics) *sinks.diagnostics << "round=" << t << " query=" << qi << ' ' << diag << '\n';
    result.trace.push_back(rec);
  }

  if (sinks.trace) sinks.trace->flush();
  result.final_state = std::move(state);
  result.ledger_history = ledger.history();
  result.summary.final_offline_ndcg = last_offline;
  result.summary.cumulative_ndcg = cumulative_ndcg(online_series, config.gamma);
  result.summary.final_unfairness = ledger.unfairness();
  result.summary.violation_rounds = ledger.violation_count();
  result.summary.beta = beta;
  return result;
}

void write_summary(std::ostream& out, const ExperimentConfig& config, const ExperimentSummary& s) {
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "# fairexp-summary v1\n"
      << "algorithm=" << algorithm_name(config.algorithm) << '\n'
      << "rounds=" << config.rounds << '\n'
      << "k=" << config.k << '\n'
      << "seed=" << config.seed << '\n'
      << "beta=" << num(s.beta) << '\n'
      << "epsilon=" << num(config.epsilon) << '\n'
      << "final_offline_ndcg=" << num(s.final_offline_ndcg) << '\n'
      << "cumulative_ndcg=" << num(s.cumulative_ndcg) << '\n'
      << "final_unfairness=" << num(s.final_unfairness) << '\n'
      << "total_added_regret=" << s.total_added_regret << '\n'
      << "fallback_rounds=" << s.fallback_rounds << '\n'
      << "infeasible_rounds=" << s.infeasible_rounds << '\n'
      << "violation_rounds=" << s.violation_rounds << '\n'
      << "cycle_rounds=" << s.cycle_rounds << '\n';
}

ExperimentResult run_to_directory(const ExperimentConfig& config) {
  config.validate();
  if (config.out_dir.empty()) throw ConfigError("no output directory given");
  std::filesystem::create_directories(config.out_dir);
  const std::filesystem::path dir(config.out_dir);
  const ExperimentData data = load_data(config.data);

  std::ofstream trace(dir / "trace.csv");
  std::ofstream diag;
  RunSinks sinks{&trace, nullptr};
  if (config.diagnostics) {
    diag.open(dir / "fairswap.log");
    sinks.diagnostics = &diag;
  }
  ExperimentResult result = run_experiment(config, data, sinks);

  std::ofstream summary(dir / "summary.txt");
  write_summary(summary, config, result.summary);
  if (config.write_checkpoint) {
    std::ofstream ckpt(dir / "checkpoint");
    result.final_state.save(ckpt);
  }
  return result;
}

SweepResult sweep(const ExperimentConfig& base, std::span<const double> grid) {
  static constexpr double kDefaultGrid[] = {0.1, 0.01, 0.001};
  if (grid.empty()) grid = kDefaultGrid;
  base.validate();
  const ExperimentData data = load_data(base.data);

  std::vector<ExperimentConfig> configs;
  for (double lambda : grid) {
    for (double alpha : grid) {
      const bool uses_alpha =
          base.algorithm == Algorithm::FairExpPairRank || base.algorithm == Algorithm::PairRank;
      if (!uses_alpha && alpha != grid.front()) continue;
      const std::span<const double> gains =
          base.algorithm == Algorithm::PropControl ? grid : std::span<const double>(grid.data(), 1);
      for (double lambda_f : gains) {
        ExperimentConfig c = base;
        c.lambda = lambda;
        c.alpha = alpha;
        if (base.algorithm == Algorithm::PropControl) c.lambda_f = lambda_f;
        configs.push_back(c);
      }
    }
  }

  auto evaluate = [&data](ExperimentConfig c) {
    ExperimentResult r = run_experiment(c, data);
    return SweepPoint{c.lambda, c.alpha, c.lambda_f, evaluate_offline(r.final_state, data.validation)};
  };

  SweepResult out;
  const std::size_t workers = std::max(1U, std::thread::hardware_concurrency());
  for (std::size_t start = 0; start < configs.size(); start += workers) {
    std::vector<std::future<SweepPoint>> batch;
    for (std::size_t i = start; i < std::min(configs.size(), start + workers); ++i)
      batch.push_back(std::async(std::launch::async, evaluate, configs[i]));
    for (auto& f : batch) out.points.push_back(f.get());
  }
  out.best = out.points.front();
  for (const auto& p : out.points)
    if (p.validation_ndcg > out.best.validation_ndcg) out.best = p;
  return out;
}

}  // namespace fairexp
