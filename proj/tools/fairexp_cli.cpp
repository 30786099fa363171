#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fairexp/errors.hpp"
#include "fairexp/harness.hpp"

namespace fs = std::filesystem;
using namespace fairexp;

namespace {

struct CommonFlags {
  std::string config;
  std::string dataset;
  bool synthetic = false;
  std::map<std::string, std::string> values;  // config key -> raw flag value
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "key=value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--dataset", f.dataset,
                  "directory holding train.txt, test.txt and optionally vali.txt");
  cmd->add_flag("--synthetic", f.synthetic, "use generated data (default)");
  const std::pair<const char*, const char*> keyed[] = {
      {"--algo", "algorithm"},   {"--click-model", "click_model"}, {"--rounds", "rounds"},
      {"--k", "k"},              {"--epsilon", "epsilon"},         {"--beta", "beta"},
      {"--lambda", "lambda"},    {"--alpha", "alpha"},             {"--gamma", "gamma"},
      {"--seed", "seed"},        {"--out", "out"},
  };
  for (const auto& [flag, key] : keyed) {
    std::string k = key;
    cmd->add_option_function<std::string>(flag, [&f, k](const std::string& v) { f.values[k] = v; },
                                           std::string("sets ") + key);
  }
  cmd->add_option("--set", f.sets, "extra key=value overrides")->allow_extra_args(false);
}

ExperimentConfig resolve(const CommonFlags& f) {
  ExperimentConfig config;
  if (!f.config.empty()) config = load_config(f.config);
  if (!f.dataset.empty()) {
    const fs::path dir(f.dataset);
    config.data.synthetic = false;
    config.data.train_path = (dir / "train.txt").string();
    config.data.test_path = (dir / "test.txt").string();
    if (fs::exists(dir / "vali.txt")) config.data.validation_path = (dir / "vali.txt").string();
  }
  if (f.synthetic) config.data.synthetic = true;
  for (const auto& [key, value] : f.values) apply_setting(config, key, value);
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_setting(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  config.validate();
  return config;
}

int cmd_run(const CommonFlags& f) {
  ExperimentConfig config = resolve(f);
  if (config.out_dir.empty()) config.out_dir = "fairexp_out";
  const ExperimentResult r = run_to_directory(config);
  write_summary(std::cout, config, r.summary);
  return 0;
}

int cmd_sweep(const CommonFlags& f) {
  ExperimentConfig config = resolve(f);
  if (config.out_dir.empty()) config.out_dir = "fairexp_sweep";
  const SweepResult result = sweep(config);
  fs::create_directories(config.out_dir);
  std::ofstream out(fs::path(config.out_dir) / "sweep.csv");
  out << "# fairexp-sweep v1\nlambda,alpha,lambda_f,validation_ndcg\n";
  char line[160];
  for (const auto& p : result.points) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g\n", p.lambda, p.alpha, p.lambda_f,
                  p.validation_ndcg);
    out << line;
  }
  std::printf("best lambda=%g alpha=%g lambda_f=%g validation_ndcg=%.6f\n", result.best.lambda,
              result.best.alpha, result.best.lambda_f, result.best.validation_ndcg);
  return 0;
}

int cmd_eval(const CommonFlags& f, const std::string& checkpoint) {
  const ExperimentConfig config = resolve(f);
  std::ifstream in(checkpoint);
  if (!in) throw ConfigError("cannot open checkpoint " + checkpoint);
  const RankerState state = RankerState::load(in);
  const ExperimentData data = load_data(config.data);
  if (state.dimension() != data.test.dimension)
    throw DimensionError(data.test.dimension, state.dimension());
  std::printf("offline_ndcg@10=%.6f queries=%zu\n", evaluate_offline(state, data.test),
              data.test.queries.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fair-exposure online learning to rank simulator"};
  app.require_subcommand(1);

  CommonFlags run_flags, sweep_flags, eval_flags;
  std::string checkpoint;
  auto* run = app.add_subcommand("run", "run one experiment and write its outputs");
  add_common(run, run_flags);
  auto* sw = app.add_subcommand("sweep", "grid-search lambda and alpha on validation NDCG");
  add_common(sw, sweep_flags);
  auto* ev = app.add_subcommand("eval", "offline NDCG@10 of a checkpoint on the test split");
  add_common(ev, eval_flags);
  ev->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_flags);
    if (*sw) return cmd_sweep(sweep_flags);
    if (*ev) return cmd_eval(eval_flags, checkpoint);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
