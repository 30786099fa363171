#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fairexp/click_sim.hpp"
#include "fairexp/errors.hpp"
#include "fairexp/fairness.hpp"
#include "fairexp/fairswap.hpp"
#include "fairexp/harness.hpp"
#include "fairexp/metrics.hpp"

namespace py = pybind11;
using namespace fairexp;

namespace {

std::vector<Group> to_groups(const std::string& letters) {
  std::vector<Group> out;
  for (char c : letters) {
    if (c == 'A') out.push_back(Group::A);
    else if (c == 'B') out.push_back(Group::B);
    else throw ValidationError(std::string("group letters must be A or B, got '") + c + "'");
  }
  return out;
}

ExperimentConfig config_from(const std::map<std::string, std::string>& settings) {
  ExperimentConfig c;
  c.write_checkpoint = false;
  for (const auto& [k, v] : settings) apply_setting(c, k, v);
  c.validate();
  return c;
}

ExperimentResult run_released(const ExperimentConfig& config) {
  py::gil_scoped_release release;
  return run_experiment(config);
}

py::dict summary_dict(const ExperimentSummary& s) {
  py::dict d;
  d["final_offline_ndcg"] = s.final_offline_ndcg;
  d["cumulative_ndcg"] = s.cumulative_ndcg;
  d["final_unfairness"] = s.final_unfairness;
  d["total_added_regret"] = s.total_added_regret;
  d["fallback_rounds"] = s.fallback_rounds;
  d["infeasible_rounds"] = s.infeasible_rounds;
  d["violation_rounds"] = s.violation_rounds;
  d["cycle_rounds"] = s.cycle_rounds;
  d["beta"] = s.beta;
  return d;
}

}  // namespace

PYBIND11_MODULE(_fairexp, m) {
  m.doc() = "Fair-exposure online learning to rank simulator.";

  // Translators run newest first, so the base class goes in first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<InfeasibleTemplateError>(m, "InfeasibleTemplateError", PyExc_ValueError);

  m.def(
      "ndcg_at_k", [](const std::vector<int>& grades, std::size_t k) { return ndcg_at_k(grades, k); },
      py::arg("grades"), py::arg("k"));
  m.def(
      "ndcg_at_k_pool",
      [](const std::vector<int>& grades, const std::vector<int>& pool, std::size_t k) {
        return ndcg_at_k(grades, pool, k);
      },
      py::arg("grades"), py::arg("pool"), py::arg("k"));
  m.def(
      "cumulative_ndcg",
      [](const std::vector<double>& series, double gamma) { return cumulative_ndcg(series, gamma); },
      py::arg("series"), py::arg("gamma"));
  m.def(
      "pairwise_regret", [](const std::vector<int>& grades) { return pairwise_regret(grades); },
      py::arg("grades"));

  m.def(
      "template_exposure",
      [](const std::string& letters, const std::string& model) {
        const auto em = model == "inverse_rank" ? ExposureModel::inverse_rank(letters.size())
                                                : ExposureModel::log_discount(letters.size());
        const auto t = parse_template(letters, em);
        return std::pair{t.exposure_a, t.exposure_b};
      },
      py::arg("template"), py::arg("model") = "log_discount",
      "(exposure_A, exposure_B) of a placement such as 'AABAB'.");

  m.def(
      "simulate_clicks",
      [](const std::vector<int>& grades, const std::string& model, std::uint64_t seed) {
        Rng rng(seed);
        const auto out = simulate(grades, ClickModelConfig::by_name(model), rng);
        return std::pair{std::vector<bool>(out.clicks.begin(), out.clicks.end()), out.examined_through};
      },
      py::arg("grades"), py::arg("model"), py::arg("seed") = 0);

  m.def(
      "fair_swap",
      [](const std::vector<std::vector<std::size_t>>& blocks, const std::string& groups,
         const std::string& placement, std::uint64_t seed, bool heuristic) {
        // Blocks form a weak order: every cross-block pair is certain.
        BlockPartition p{blocks};
        PairOrderSets certain(p.document_count());
        for (std::size_t a = 0; a < blocks.size(); ++a)
          for (std::size_t b = a + 1; b < blocks.size(); ++b)
            for (std::size_t w : blocks[a])
              for (std::size_t l : blocks[b]) certain.set_certain(w, l);
        const auto g = to_groups(groups);
        const auto t = parse_template(placement, ExposureModel::log_discount(placement.size()));
        Rng rng(seed);
        const auto r = fair_swap(p, t, certain, g, rng, SwapOptions{heuristic});
        return std::pair{r.order, r.added_regret};
      },
      py::arg("blocks"), py::arg("groups"), py::arg("template"), py::arg("seed") = 0,
      py::arg("heuristic") = true,
      "Calibrates a weak-order block partition to a placement; returns (order, added_regret).");

  m.def(
      "run",
      [](const std::map<std::string, std::string>& settings) {
        const ExperimentConfig config = config_from(settings);
        const ExperimentResult r = run_released(config);
        py::dict trace;
        std::vector<double> online, offline, cumulative;
        std::vector<std::size_t> regret;
        for (const auto& row : r.trace) {
          online.push_back(row.online_ndcg);
          offline.push_back(row.offline_ndcg);
          cumulative.push_back(row.cumulative_unfairness);
          regret.push_back(row.added_regret);
        }
        trace["online_ndcg"] = online;
        trace["offline_ndcg"] = offline;
        trace["cumulative_unfairness"] = cumulative;
        trace["added_regret"] = regret;
        py::dict out;
        out["summary"] = summary_dict(r.summary);
        out["trace"] = trace;
        return out;
      },
      py::arg("settings"),
      "Runs one experiment from key=value settings (the config-file keys) and returns its summary "
      "and per-round series.");

  m.def(
      "summary_text",
      [](const std::map<std::string, std::string>& settings) {
        const ExperimentConfig config = config_from(settings);
        const ExperimentResult r = run_released(config);
        std::ostringstream os;
        write_summary(os, config, r.summary);
        return os.str();
      },
      py::arg("settings"));
}
