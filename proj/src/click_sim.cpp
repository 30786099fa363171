#include "fairexp/click_sim.hpp"

#include <algorithm>

#include "fairexp/errors.hpp"

namespace fairexp {

ClickModelConfig ClickModelConfig::perfect() {
  return {"perfect", {0.0, 0.2, 0.4, 0.8, 1.0}, {0.0, 0.0, 0.0, 0.0, 0.0}};
}

ClickModelConfig ClickModelConfig::navigational() {
  return {"navigational", {0.05, 0.3, 0.5, 0.7, 0.95}, {0.2, 0.3, 0.5, 0.7, 0.9}};
}

ClickModelConfig ClickModelConfig::informational() {
  return {"informational", {0.4, 0.6, 0.7, 0.8, 0.9}, {0.1, 0.2, 0.3, 0.4, 0.5}};
}

ClickModelConfig ClickModelConfig::by_name(const std::string& name) {
  if (name == "perfect" || name == "per") return perfect();
  if (name == "navigational" || name == "nav") return navigational();
  if (name == "informational" || name == "inf") return informational();
  throw ConfigError("unknown click model '" + name + "'");
}

ClickModelConfig ClickModelConfig::custom(std::span<const double> v) {
  if (v.size() != 10) throw ConfigError("custom click model needs ten probabilities");
  ClickModelConfig c;
  std::copy(v.begin(), v.begin() + 5, c.click_prob.begin());
  std::copy(v.begin() + 5, v.end(), c.stop_prob.begin());
  c.validate();
  return c;
}

void ClickModelConfig::validate() const {
  for (double p : click_prob)
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("click probability outside [0, 1]");
  for (double p : stop_prob)
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("stop probability outside [0, 1]");
}

std::size_t ClickOutcome::click_count() const {
  return static_cast<std::size_t>(std::count(clicks.begin(), clicks.end(), true));
}

ClickOutcome simulate(std::span<const int> grades, const ClickModelConfig& config, Rng& rng) {
  for (int g : grades)
    if (g < 0 || g > 4) throw ValidationError("grade " + std::to_string(g) + " outside 0..4");
  ClickOutcome out;
  out.clicks.assign(grades.size(), false);
  for (std::size_t pos = 0; pos < grades.size(); ++pos) {
    out.examined_through = pos + 1;
    const auto g = static_cast<std::size_t>(grades[pos]);
    if (rng.uniform() < config.click_prob[g]) {
      out.clicks[pos] = true;
      if (rng.uniform() < config.stop_prob[g]) break;
    }
  }
  return out;
}

}  // namespace fairexp
