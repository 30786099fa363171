#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fairexp/random.hpp"

namespace fairexp {

// Dependent click model: scan top-down, click with click_prob[grade], and
// after a click stop with stop_prob[grade].
struct ClickModelConfig {
  std::string name = "custom";
  std::array<double, 5> click_prob{};
  std::array<double, 5> stop_prob{};

  static ClickModelConfig perfect();
  static ClickModelConfig navigational();
  static ClickModelConfig informational();
  // "perfect"/"per", "navigational"/"nav", "informational"/"inf".
  static ClickModelConfig by_name(const std::string& name);
  // Ten numbers: five click probabilities then five stop probabilities.
  static ClickModelConfig custom(std::span<const double> ten_values);

  void validate() const;
};

struct ClickOutcome {
  std::vector<bool> clicks;
  std::size_t examined_through = 0;  // 1-based last examined position
  std::size_t click_count() const;
};

ClickOutcome simulate(std::span<const int> displayed_grades, const ClickModelConfig& config, Rng& rng);

}  // namespace fairexp
