#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "fairexp/data.hpp"

namespace fairexp {

// Position-based examination probabilities P(1..k).
class ExposureModel {
 public:
  enum class Kind { LogDiscount, InverseRank, Table };

  static ExposureModel log_discount(std::size_t max_rank);
  static ExposureModel inverse_rank(std::size_t max_rank);
  // Values must be positive and non-increasing.
  static ExposureModel table(std::vector<double> values);
  // Two whitespace-separated columns per line: rank, probability. Ranks must
  // run 1..k in order; '#' starts a comment.
  static ExposureModel load_table(std::istream& in);
  static ExposureModel load_table_file(const std::string& path);

  Kind kind() const { return kind_; }
  std::size_t max_rank() const { return values_.size(); }
  // P(rank), rank is 1-based.
  double at(std::size_t rank) const;
  // Sum of P(1..k).
  double total(std::size_t k) const;

 private:
  ExposureModel(Kind kind, std::vector<double> values) : kind_(kind), values_(std::move(values)) {}

  Kind kind_;
  std::vector<double> values_;
};

double exposure(const ExposureModel& model, std::size_t rank);

// Group placement over the top-k positions with its expected group exposure.
struct GroupTemplate {
  std::vector<Group> placement;
  double exposure_a = 0.0;
  double exposure_b = 0.0;

  std::size_t size() const { return placement.size(); }
  std::size_t count(Group g) const;
  std::string str() const;  // e.g. "AABAB"
};

// Lexicographic order on placements with A before B.
bool template_less(const GroupTemplate& lhs, const GroupTemplate& rhs);

GroupTemplate make_template(std::vector<Group> placement, const ExposureModel& model);
GroupTemplate parse_template(const std::string& letters, const ExposureModel& model);

using TemplateSet = std::vector<GroupTemplate>;

// Every placement in {A,B}^k that does not use more documents of a group than
// the query offers, in lexicographic order. Throws ShortListError if the
// query has fewer than k documents.
TemplateSet enumerate_templates(std::size_t k, GroupCounts counts, const ExposureModel& model);

// Running signed sum of exposure_A - beta * exposure_B over served rankings.
class UnfairnessLedger {
 public:
  UnfairnessLedger(double beta, double epsilon);

  double beta() const { return beta_; }
  double epsilon() const { return epsilon_; }
  double cumulative() const { return cumulative_; }
  // |cumulative|
  double unfairness() const;
  const std::vector<double>& history() const { return history_; }
  // Rounds after which |cumulative| exceeded epsilon.
  std::size_t violation_count() const { return violations_; }

  double contribution(const GroupTemplate& t) const { return t.exposure_a - beta_ * t.exposure_b; }
  // Signed cumulative unfairness if t were served next.
  double projected(const GroupTemplate& t) const { return cumulative_ + contribution(t); }

  // Adds the template's expected exposure; returns the contribution.
  double record(const GroupTemplate& realized);

 private:
  double beta_;
  double epsilon_;
  double cumulative_ = 0.0;
  std::size_t violations_ = 0;
  std::vector<double> history_;
};

double projected_unfairness(const UnfairnessLedger& ledger, const GroupTemplate& t);

struct QualifiedTemplates {
  TemplateSet templates;
  // True when no template met epsilon and the set holds the minimisers of
  // |projected unfairness| instead.
  bool fallback = false;
};

QualifiedTemplates qualified_templates(const UnfairnessLedger& ledger, const TemplateSet& templates);

}  // namespace fairexp
