#include "fairexp/fairness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>

#include "fairexp/errors.hpp"

namespace fairexp {

ExposureModel ExposureModel::log_discount(std::size_t max_rank) {
  std::vector<double> v(max_rank);
  for (std::size_t r = 1; r <= max_rank; ++r) v[r - 1] = 1.0 / std::log2(static_cast<double>(r + 1));
  return {Kind::LogDiscount, std::move(v)};
}

ExposureModel ExposureModel::inverse_rank(std::size_t max_rank) {
  std::vector<double> v(max_rank);
  for (std::size_t r = 1; r <= max_rank; ++r) v[r - 1] = 1.0 / static_cast<double>(r);
  return {Kind::InverseRank, std::move(v)};
}

ExposureModel ExposureModel::table(std::vector<double> values) {
  if (values.empty()) throw ValidationError("exposure table is empty");
  for (std::size_t r = 0; r < values.size(); ++r) {
    if (!(values[r] > 0.0) || !std::isfinite(values[r]))
      throw ValidationError("exposure P(" + std::to_string(r + 1) + ") must be positive");
    if (r > 0 && values[r] > values[r - 1])
      throw ValidationError("exposure must be non-increasing in rank (rank " + std::to_string(r + 1) + ")");
  }
  return {Kind::Table, std::move(values)};
}

ExposureModel ExposureModel::load_table(std::istream& in) {
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream row(line);
    std::size_t rank = 0;
    double p = 0.0;
    if (!(row >> rank)) continue;
    std::string extra;
    if (!(row >> p) || (row >> extra)) throw ParseError(line_no, "expected '<rank> <probability>'");
    if (rank != values.size() + 1)
      throw ParseError(line_no, "ranks must start at 1 and increase by one");
    values.push_back(p);
  }
  return table(std::move(values));
}

ExposureModel ExposureModel::load_table_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return load_table(in);
}

double ExposureModel::at(std::size_t rank) const {
  if (rank < 1 || rank > values_.size())
    throw ValidationError("rank " + std::to_string(rank) + " outside 1.." + std::to_string(values_.size()));
  return values_[rank - 1];
}

double ExposureModel::total(std::size_t k) const {
  double s = 0.0;
  for (std::size_t r = 1; r <= k; ++r) s += at(r);
  return s;
}

double exposure(const ExposureModel& model, std::size_t rank) { return model.at(rank); }

std::size_t GroupTemplate::count(Group g) const {
  return static_cast<std::size_t>(std::count(placement.begin(), placement.end(), g));
}

std::string GroupTemplate::str() const {
  std::string s;
  for (Group g : placement) s += group_letter(g);
  return s;
}

bool template_less(const GroupTemplate& lhs, const GroupTemplate& rhs) {
  return std::lexicographical_compare(lhs.placement.begin(), lhs.placement.end(),
                                      rhs.placement.begin(), rhs.placement.end());
}

GroupTemplate make_template(std::vector<Group> placement, const ExposureModel& model) {
  GroupTemplate t;
  for (std::size_t r = 1; r <= placement.size(); ++r)
    (placement[r - 1] == Group::A ? t.exposure_a : t.exposure_b) += model.at(r);
  t.placement = std::move(placement);
  return t;
}

GroupTemplate parse_template(const std::string& letters, const ExposureModel& model) {
  std::vector<Group> placement;
  for (char c : letters) {
    if (c == 'A' || c == 'a') placement.push_back(Group::A);
    else if (c == 'B' || c == 'b') placement.push_back(Group::B);
    else throw ValidationError(std::string("template letter '") + c + "' is not A or B");
  }
  return make_template(std::move(placement), model);
}

TemplateSet enumerate_templates(std::size_t k, GroupCounts counts, const ExposureModel& model) {
  if (k == 0) throw ValidationError("template length must be positive");
  if (counts.total() < k)
    throw ShortListError("only " + std::to_string(counts.total()) + " candidates for " +
                         std::to_string(k) + " positions");
  if (k > 30) throw ValidationError("template length above 30 is not enumerable");
  TemplateSet out;
  // Bit (k-1-r) set means B at position r, so counting upward walks the
  // placements in lexicographic order with A < B.
  for (std::uint64_t code = 0; code < (std::uint64_t{1} << k); ++code) {
    std::vector<Group> placement(k);
    std::size_t b_used = 0;
    for (std::size_t r = 0; r < k; ++r) {
      bool is_b = (code >> (k - 1 - r)) & 1U;
      placement[r] = is_b ? Group::B : Group::A;
      b_used += is_b;
    }
    if (b_used > counts.b || k - b_used > counts.a) continue;
    out.push_back(make_template(std::move(placement), model));
  }
  return out;
}

UnfairnessLedger::UnfairnessLedger(double beta, double epsilon) : beta_(beta), epsilon_(epsilon) {
  if (!(beta > 0.0)) throw ValidationError("beta must be positive");
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
}

double UnfairnessLedger::unfairness() const { return std::abs(cumulative_); }

double UnfairnessLedger::record(const GroupTemplate& realized) {
  const double c = contribution(realized);
  cumulative_ += c;
  history_.push_back(c);
  if (unfairness() > epsilon_) ++violations_;
  return c;
}

double projected_unfairness(const UnfairnessLedger& ledger, const GroupTemplate& t) {
  return ledger.projected(t);
}

QualifiedTemplates qualified_templates(const UnfairnessLedger& ledger, const TemplateSet& templates) {
  if (templates.empty()) throw ValidationError("no templates to qualify");
  QualifiedTemplates out;
  for (const auto& t : templates)
    if (std::abs(ledger.projected(t)) <= ledger.epsilon()) out.templates.push_back(t);
  if (!out.templates.empty()) return out;

  out.fallback = true;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : templates) best = std::min(best, std::abs(ledger.projected(t)));
  // Placements with equal exposure sums can differ by rounding only.
  const double tie = best + 1e-12 * std::max(1.0, best);
  for (const auto& t : templates)
    if (std::abs(ledger.projected(t)) <= tie) out.templates.push_back(t);
  return out;
}

}  // namespace fairexp
