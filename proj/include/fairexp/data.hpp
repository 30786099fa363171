#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fairexp {

enum class Group : std::uint8_t { A = 0, B = 1 };

inline char group_letter(Group g) { return g == Group::A ? 'A' : 'B'; }

enum class Split : std::uint8_t { Train, Validation, Test };

constexpr int kMaxGrade = 4;

struct Document {
  Eigen::VectorXd features;
  int grade = 0;
  Group group = Group::B;
};

struct GroupCounts {
  std::size_t a = 0;
  std::size_t b = 0;

  std::size_t of(Group g) const { return g == Group::A ? a : b; }
  std::size_t total() const { return a + b; }
  bool operator==(const GroupCounts&) const = default;
};

// Candidate documents retrieved for one query. Storage order is file order,
// not a ranking.
struct QueryCandidates {
  std::string query_id;
  std::vector<Document> documents;

  std::size_t size() const { return documents.size(); }
  GroupCounts counts() const;
  std::vector<Group> groups() const;
  std::vector<int> grades() const;
};

// How group labels were produced; kept so a feature split can be replayed.
struct GroupingInfo {
  enum class Kind : std::uint8_t { None, FeatureCut, Synthetic };
  Kind kind = Kind::None;
  std::size_t feature_id = 0;  // 1-based, as in the LETOR file
  double cut = 0.0;
};

struct GroupedDataset {
  std::vector<QueryCandidates> queries;
  std::size_t dimension = 0;
  Split split = Split::Train;
  GroupingInfo grouping;
  // Present only for synthetic data.
  std::optional<Eigen::VectorXd> true_theta;
  double theta_norm_bound = 0.0;

  bool empty() const { return queries.empty(); }
  std::size_t document_count() const;
};

// Reads LETOR / SVMLight lines `<grade> qid:<id> <fid>:<val> ... [# comment]`.
// Feature ids are 1-based and may be sparse; absent features are 0.0.
// Queries are grouped by qid in order of first appearance.
GroupedDataset parse_svmlight(std::istream& in, Split split = Split::Train);
GroupedDataset load_svmlight(const std::string& path, Split split = Split::Train);

// Writes every feature densely with round-trip precision.
void write_svmlight(const GroupedDataset& dataset, std::ostream& out);

struct GroupStrategy {
  enum class Kind : std::uint8_t { MedianSplit, Threshold };
  Kind kind = Kind::MedianSplit;
  double threshold = 0.0;

  static GroupStrategy median_split() { return {}; }
  static GroupStrategy at(double v) { return {Kind::Threshold, v}; }
};

// Group A iff the feature value is strictly above the cut; ties go to B.
// The cut is recorded in dataset.grouping.
GroupedDataset assign_groups(GroupedDataset dataset, std::size_t feature_id,
                             GroupStrategy strategy);

// Per-feature min-max scaling to [0, 1]; constant features become 0.
GroupedDataset min_max_scale(GroupedDataset dataset);

struct SyntheticSpec {
  std::size_t n_queries = 100;
  std::size_t docs_per_query = 20;
  std::size_t dimension = 10;
  double group_balance = 0.5;  // probability of group A
  double grade_noise = 0.0;
  double theta_norm = 1.0;     // Q
  std::uint64_t seed = 0;
  Split split = Split::Train;
};

// Features uniform in the unit ball, one ground-truth theta per seed (shared
// across splits), grades from per-query quintiles of theta*^T x with optional
// uniform relabelling, groups i.i.d.
GroupedDataset generate_synthetic(const SyntheticSpec& spec);

const char* split_name(Split s);

}  // namespace fairexp
