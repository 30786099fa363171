#include "fairexp/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "fairexp/errors.hpp"
#include "fairexp/random.hpp"

namespace fairexp {

GroupCounts QueryCandidates::counts() const {
  GroupCounts c;
  for (const auto& doc : documents) (doc.group == Group::A ? c.a : c.b)++;
  return c;
}

std::vector<Group> QueryCandidates::groups() const {
  std::vector<Group> out;
  out.reserve(documents.size());
  for (const auto& doc : documents) out.push_back(doc.group);
  return out;
}

std::vector<int> QueryCandidates::grades() const {
  std::vector<int> out;
  out.reserve(documents.size());
  for (const auto& doc : documents) out.push_back(doc.grade);
  return out;
}

std::size_t GroupedDataset::document_count() const {
  std::size_t n = 0;
  for (const auto& q : queries) n += q.size();
  return n;
}

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "?";
}

namespace {

struct SparseDoc {
  int grade;
  std::vector<std::pair<std::size_t, double>> features;
};

bool parse_double(std::string_view s, double& out) {
  // from_chars for double is missing on older libstdc++; strtod needs a terminator.
  std::string tmp(s);
  char* end = nullptr;
  out = std::strtod(tmp.c_str(), &end);
  return !tmp.empty() && end == tmp.c_str() + tmp.size();
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

GroupedDataset parse_svmlight(std::istream& in, Split split) {
  std::vector<std::string> qid_order;
  std::unordered_map<std::string, std::vector<SparseDoc>> by_qid;
  std::size_t dimension = 0;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream tokens(line);
    std::string tok;
    if (!(tokens >> tok)) continue;

    SparseDoc doc;
    if (!parse_int(tok, doc.grade)) throw ParseError(line_no, "malformed grade '" + tok + "'");
    if (doc.grade < 0 || doc.grade > kMaxGrade)
      throw ValidationError("line " + std::to_string(line_no) + ": grade " +
                            std::to_string(doc.grade) + " outside 0.." +
                            std::to_string(kMaxGrade));

    if (!(tokens >> tok) || tok.rfind("qid:", 0) != 0 || tok.size() == 4)
      throw ParseError(line_no, "expected qid:<id>");
    std::string qid = tok.substr(4);

    std::size_t last_fid = 0;
    while (tokens >> tok) {
      auto colon = tok.find(':');
      if (colon == std::string::npos) throw ParseError(line_no, "malformed feature '" + tok + "'");
      std::size_t fid = 0;
      double value = 0.0;
      if (!parse_int(std::string_view(tok).substr(0, colon), fid) || fid == 0)
        throw ParseError(line_no, "bad feature id in '" + tok + "'");
      if (!parse_double(std::string_view(tok).substr(colon + 1), value))
        throw ParseError(line_no, "bad feature value in '" + tok + "'");
      if (fid <= last_fid) throw ParseError(line_no, "feature ids must increase");
      last_fid = fid;
      dimension = std::max(dimension, fid);
      doc.features.emplace_back(fid, value);
    }

    auto [it, inserted] = by_qid.try_emplace(qid);
    if (inserted) qid_order.push_back(qid);
    it->second.push_back(std::move(doc));
  }

  if (qid_order.empty()) throw EmptyDatasetError("no documents in input");

  GroupedDataset ds;
  ds.dimension = dimension;
  ds.split = split;
  ds.queries.reserve(qid_order.size());
  for (const auto& qid : qid_order) {
    QueryCandidates q;
    q.query_id = qid;
    for (const auto& sd : by_qid[qid]) {
      Document doc;
      doc.grade = sd.grade;
      doc.features = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dimension));
      for (auto [fid, v] : sd.features) doc.features(static_cast<Eigen::Index>(fid - 1)) = v;
      q.documents.push_back(std::move(doc));
    }
    ds.queries.push_back(std::move(q));
  }
  return ds;
}

GroupedDataset load_svmlight(const std::string& path, Split split) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return parse_svmlight(in, split);
}

void write_svmlight(const GroupedDataset& dataset, std::ostream& out) {
  char buf[64];
  for (const auto& q : dataset.queries) {
    for (const auto& doc : q.documents) {
      out << doc.grade << " qid:" << q.query_id;
      for (Eigen::Index f = 0; f < doc.features.size(); ++f) {
        std::snprintf(buf, sizeof buf, "%.17g", doc.features(f));
        out << ' ' << (f + 1) << ':' << buf;
      }
      out << '\n';
    }
  }
}

GroupedDataset assign_groups(GroupedDataset dataset, std::size_t feature_id,
                             GroupStrategy strategy) {
  if (dataset.empty()) throw EmptyDatasetError("cannot group an empty dataset");
  if (feature_id == 0 || feature_id > dataset.dimension)
    throw ValidationError("group feature " + std::to_string(feature_id) +
                          " outside 1.." + std::to_string(dataset.dimension));
  const auto col = static_cast<Eigen::Index>(feature_id - 1);

  double cut = strategy.threshold;
  if (strategy.kind == GroupStrategy::Kind::MedianSplit) {
    std::vector<double> values;
    values.reserve(dataset.document_count());
    for (const auto& q : dataset.queries)
      for (const auto& doc : q.documents) values.push_back(doc.features(col));
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    cut = n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    if (!(values.back() > cut))
      throw DegenerateGroupingError("feature " + std::to_string(feature_id) +
                                    " has no values above its median; group A would be empty");
  }

  for (auto& q : dataset.queries)
    for (auto& doc : q.documents) doc.group = doc.features(col) > cut ? Group::A : Group::B;
  dataset.grouping = {GroupingInfo::Kind::FeatureCut, feature_id, cut};
  return dataset;
}

GroupedDataset min_max_scale(GroupedDataset dataset) {
  if (dataset.empty()) return dataset;
  const auto d = static_cast<Eigen::Index>(dataset.dimension);
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(d, std::numeric_limits<double>::infinity());
  Eigen::VectorXd hi = -lo;
  for (const auto& q : dataset.queries)
    for (const auto& doc : q.documents) {
      lo = lo.cwiseMin(doc.features);
      hi = hi.cwiseMax(doc.features);
    }
  const Eigen::VectorXd range = hi - lo;
  for (auto& q : dataset.queries)
    for (auto& doc : q.documents)
      for (Eigen::Index f = 0; f < d; ++f)
        doc.features(f) = range(f) > 0 ? (doc.features(f) - lo(f)) / range(f) : 0.0;
  return dataset;
}

namespace {

Eigen::VectorXd unit_ball_point(Rng& rng, std::size_t d) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(d));
  for (auto& x : v) x = rng.normal();
  const double r = std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
  return v * (r / v.norm());
}

}  // namespace

GroupedDataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.dimension < 2) throw ValidationError("synthetic dimension must be >= 2");
  if (spec.docs_per_query < 2) throw ValidationError("docs_per_query must be >= 2");
  if (spec.n_queries < 1) throw ValidationError("n_queries must be >= 1");
  if (!(spec.group_balance > 0.0 && spec.group_balance < 1.0))
    throw ValidationError("group_balance must lie in (0, 1)");
  if (!(spec.grade_noise >= 0.0 && spec.grade_noise <= 1.0))
    throw ValidationError("grade_noise must lie in [0, 1]");
  if (!(spec.theta_norm > 0.0)) throw ValidationError("theta_norm must be positive");

  // theta* depends on the seed alone so every split shares the same model.
  Rng theta_rng(mix_seed(spec.seed, 1));
  Eigen::VectorXd theta(static_cast<Eigen::Index>(spec.dimension));
  for (auto& x : theta) x = theta_rng.normal();
  theta *= spec.theta_norm / theta.norm();

  Rng rng(mix_seed(spec.seed, 10 + static_cast<std::uint64_t>(spec.split)));
  GroupedDataset ds;
  ds.dimension = spec.dimension;
  ds.split = spec.split;
  ds.true_theta = theta;
  ds.theta_norm_bound = spec.theta_norm;
  ds.grouping.kind = GroupingInfo::Kind::Synthetic;

  const std::size_t n = spec.docs_per_query;
  for (std::size_t qi = 0; qi < spec.n_queries; ++qi) {
    QueryCandidates q;
    q.query_id = std::string(split_name(spec.split)) + "-" + std::to_string(qi + 1);
    std::vector<double> scores;
    for (std::size_t i = 0; i < n; ++i) {
      Document doc;
      doc.features = unit_ball_point(rng, spec.dimension);
      doc.group = rng.uniform() < spec.group_balance ? Group::A : Group::B;
      scores.push_back(theta.dot(doc.features));
      q.documents.push_back(std::move(doc));
    }
    // Quintile bins within the query; the top-scored document always lands in bin 4.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t from_top = n - 1 - r;
      q.documents[order[r]].grade = kMaxGrade - static_cast<int>(5 * from_top / n);
    }
    for (auto& doc : q.documents) {
      if (rng.uniform() < spec.grade_noise) doc.grade = static_cast<int>(rng.below(kMaxGrade + 1));
    }
    ds.queries.push_back(std::move(q));
  }
  return ds;
}

}  // namespace fairexp
