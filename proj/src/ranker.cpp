#include "fairexp/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "fairexp/errors.hpp"

namespace fairexp {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// log(1 + e^u) without overflow
double softplus(double u) { return u > 0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u)); }

void check_dim(std::size_t expected, Eigen::Index got) {
  if (static_cast<Eigen::Index>(expected) != got)
    throw DimensionError(expected, static_cast<std::size_t>(got));
}

constexpr const char* kCheckpointMagic = "fairexp-checkpoint";
constexpr int kCheckpointVersion = 1;

}  // namespace

RankerState::RankerState(std::size_t dimension, double lambda, double theta_norm_bound)
    : lambda_(lambda),
      theta_norm_bound_(theta_norm_bound),
      theta_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dimension))),
      info_(lambda * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dimension),
                                               static_cast<Eigen::Index>(dimension))) {
  if (dimension == 0) throw ValidationError("ranker dimension must be positive");
  if (!(lambda > 0.0)) throw ValidationError("lambda must be positive");
  refresh_factorisation();
}

void RankerState::refresh_factorisation() {
  info_llt_.compute(info_);
  if (info_llt_.info() != Eigen::Success) throw NumericError("information matrix lost positive definiteness");
}

PairSample RankerState::pair(std::size_t i) const {
  const auto d = static_cast<Eigen::Index>(dimension());
  PairSample p;
  p.diff = Eigen::Map<const Eigen::VectorXd>(rows_.data() + i * dimension(), d);
  p.label = labels_[i];
  return p;
}

double RankerState::score(const Eigen::VectorXd& x) const {
  check_dim(dimension(), x.size());
  return theta_.dot(x);
}

double RankerState::pairwise_prob(const Eigen::VectorXd& xi, const Eigen::VectorXd& xj) const {
  check_dim(dimension(), xi.size());
  check_dim(dimension(), xj.size());
  return sigmoid((xi - xj).dot(theta_));
}

double RankerState::inverse_norm_sq(const Eigen::VectorXd& v) const {
  check_dim(dimension(), v.size());
  return info_llt_.matrixL().solve(v).squaredNorm();
}

double RankerState::confidence_width(const Eigen::VectorXd& xi, const Eigen::VectorXd& xj,
                                     double alpha) const {
  check_dim(dimension(), xi.size());
  check_dim(dimension(), xj.size());
  return alpha * std::sqrt(inverse_norm_sq(xi - xj));
}

double RankerState::loss(const Eigen::VectorXd& theta) const {
  check_dim(dimension(), theta.size());
  const auto n = static_cast<Eigen::Index>(labels_.size());
  const auto d = static_cast<Eigen::Index>(dimension());
  double total = 0.5 * lambda_ * theta.squaredNorm();
  if (n == 0) return total;
  Eigen::Map<const RowMatrix> x(rows_.data(), n, d);
  const Eigen::VectorXd z = x * theta;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double y = labels_[static_cast<std::size_t>(i)];
    total += y * softplus(-z(i)) + (1.0 - y) * softplus(z(i));
  }
  return total;
}

Eigen::VectorXd RankerState::gradient(const Eigen::VectorXd& theta) const {
  check_dim(dimension(), theta.size());
  const auto n = static_cast<Eigen::Index>(labels_.size());
  const auto d = static_cast<Eigen::Index>(dimension());
  Eigen::VectorXd g = lambda_ * theta;
  if (n == 0) return g;
  Eigen::Map<const RowMatrix> x(rows_.data(), n, d);
  Eigen::Map<const Eigen::VectorXd> y(labels_.data(), n);
  const Eigen::VectorXd residual = (x * theta).unaryExpr(&sigmoid) - y;
  g.noalias() += x.transpose() * residual;
  return g;
}

UpdateReport RankerState::update(std::span<const PairSample> new_pairs) {
  const std::size_t d = dimension();
  for (const auto& p : new_pairs) {
    check_dim(d, p.diff.size());
    if (!p.diff.allFinite() || !(p.label >= 0.0 && p.label <= 1.0))
      throw NumericError("pair with non-finite features or label outside [0, 1]");
  }
  for (const auto& p : new_pairs) {
    rows_.insert(rows_.end(), p.diff.data(), p.diff.data() + p.diff.size());
    labels_.push_back(p.label);
    info_.selfadjointView<Eigen::Lower>().rankUpdate(p.diff);
  }
  info_.triangularView<Eigen::StrictlyUpper>() = info_.transpose();
  refresh_factorisation();

  const auto n = static_cast<Eigen::Index>(labels_.size());
  const auto di = static_cast<Eigen::Index>(d);
  Eigen::Map<const RowMatrix> x(rows_.data(), n, di);
  Eigen::Map<const Eigen::VectorXd> y(labels_.data(), n);

  UpdateReport report;
  Eigen::VectorXd theta = theta_;
  double f = loss(theta);
  report.loss_at_warm_start = f;

  for (int iter = 0;; ++iter) {
    Eigen::VectorXd z = x * theta;
    Eigen::VectorXd p = z.unaryExpr(&sigmoid);
    Eigen::VectorXd g = lambda_ * theta;
    g.noalias() += x.transpose() * (p - y);
    report.gradient_norm = g.norm();
    report.iterations = iter;
    if (!std::isfinite(f) || !g.allFinite()) {
      std::ostringstream msg;
      msg << "non-finite loss or gradient at round " << round_ << " (loss=" << f
          << ", |theta|=" << theta.norm() << ", pairs=" << n << ")";
      throw NumericError(msg.str());
    }
    if (report.gradient_norm <= kGradientTolerance || iter >= kMaxIterations) break;

    Eigen::MatrixXd hessian = lambda_ * Eigen::MatrixXd::Identity(di, di);
    if (n > 0) {
      const Eigen::ArrayXd w = (p.array() * (1.0 - p.array())).sqrt();
      const RowMatrix xw = x.array().colwise() * w;
      hessian.selfadjointView<Eigen::Lower>().rankUpdate(xw.transpose());
      hessian.triangularView<Eigen::StrictlyUpper>() = hessian.transpose();
    }
    const Eigen::VectorXd step = -hessian.llt().solve(g);
    const double slope = g.dot(step);
    if (-0.5 * slope <= kDecrementTolerance * (1.0 + std::abs(f))) {
      // Loss differences are lost in rounding here, so the full step is judged
      // by the gradient instead of by a line search.
      Eigen::VectorXd next = theta + step;
      if (gradient(next).norm() >= report.gradient_norm) break;
      theta = std::move(next);
      f = loss(theta);
      continue;
    }

    // Backtracking keeps the loss non-increasing.
    double t = 1.0;
    Eigen::VectorXd candidate;
    double f_new = f;
    bool moved = false;
    while (t > 1e-12) {
      candidate = theta + t * step;
      f_new = loss(candidate);
      if (f_new <= f + 1e-4 * t * slope) {
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;  // at the floating-point floor of the loss
    theta = std::move(candidate);
    f = f_new;
  }

  theta_ = std::move(theta);
  report.loss = f;
  ++round_;
  return report;
}

void RankerState::set_theta(const Eigen::VectorXd& theta) {
  check_dim(dimension(), theta.size());
  theta_ = theta;
}

double RankerState::closed_form_alpha(double k_mu, double c_mu, double noise_r,
                                      double delta1) const {
  const auto d = static_cast<double>(dimension());
  const Eigen::VectorXd diag = info_llt_.matrixL().toDenseMatrix().diagonal();
  const double log_det_m = 2.0 * diag.array().log().sum();
  const double log_det_lambda = d * std::log(lambda_);
  const double log_ratio = log_det_m - 2.0 * std::log(delta1) - log_det_lambda;
  return (2.0 * k_mu / c_mu) *
         (std::sqrt(noise_r * noise_r * std::max(0.0, log_ratio)) +
          std::sqrt(lambda_) * theta_norm_bound_);
}

void RankerState::save(std::ostream& out) const {
  const std::size_t d = dimension();
  char buf[48];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%a", v);
    out << buf;
  };
  out << kCheckpointMagic << " v" << kCheckpointVersion << '\n';
  out << "dimension " << d << '\n';
  out << "lambda ";
  put(lambda_);
  out << "\nnorm_bound ";
  put(theta_norm_bound_);
  out << "\nround " << round_ << '\n';
  out << "theta";
  for (double v : theta_) out << ' ', put(v);
  out << '\n';
  for (std::size_t r = 0; r < d; ++r) {
    out << "info";
    for (std::size_t c = 0; c < d; ++c)
      out << ' ', put(info_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
    out << '\n';
  }
  out << "pairs " << labels_.size() << '\n';
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    put(labels_[i]);
    for (std::size_t c = 0; c < d; ++c) out << ' ', put(rows_[i * d + c]);
    out << '\n';
  }
}

RankerState RankerState::load(std::istream& in) {
  std::string word, version;
  std::size_t line = 1;
  auto expect = [&](const char* key) {
    if (!(in >> word) || word != key) throw ParseError(line, std::string("checkpoint: expected '") + key + "'");
    ++line;
  };
  auto read_double = [&]() {
    std::string tok;
    if (!(in >> tok)) throw ParseError(line, "checkpoint: truncated");
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw ParseError(line, "checkpoint: bad number '" + tok + "'");
    return v;
  };

  if (!(in >> word >> version) || word != kCheckpointMagic)
    throw ParseError(1, "not a fairexp checkpoint");
  if (version != "v" + std::to_string(kCheckpointVersion))
    throw ParseError(1, "unsupported checkpoint version " + version);
  ++line;
  std::size_t d = 0;
  expect("dimension");
  if (!(in >> d) || d == 0) throw ParseError(line, "checkpoint: bad dimension");
  expect("lambda");
  const double lambda = read_double();
  expect("norm_bound");
  const double bound = read_double();
  expect("round");
  std::uint64_t round = 0;
  if (!(in >> round)) throw ParseError(line, "checkpoint: bad round");

  RankerState state(d, lambda, bound);
  state.round_ = round;
  expect("theta");
  for (std::size_t c = 0; c < d; ++c) state.theta_(static_cast<Eigen::Index>(c)) = read_double();
  for (std::size_t r = 0; r < d; ++r) {
    expect("info");
    for (std::size_t c = 0; c < d; ++c)
      state.info_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = read_double();
  }
  expect("pairs");
  std::size_t n = 0;
  if (!(in >> n)) throw ParseError(line, "checkpoint: bad pair count");
  state.labels_.reserve(n);
  state.rows_.reserve(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    state.labels_.push_back(read_double());
    for (std::size_t c = 0; c < d; ++c) state.rows_.push_back(read_double());
  }
  state.refresh_factorisation();
  return state;
}

void PairOrderSets::set_certain(std::size_t winner, std::size_t loser) {
  beats_[loser * n_ + winner] = 0;
  beats_[winner * n_ + loser] = 1;
}

std::vector<std::pair<std::size_t, std::size_t>> PairOrderSets::certain_pairs() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j)
      if (beats(i, j)) out.emplace_back(i, j);
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> PairOrderSets::uncertain_pairs() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = i + 1; j < n_; ++j)
      if (uncertain(i, j)) out.emplace_back(i, j);
  return out;
}

std::size_t BlockPartition::document_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.size();
  return n;
}

std::vector<std::size_t> BlockPartition::block_of() const {
  std::vector<std::size_t> out(document_count());
  for (std::size_t b = 0; b < blocks.size(); ++b)
    for (std::size_t doc : blocks[b]) out.at(doc) = b;
  return out;
}

PairOrderSets classify_pairs(const RankerState& state, const QueryCandidates& candidates,
                             double alpha) {
  const std::size_t n = candidates.size();
  PairOrderSets sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& xi = candidates.documents[i].features;
      const auto& xj = candidates.documents[j].features;
      const double p = state.pairwise_prob(xi, xj);
      const double w = state.confidence_width(xi, xj, alpha);
      if (p - w > 0.5) {
        sets.set_certain(i, j);
      } else if (p + w < 0.5) {
        sets.set_certain(j, i);
      }
    }
  }
  return sets;
}

namespace {

// Connected components of the uncertain-pair graph and the certain-order
// graph between them, with one witness pair per edge.
struct ComponentGraph {
  std::vector<std::vector<std::size_t>> comps;
  std::vector<std::vector<std::uint8_t>> edge;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> witness;
};

ComponentGraph component_graph(const PairOrderSets& order_sets) {
  const std::size_t n = order_sets.size();

  // Union-find over uncertain edges.
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (auto [i, j] : order_sets.uncertain_pairs()) {
    auto ri = find(i), rj = find(j);
    if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
  }

  ComponentGraph g;
  std::vector<std::size_t> comp_of(n);
  std::vector<std::size_t> root_to_comp(n, n);
  for (std::size_t v = 0; v < n; ++v) {
    auto r = find(v);
    if (root_to_comp[r] == n) {
      root_to_comp[r] = g.comps.size();
      g.comps.emplace_back();
    }
    comp_of[v] = root_to_comp[r];
    g.comps[comp_of[v]].push_back(v);
  }

  // Edge a -> b when some document of a beats one of b.
  const std::size_t c = g.comps.size();
  g.edge.assign(c, std::vector<std::uint8_t>(c, 0));
  g.witness.assign(c, std::vector<std::pair<std::size_t, std::size_t>>(c));
  for (auto [w, l] : order_sets.certain_pairs()) {
    auto a = comp_of[w], b = comp_of[l];
    if (a != b && !g.edge[a][b]) {
      g.edge[a][b] = 1;
      g.witness[a][b] = {w, l};
    }
  }
  return g;
}

}  // namespace

BlockPartition partition_blocks(const PairOrderSets& order_sets) {
  const ComponentGraph g = component_graph(order_sets);
  const auto& comps = g.comps;
  const auto& edge = g.edge;
  const auto& witness = g.witness;
  const std::size_t c = comps.size();

  std::vector<std::size_t> indegree(c, 0);
  for (std::size_t a = 0; a < c; ++a)
    for (std::size_t b = 0; b < c; ++b) indegree[b] += edge[a][b];

  BlockPartition out;
  std::vector<std::uint8_t> placed(c, 0);
  for (std::size_t step = 0; step < c; ++step) {
    std::size_t next = c;
    for (std::size_t a = 0; a < c && next == c; ++a)
      if (!placed[a] && indegree[a] == 0) next = a;
    if (next == c) {
      // Walk predecessors among the unplaced components until one repeats.
      std::size_t cur = 0;
      while (placed[cur]) ++cur;
      std::vector<std::size_t> seen(c, c), path;
      while (seen[cur] == c) {
        seen[cur] = path.size();
        path.push_back(cur);
        std::size_t pred = 0;
        while (placed[pred] || !edge[pred][cur]) ++pred;
        cur = pred;
      }
      std::vector<std::size_t> loop(path.begin() + static_cast<std::ptrdiff_t>(seen[cur]), path.end());
      std::reverse(loop.begin(), loop.end());
      std::vector<std::size_t> docs;
      std::ostringstream msg;
      msg << "certain orders form a cycle:";
      for (std::size_t k = 0; k < loop.size(); ++k) {
        auto [w, l] = witness[loop[k]][loop[(k + 1) % loop.size()]];
        docs.push_back(w);
        msg << ' ' << w << '>' << l;
      }
      docs.push_back(docs.front());
      throw PartitionInfeasibleError(msg.str(), std::move(docs));
    }
    placed[next] = 1;
    for (std::size_t b = 0; b < c; ++b)
      if (edge[next][b]) --indegree[b];
    out.blocks.push_back(comps[next]);
  }

  validate_partition(out, order_sets);
  return out;
}

CondensedPartition partition_blocks_condensed(const PairOrderSets& order_sets) {
  try {
    return {partition_blocks(order_sets), 0};
  } catch (const PartitionInfeasibleError&) {
  }
  const ComponentGraph g = component_graph(order_sets);
  const std::size_t c = g.comps.size();

  // Kosaraju: finish order on the graph, then sweep the transpose.
  std::vector<std::size_t> finish;
  std::vector<std::uint8_t> seen(c, 0);
  for (std::size_t root = 0; root < c; ++root) {
    if (seen[root]) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    seen[root] = 1;
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      while (next < c && (!g.edge[v][next] || seen[next])) ++next;
      if (next == c) {
        finish.push_back(v);
        stack.pop_back();
      } else {
        const std::size_t child = next;
        seen[child] = 1;
        stack.emplace_back(child, 0);
      }
    }
  }
  std::vector<std::size_t> scc(c, c);
  std::size_t n_scc = 0;
  for (auto it = finish.rbegin(); it != finish.rend(); ++it) {
    if (scc[*it] != c) continue;
    std::vector<std::size_t> stack{*it};
    scc[*it] = n_scc;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      for (std::size_t u = 0; u < c; ++u)
        if (g.edge[u][v] && scc[u] == c) {
          scc[u] = n_scc;
          stack.push_back(u);
        }
    }
    ++n_scc;
  }

  std::vector<std::vector<std::size_t>> members(n_scc);
  std::vector<std::size_t> comp_count(n_scc, 0);
  for (std::size_t a = 0; a < c; ++a) {
    members[scc[a]].insert(members[scc[a]].end(), g.comps[a].begin(), g.comps[a].end());
    ++comp_count[scc[a]];
  }
  std::vector<std::vector<std::uint8_t>> edge(n_scc, std::vector<std::uint8_t>(n_scc, 0));
  std::vector<std::size_t> indegree(n_scc, 0);
  for (std::size_t a = 0; a < c; ++a)
    for (std::size_t b = 0; b < c; ++b)
      if (g.edge[a][b] && scc[a] != scc[b] && !edge[scc[a]][scc[b]]) {
        edge[scc[a]][scc[b]] = 1;
        ++indegree[scc[b]];
      }

  CondensedPartition out;
  for (std::size_t s = 0; s < n_scc; ++s) {
    std::sort(members[s].begin(), members[s].end());
    if (comp_count[s] > 1) out.merged_components += comp_count[s];
  }
  // Ready blocks in order of their smallest document.
  std::vector<std::uint8_t> placed(n_scc, 0);
  for (std::size_t step = 0; step < n_scc; ++step) {
    std::size_t next = n_scc;
    for (std::size_t s = 0; s < n_scc; ++s)
      if (!placed[s] && indegree[s] == 0 && (next == n_scc || members[s][0] < members[next][0])) next = s;
    placed[next] = 1;
    for (std::size_t b = 0; b < n_scc; ++b)
      if (edge[next][b]) --indegree[b];
    out.partition.blocks.push_back(members[next]);
  }
  validate_partition(out.partition, order_sets);
  return out;
}

void validate_partition(const BlockPartition& partition, const PairOrderSets& order_sets) {
  const std::size_t n = order_sets.size();
  std::vector<std::size_t> block(n, n);
  for (std::size_t b = 0; b < partition.blocks.size(); ++b) {
    if (partition.blocks[b].empty()) throw ValidationError("partition has an empty block");
    for (std::size_t doc : partition.blocks[b]) {
      if (doc >= n) throw ValidationError("partition references unknown document " + std::to_string(doc));
      if (block[doc] != n) throw ValidationError("document " + std::to_string(doc) + " appears twice");
      block[doc] = b;
    }
  }
  for (std::size_t v = 0; v < n; ++v)
    if (block[v] == n) throw ValidationError("document " + std::to_string(v) + " missing from partition");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (block[i] < block[j] && !order_sets.beats(i, j))
        throw PartitionInfeasibleError("cross-block pair " + std::to_string(i) + "," +
                                           std::to_string(j) + " is not certain forward",
                                       {i, j});
}

std::vector<PairSample> infer_pairs(const QueryCandidates& candidates,
                                    std::span<const std::size_t> displayed,
                                    const std::vector<bool>& clicks) {
  if (clicks.size() != displayed.size())
    throw ValidationError("clicks must align with displayed positions");
  std::size_t examined = 0;  // one past the last click
  for (std::size_t pos = 0; pos < clicks.size(); ++pos)
    if (clicks[pos]) examined = pos + 1;

  std::vector<PairSample> pairs;
  for (std::size_t m = 0; m < examined; ++m) {
    if (!clicks[m]) continue;
    for (std::size_t u = 0; u < examined; ++u) {
      if (clicks[u]) continue;
      pairs.push_back({candidates.documents[displayed[m]].features -
                           candidates.documents[displayed[u]].features,
                       1.0});
    }
  }
  return pairs;
}

}  // namespace fairexp
