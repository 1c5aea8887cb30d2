#include "tvpbart/tree.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace tvpbart {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using Cells = std::vector<std::vector<int>>;

// Rows of Z that pass through every node.
Cells node_cells(const Tree& tree, const MatrixXd& Z) {
  Cells cells(static_cast<std::size_t>(tree.size()));
  for (Eigen::Index r = 0; r < Z.rows(); ++r) {
    int i = 0;
    for (;;) {
      cells[static_cast<std::size_t>(i)].push_back(static_cast<int>(r));
      const TreeNode& n = tree.node(i);
      if (n.is_leaf()) break;
      i = (Z(r, n.var) <= n.threshold) ? n.left : n.right;
    }
  }
  return cells;
}

// Ranks of the admissible thresholds for `var` within a cell: every distinct
// value except the largest, so both children are nonempty.
std::vector<int> cell_candidates(const std::vector<int>& rows, int var, const CutTable& cuts) {
  std::vector<int> ranks;
  ranks.reserve(rows.size());
  for (int r : rows) ranks.push_back(cuts.rank(r, var));
  std::sort(ranks.begin(), ranks.end());
  ranks.erase(std::unique(ranks.begin(), ranks.end()), ranks.end());
  if (!ranks.empty()) ranks.pop_back();
  return ranks;
}

int threshold_rank(const CutTable& cuts, int var, double threshold) {
  const auto& v = cuts.values(var);
  auto it = std::lower_bound(v.begin(), v.end(), threshold);
  if (it == v.end() || *it != threshold) return -1;
  return static_cast<int>(it - v.begin());
}

double structure_log_prior(const Tree& tree, const Cells& cells, const CutTable& cuts, const TreePrior& prior) {
  const double log_n_vars = std::log(static_cast<double>(cuts.n_vars()));
  double lp = 0.0;
  for (int i = 0; i < tree.size(); ++i) {
    const TreeNode& n = tree.node(i);
    const auto& rows = cells[static_cast<std::size_t>(i)];
    const double p = node_split_prob(n.depth, prior.nu, prior.alpha, prior.zeta);
    if (n.is_leaf()) {
      if (static_cast<int>(rows.size()) < prior.min_leaf_size) return kNegInf;
      lp += std::log1p(-p);
      continue;
    }
    const auto cand = cell_candidates(rows, n.var, cuts);
    const int r = threshold_rank(cuts, n.var, n.threshold);
    if (r < 0 || !std::binary_search(cand.begin(), cand.end(), r)) return kNegInf;
    if (p <= 0.0) return kNegInf;
    lp += std::log(p) - log_n_vars - std::log(static_cast<double>(cand.size()));
  }
  return lp;
}

double structure_log_ml(const Tree& tree, const Cells& cells, const WeightedTarget& target, double prior_var) {
  double ll = 0.0;
  for (int i = 0; i < tree.size(); ++i) {
    if (!tree.node(i).is_leaf()) continue;
    double prec = 0.0, wsum = 0.0;
    for (int r : cells[static_cast<std::size_t>(i)]) {
      if (!target.is_active(r)) continue;
      const double w = target.variance(r);
      prec += 1.0 / w;
      wsum += target.response(r) / w;
    }
    ll += leaf_marginal_loglik(prec, wsum, prior_var);
  }
  return ll;
}

TreeMove draw_move(Rng& rng) {
  double u = rng.uniform();
  for (std::size_t i = 0; i < kMoveProbs.size(); ++i) {
    if (u < kMoveProbs[i]) return static_cast<TreeMove>(i);
    u -= kMoveProbs[i];
  }
  return TreeMove::Swap;
}

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(v.size())))];
}

}  // namespace

double node_split_prob(int depth, int nu, double alpha, double zeta) {
  return std::pow(alpha, nu) * std::pow(1.0 + depth, -std::pow(zeta, nu));
}

CutTable::CutTable(const MatrixXd& Z) : Z_(Z), values_(static_cast<std::size_t>(Z.cols())), rank_(Z.rows(), Z.cols()) {
  for (Eigen::Index j = 0; j < Z.cols(); ++j) {
    auto& v = values_[static_cast<std::size_t>(j)];
    v.assign(Z.col(j).data(), Z.col(j).data() + Z.rows());
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    for (Eigen::Index r = 0; r < Z.rows(); ++r)
      rank_(r, j) = static_cast<int>(std::lower_bound(v.begin(), v.end(), Z(r, j)) - v.begin());
  }
}

std::vector<int> Tree::leaves() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (nodes_[static_cast<std::size_t>(i)].is_leaf()) out.push_back(i);
  return out;
}

std::vector<int> Tree::internal_nodes() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (!nodes_[static_cast<std::size_t>(i)].is_leaf()) out.push_back(i);
  return out;
}

std::vector<int> Tree::prunable_nodes() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    const TreeNode& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.is_leaf() && node(n.left).is_leaf() && node(n.right).is_leaf()) out.push_back(i);
  }
  return out;
}

std::vector<std::pair<int, int>> Tree::swappable_pairs() const {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < size(); ++i) {
    const TreeNode& n = nodes_[static_cast<std::size_t>(i)];
    if (n.is_leaf()) continue;
    if (!node(n.left).is_leaf()) out.emplace_back(i, n.left);
    if (!node(n.right).is_leaf()) out.emplace_back(i, n.right);
  }
  return out;
}

int Tree::n_leaves() const {
  return static_cast<int>(std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

int Tree::max_depth() const {
  int d = 0;
  for (const TreeNode& n : nodes_) d = std::max(d, n.depth);
  return d;
}

void Tree::split(int leaf, int var, double threshold, double mu_left, double mu_right) {
  const int left = size();
  const int right = left + 1;
  const int depth = nodes_[static_cast<std::size_t>(leaf)].depth + 1;
  nodes_.push_back(TreeNode{leaf, -1, -1, -1, 0.0, mu_left, depth});
  nodes_.push_back(TreeNode{leaf, -1, -1, -1, 0.0, mu_right, depth});
  TreeNode& n = nodes_[static_cast<std::size_t>(leaf)];
  n.left = left;
  n.right = right;
  n.var = var;
  n.threshold = threshold;
}

void Tree::collapse(int node_id, double mu) {
  TreeNode& n = nodes_[static_cast<std::size_t>(node_id)];
  if (n.is_leaf() || !node(n.left).is_leaf() || !node(n.right).is_leaf())
    throw Error("collapse requires a node with two leaf children");
  n.left = n.right = n.var = -1;
  n.threshold = 0.0;
  n.mu = mu;

  // Re-pack reachable nodes breadth first so left children precede right ones.
  std::vector<TreeNode> packed;
  packed.reserve(nodes_.size());
  std::vector<int> old_of_new;
  std::deque<std::pair<int, int>> queue{{0, -1}};
  while (!queue.empty()) {
    auto [old_id, new_parent] = queue.front();
    queue.pop_front();
    const int new_id = static_cast<int>(packed.size());
    TreeNode copy = nodes_[static_cast<std::size_t>(old_id)];
    copy.parent = new_parent;
    if (new_parent >= 0) {
      TreeNode& p = packed[static_cast<std::size_t>(new_parent)];
      // children are enqueued left then right
      if (p.left == -2) p.left = new_id; else p.right = new_id;
    }
    const int l = copy.left, r = copy.right;
    if (!copy.is_leaf()) copy.left = copy.right = -2;
    packed.push_back(copy);
    if (l >= 0) {
      queue.emplace_back(l, new_id);
      queue.emplace_back(r, new_id);
    }
  }
  for (auto& p : packed) {
    if (p.left == -2) p.left = p.right = -1;  // unreachable in a well-formed tree
    if (p.right == -2) p.right = -1;
  }
  nodes_ = std::move(packed);
}

void Tree::set_rule(int node_id, int var, double threshold) {
  TreeNode& n = nodes_[static_cast<std::size_t>(node_id)];
  n.var = var;
  n.threshold = threshold;
}

std::string Tree::structure_key() const {
  std::ostringstream os;
  os.precision(17);
  auto rec = [&](auto&& self, int i) -> void {
    const TreeNode& n = node(i);
    if (n.is_leaf()) {
      os << '*';
      return;
    }
    os << '(' << n.var << ':' << n.threshold << ' ';
    self(self, n.left);
    os << ' ';
    self(self, n.right);
    os << ')';
  };
  rec(rec, 0);
  return os.str();
}

Ensemble Ensemble::make(int n_trees, const TreePrior& prior, double kappa) {
  Ensemble e;
  e.trees.assign(static_cast<std::size_t>(n_trees), Tree{});
  e.prior = prior;
  e.leaf_prior_var = 1.0 / (2.0 * kappa * n_trees);
  return e;
}

VectorXd fit(const Tree& tree, const MatrixXd& Z) {
  VectorXd out(Z.rows());
  for (Eigen::Index r = 0; r < Z.rows(); ++r) out(r) = evaluate(tree, Z.row(r));
  return out;
}

VectorXd fit(const Ensemble& ensemble, const MatrixXd& Z) {
  VectorXd out = VectorXd::Zero(Z.rows());
  for (const Tree& t : ensemble.trees) out += fit(t, Z);
  return out;
}

std::vector<LeafSuffStats> leaf_suff_stats(const Tree& tree, const WeightedTarget& target, const MatrixXd& Z) {
  if (target.size() != Z.rows()) throw DimensionError("target length must equal the number of rows of Z");
  std::vector<int> slot(static_cast<std::size_t>(tree.size()), -1);
  std::vector<LeafSuffStats> stats;
  for (int leaf : tree.leaves()) {
    slot[static_cast<std::size_t>(leaf)] = static_cast<int>(stats.size());
    stats.push_back(LeafSuffStats{leaf, 0.0, 0.0, 0});
  }
  for (Eigen::Index r = 0; r < Z.rows(); ++r) {
    LeafSuffStats& s = stats[static_cast<std::size_t>(slot[static_cast<std::size_t>(tree.find_leaf(Z.row(r)))])];
    ++s.n_rows;
    if (!target.is_active(r)) continue;
    s.precision += 1.0 / target.variance(r);
    s.weighted_sum += target.response(r) / target.variance(r);
  }
  for (const auto& s : stats)
    if (s.n_rows == 0) throw Error("tree has an empty leaf (node " + std::to_string(s.node) + ")");
  return stats;
}

double leaf_marginal_loglik(double precision, double weighted_sum, double prior_var) {
  const double prior_prec = 1.0 / prior_var;
  const double post_prec = prior_prec + precision;
  return 0.5 * std::log(prior_prec / post_prec) + 0.5 * weighted_sum * weighted_sum / post_prec;
}

double tree_log_prior(const Tree& tree, const CutTable& cuts, const TreePrior& prior) {
  return structure_log_prior(tree, node_cells(tree, cuts.Z()), cuts, prior);
}

MoveOutcome propose_and_accept(Tree& tree, const WeightedTarget& target, const CutTable& cuts, const TreePrior& prior,
                               double leaf_prior_var, Rng& rng, std::optional<TreeMove> force) {
  MoveOutcome out;
  out.move = force ? *force : draw_move(rng);
  const int n_vars = cuts.n_vars();
  const double log_n_vars = std::log(static_cast<double>(n_vars));
  const Cells cells = node_cells(tree, cuts.Z());
  Tree proposal = tree;
  // log q(proposal -> tree) - log q(tree -> proposal); the move-type
  // probabilities are fixed and cancel.
  double log_q_ratio = 0.0;

  switch (out.move) {
    case TreeMove::Grow: {
      const auto leaves = tree.leaves();
      const int leaf = pick(leaves, rng);
      const int var = rng.uniform_int(n_vars);
      const auto cand = cell_candidates(cells[static_cast<std::size_t>(leaf)], var, cuts);
      if (cand.empty()) return out;
      const int k = pick(cand, rng);
      const double mu = tree.node(leaf).mu;
      proposal.split(leaf, var, cuts.values(var)[static_cast<std::size_t>(k)], mu, mu);
      const double n_prunable = static_cast<double>(proposal.prunable_nodes().size());
      log_q_ratio = -std::log(n_prunable) +
                    (std::log(static_cast<double>(leaves.size())) + log_n_vars + std::log(static_cast<double>(cand.size())));
      break;
    }
    case TreeMove::Prune: {
      const auto prunable = tree.prunable_nodes();
      if (prunable.empty()) return out;
      const int node = pick(prunable, rng);
      const TreeNode& n = tree.node(node);
      const auto cand = cell_candidates(cells[static_cast<std::size_t>(node)], n.var, cuts);
      const double mu = 0.5 * (tree.node(n.left).mu + tree.node(n.right).mu);
      proposal.collapse(node, mu);
      const double leaves_after = static_cast<double>(proposal.n_leaves());
      log_q_ratio = -(std::log(leaves_after) + log_n_vars + std::log(static_cast<double>(std::max<std::size_t>(cand.size(), 1)))) +
                    std::log(static_cast<double>(prunable.size()));
      break;
    }
    case TreeMove::Change: {
      const auto internal = tree.internal_nodes();
      if (internal.empty()) return out;
      const int node = pick(internal, rng);
      const auto& rows = cells[static_cast<std::size_t>(node)];
      const int var = rng.uniform_int(n_vars);
      const auto cand_new = cell_candidates(rows, var, cuts);
      if (cand_new.empty()) return out;
      const auto cand_old = cell_candidates(rows, tree.node(node).var, cuts);
      const int k = pick(cand_new, rng);
      proposal.set_rule(node, var, cuts.values(var)[static_cast<std::size_t>(k)]);
      log_q_ratio = std::log(static_cast<double>(cand_new.size())) -
                    std::log(static_cast<double>(std::max<std::size_t>(cand_old.size(), 1)));
      break;
    }
    case TreeMove::Swap: {
      const auto pairs = tree.swappable_pairs();
      if (pairs.empty()) return out;
      const auto [parent, child] = pick(pairs, rng);
      const TreeNode& p = tree.node(parent);
      const TreeNode& c = tree.node(child);
      proposal.set_rule(parent, c.var, c.threshold);
      proposal.set_rule(child, p.var, p.threshold);
      break;
    }
  }
  out.proposed = true;

  const Cells new_cells = node_cells(proposal, cuts.Z());
  const double lp_new = structure_log_prior(proposal, new_cells, cuts, prior);
  if (lp_new == kNegInf) return out;
  const double lp_old = structure_log_prior(tree, cells, cuts, prior);
  const double ml_new = structure_log_ml(proposal, new_cells, target, leaf_prior_var);
  const double ml_old = structure_log_ml(tree, cells, target, leaf_prior_var);
  out.log_ratio = (lp_new + ml_new) - (lp_old + ml_old) + log_q_ratio;
  if (out.log_ratio >= 0.0 || std::log(rng.uniform_pos()) < out.log_ratio) {
    tree = std::move(proposal);
    out.accepted = true;
  }
  return out;
}

void sample_terminal_params(Tree& tree, const WeightedTarget& target, const MatrixXd& Z, double leaf_prior_var,
                            Rng& rng) {
  const double prior_prec = 1.0 / leaf_prior_var;
  for (const LeafSuffStats& s : leaf_suff_stats(tree, target, Z)) {
    const double post_var = 1.0 / (prior_prec + s.precision);
    tree.set_mu(s.node, rng.normal(post_var * s.weighted_sum, std::sqrt(post_var)));
  }
}

Tree sample_tree_from_prior(const CutTable& cuts, const TreePrior& prior, double leaf_prior_var, Rng& rng) {
  constexpr int kMaxAttempts = 100000;
  std::vector<int> all_rows(static_cast<std::size_t>(cuts.n_obs()));
  for (std::size_t i = 0; i < all_rows.size(); ++i) all_rows[i] = static_cast<int>(i);

  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Tree tree;
    std::deque<std::pair<int, std::vector<int>>> open;
    open.emplace_back(0, all_rows);
    bool valid = true;
    while (!open.empty() && valid) {
      auto [id, rows] = std::move(open.front());
      open.pop_front();
      const double p = node_split_prob(tree.node(id).depth, prior.nu, prior.alpha, prior.zeta);
      if (!rng.bernoulli(p)) {
        if (static_cast<int>(rows.size()) < prior.min_leaf_size) valid = false;
        continue;
      }
      const int var = rng.uniform_int(cuts.n_vars());
      const auto cand = cell_candidates(rows, var, cuts);
      if (cand.empty()) {
        valid = false;
        continue;
      }
      const double threshold = cuts.values(var)[static_cast<std::size_t>(pick(cand, rng))];
      tree.split(id, var, threshold, 0.0, 0.0);
      std::vector<int> left, right;
      for (int r : rows) (cuts.Z()(r, var) <= threshold ? left : right).push_back(r);
      open.emplace_back(tree.node(id).left, std::move(left));
      open.emplace_back(tree.node(id).right, std::move(right));
    }
    if (!valid) continue;
    for (int leaf : tree.leaves()) tree.set_mu(leaf, rng.normal(0.0, std::sqrt(leaf_prior_var)));
    return tree;
  }
  throw Error("could not draw a valid tree from the prior");
}

VectorXd bart_sweep(Ensemble& ensemble, const WeightedTarget& target, const CutTable& cuts, Rng& rng,
                    MoveCounts* counts) {
  const MatrixXd& Z = cuts.Z();
  std::vector<VectorXd> fits;
  fits.reserve(ensemble.trees.size());
  VectorXd total = VectorXd::Zero(Z.rows());
  for (const Tree& t : ensemble.trees) {
    fits.push_back(fit(t, Z));
    total += fits.back();
  }
  WeightedTarget partial{VectorXd(target.size()), target.variance, target.active};
  for (std::size_t s = 0; s < ensemble.trees.size(); ++s) {
    Tree& tree = ensemble.trees[s];
    partial.response = target.response - (total - fits[s]);
    const MoveOutcome o = propose_and_accept(tree, partial, cuts, ensemble.prior, ensemble.leaf_prior_var, rng);
    if (counts) counts->record(o);
    sample_terminal_params(tree, partial, Z, ensemble.leaf_prior_var, rng);
    VectorXd updated = fit(tree, Z);
    total += updated - fits[s];
    fits[s] = std::move(updated);
  }
  return total;
}

nlohmann::json tree_to_json(const Tree& tree) {
  nlohmann::json nodes = nlohmann::json::array();
  for (int i = 0; i < tree.size(); ++i) {
    const TreeNode& n = tree.node(i);
    nlohmann::json j{{"id", i}, {"parent", n.parent}};
    if (n.is_leaf()) {
      j["leaf"] = n.mu;
    } else {
      j["split_var"] = n.var;
      j["threshold"] = n.threshold;
    }
    nodes.push_back(std::move(j));
  }
  return nodes;
}

Tree tree_from_json(const nlohmann::json& j) {
  // Node ids are breadth-first; a parent's first listed child is its left child.
  Tree tree;
  if (!j.is_array() || j.empty()) throw Error("tree JSON must be a non-empty node list");
  std::vector<std::vector<int>> children(j.size());
  for (const auto& n : j) {
    const int parent = n.at("parent").get<int>();
    if (parent >= 0) children.at(static_cast<std::size_t>(parent)).push_back(n.at("id").get<int>());
  }
  std::vector<int> mapped(j.size(), -1);
  mapped[0] = 0;
  std::deque<int> queue{0};
  while (!queue.empty()) {
    const int id = queue.front();
    queue.pop_front();
    const auto& n = j.at(static_cast<std::size_t>(id));
    const int here = mapped[static_cast<std::size_t>(id)];
    if (n.contains("leaf")) {
      tree.set_mu(here, n.at("leaf").get<double>());
      continue;
    }
    const auto& ch = children[static_cast<std::size_t>(id)];
    if (ch.size() != 2) throw Error("internal tree node must have two children");
    const int l = std::min(ch[0], ch[1]), r = std::max(ch[0], ch[1]);
    tree.split(here, n.at("split_var").get<int>(), n.at("threshold").get<double>(), 0.0, 0.0);
    mapped[static_cast<std::size_t>(l)] = tree.node(here).left;
    mapped[static_cast<std::size_t>(r)] = tree.node(here).right;
    queue.push_back(l);
    queue.push_back(r);
  }
  return tree;
}

nlohmann::json ensemble_to_json(const Ensemble& e) {
  nlohmann::json trees = nlohmann::json::array();
  for (const Tree& t : e.trees) trees.push_back(tree_to_json(t));
  return {{"nu", e.prior.nu},
          {"alpha", e.prior.alpha},
          {"zeta", e.prior.zeta},
          {"min_leaf_size", e.prior.min_leaf_size},
          {"leaf_prior_var", e.leaf_prior_var},
          {"trees", std::move(trees)}};
}

Ensemble ensemble_from_json(const nlohmann::json& j) {
  Ensemble e;
  e.prior.nu = j.at("nu").get<int>();
  e.prior.alpha = j.at("alpha").get<double>();
  e.prior.zeta = j.at("zeta").get<double>();
  e.prior.min_leaf_size = j.at("min_leaf_size").get<int>();
  e.leaf_prior_var = j.at("leaf_prior_var").get<double>();
  for (const auto& t : j.at("trees")) e.trees.push_back(tree_from_json(t));
  return e;
}

}  // namespace tvpbart
