// Regression trees over effect modifiers: structure, prior, Metropolis-Hastings
// moves, conjugate leaf updates and sum-of-trees backfitting.
#pragma once

#include "tvpbart/core.hpp"
#include "tvpbart/random.hpp"

#include <json.hpp>

#include <array>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tvpbart {

/// Parameters of the tree-generating prior. nu is the factor index that
/// sharpens the depth penalty for later factors.
struct TreePrior {
  double alpha = 0.95;
  double zeta = 2.0;
  int nu = 1;
  int min_leaf_size = 5;
};

/// Probability that a node at the given depth is split: alpha^nu (1+depth)^{-zeta^nu}.
double node_split_prob(int depth, int nu, double alpha, double zeta);

/// Distinct observed values of each modifier, and the rank of every row among
/// them. Thresholds are always drawn from these values.
class CutTable {
 public:
  CutTable() = default;
  explicit CutTable(const MatrixXd& Z);

  int n_vars() const { return static_cast<int>(Z_.cols()); }
  Eigen::Index n_obs() const { return Z_.rows(); }
  const MatrixXd& Z() const { return Z_; }
  const std::vector<double>& values(int var) const { return values_[static_cast<std::size_t>(var)]; }
  int rank(Eigen::Index row, int var) const { return rank_(row, var); }

 private:
  MatrixXd Z_;
  std::vector<std::vector<double>> values_;
  Eigen::MatrixXi rank_;
};

struct TreeNode {
  int parent = -1;
  int left = -1;
  int right = -1;
  int var = -1;
  double threshold = 0.0;
  double mu = 0.0;
  int depth = 0;

  bool is_leaf() const { return left < 0; }
};

/// Binary tree stored as a flat node list; node 0 is the root. Rows with
/// z[var] <= threshold go left.
class Tree {
 public:
  Tree() : nodes_{TreeNode{}} {}
  explicit Tree(double mu) : nodes_{TreeNode{}} { nodes_[0].mu = mu; }

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  int size() const { return static_cast<int>(nodes_.size()); }

  std::vector<int> leaves() const;
  std::vector<int> internal_nodes() const;
  /// Internal nodes whose children are both leaves.
  std::vector<int> prunable_nodes() const;
  /// (parent, child) pairs where both are internal.
  std::vector<std::pair<int, int>> swappable_pairs() const;
  int n_leaves() const;
  int max_depth() const;

  void split(int leaf, int var, double threshold, double mu_left, double mu_right);
  /// Removes the two leaf children of `node`, which becomes a leaf with value mu.
  void collapse(int node, double mu);
  void set_rule(int node, int var, double threshold);
  void set_mu(int leaf, double mu) { nodes_[static_cast<std::size_t>(leaf)].mu = mu; }

  template <typename Row>
  int find_leaf(const Row& z) const {
    int i = 0;
    while (!nodes_[static_cast<std::size_t>(i)].is_leaf()) {
      const TreeNode& n = nodes_[static_cast<std::size_t>(i)];
      i = (z(n.var) <= n.threshold) ? n.left : n.right;
    }
    return i;
  }

  /// Canonical text of the splitting rules (leaf values excluded).
  std::string structure_key() const;

 private:
  std::vector<TreeNode> nodes_;
};

struct Ensemble {
  std::vector<Tree> trees;
  TreePrior prior;
  double leaf_prior_var = 1.0;

  /// S root-only trees with terminal-node prior variance 1 / (2 kappa S).
  static Ensemble make(int n_trees, const TreePrior& prior, double kappa);
  int size() const { return static_cast<int>(trees.size()); }
};

/// Per-observation regression target with known noise variances. Inactive
/// observations carry no information about the leaves.
struct WeightedTarget {
  VectorXd response;
  VectorXd variance;
  std::vector<unsigned char> active;  // empty: all observations active

  bool is_active(Eigen::Index t) const {
    return active.empty() || active[static_cast<std::size_t>(t)] != 0;
  }
  Eigen::Index size() const { return response.size(); }
};

template <typename Row>
double evaluate(const Tree& tree, const Row& z) {
  return tree.node(tree.find_leaf(z)).mu;
}

template <typename Row>
double evaluate_ensemble(const Ensemble& ensemble, const Row& z) {
  double total = 0.0;
  for (const Tree& t : ensemble.trees) total += evaluate(t, z);
  return total;
}

/// Tree (or ensemble) evaluated at every row of Z.
VectorXd fit(const Tree& tree, const MatrixXd& Z);
VectorXd fit(const Ensemble& ensemble, const MatrixXd& Z);

struct LeafSuffStats {
  int node = -1;
  double precision = 0.0;     // sum of 1/w_t
  double weighted_sum = 0.0;  // sum of u_t/w_t
  int n_rows = 0;             // rows routed here, active or not
};

/// Sufficient statistics for each leaf, ordered as tree.leaves(). Throws if a
/// leaf receives no rows of Z.
std::vector<LeafSuffStats> leaf_suff_stats(const Tree& tree, const WeightedTarget& target, const MatrixXd& Z);

/// Log marginal likelihood of a leaf with mu ~ N(0, prior_var) integrated out,
/// dropping the data-only constant shared by all tree structures.
double leaf_marginal_loglik(double precision, double weighted_sum, double prior_var);
inline double leaf_marginal_loglik(const LeafSuffStats& s, double prior_var) {
  return leaf_marginal_loglik(s.precision, s.weighted_sum, prior_var);
}

/// Log prior of a tree structure; -inf if any leaf has fewer than
/// min_leaf_size rows or a threshold is not an interior observed value of its cell.
double tree_log_prior(const Tree& tree, const CutTable& cuts, const TreePrior& prior);

enum class TreeMove { Grow = 0, Prune = 1, Change = 2, Swap = 3 };

inline constexpr std::array<double, 4> kMoveProbs{0.25, 0.25, 0.40, 0.10};

struct MoveOutcome {
  TreeMove move = TreeMove::Grow;
  bool proposed = false;  // false when no valid proposal existed
  bool accepted = false;
  double log_ratio = -std::numeric_limits<double>::infinity();
};

/// One Metropolis-Hastings step on the tree structure with the leaf values
/// integrated out. `force` pins the move type (used by tests).
MoveOutcome propose_and_accept(Tree& tree, const WeightedTarget& target, const CutTable& cuts,
                               const TreePrior& prior, double leaf_prior_var, Rng& rng,
                               std::optional<TreeMove> force = std::nullopt);

/// Draws every leaf value from its Gaussian full conditional.
void sample_terminal_params(Tree& tree, const WeightedTarget& target, const MatrixXd& Z,
                            double leaf_prior_var, Rng& rng);

/// Draws a tree from the generative prior restricted to valid trees.
Tree sample_tree_from_prior(const CutTable& cuts, const TreePrior& prior, double leaf_prior_var, Rng& rng);

struct MoveCounts {
  std::array<long, 4> proposed{};
  std::array<long, 4> accepted{};

  void record(const MoveOutcome& o) {
    const auto i = static_cast<std::size_t>(o.move);
    if (o.proposed) ++proposed[i];
    if (o.accepted) ++accepted[i];
  }
  MoveCounts& operator+=(const MoveCounts& o) {
    for (std::size_t i = 0; i < 4; ++i) {
      proposed[i] += o.proposed[i];
      accepted[i] += o.accepted[i];
    }
    return *this;
  }
};

/// Bayesian backfitting: each tree is updated against the target minus the
/// fit of all other trees. Returns the new ensemble fit at the rows of Z.
VectorXd bart_sweep(Ensemble& ensemble, const WeightedTarget& target, const CutTable& cuts, Rng& rng,
                    MoveCounts* counts = nullptr);

nlohmann::json tree_to_json(const Tree& tree);
Tree tree_from_json(const nlohmann::json& j);
nlohmann::json ensemble_to_json(const Ensemble& ensemble);
Ensemble ensemble_from_json(const nlohmann::json& j);

}  // namespace tvpbart
