#pragma once

#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "atst/model.hpp"

namespace atst {

// l2->l2 operator norm (largest singular value)
double operator_norm_2(const Eigen::MatrixXd& m);

// Action-matrices M_a = sum_s mu(.,s) phi(s,a)^T. Products of these propagate
// feature vectors one blind action forward: phi(x + a) = M_a^T phi(x).
struct ActionMatrixSet {
  std::vector<Eigen::MatrixXd> matrices;

  const Eigen::MatrixXd& operator[](int a) const { return matrices[a]; }
  int size() const { return static_cast<int>(matrices.size()); }
};

// Builds the set and spot-checks ||prod M_a||_2 <= sqrt(d) on random products
// up to length 4.
ActionMatrixSet action_matrices(const LinearAtstMdp& mdp);

// phi(x) = phi(s1,a1)^T prod_{i>=2} M(a_i) for x = (s1; a1..aD), D >= 1.
// Throws EmptyTail when the tail is empty.
Eigen::VectorXd extended_feature(const LinearAtstMdp& mdp,
                                 const ActionMatrixSet& ams,
                                 const AugmentedState& x);

// Belief over the hidden current state: b(s|x) = <phi(x), mu(.,s)>, tiny
// negative entries clamped and the vector renormalized.
Eigen::VectorXd belief(const LinearAtstMdp& mdp, const ActionMatrixSet& ams,
                       const AugmentedState& x);

// Value table over augmented states of depth <= depth_cap. Terminal maps
// to 0.
struct ValueTable {
  int depth_cap = 0;
  std::unordered_map<AugmentedState, double, AugmentedStateHash> values;

  double at(const AugmentedState& x) const {
    if (x.is_terminal()) return 0.0;
    return values.at(x);
  }
};

std::vector<AugmentedState> enumerate_augmented_states(int num_states,
                                                       int num_actions,
                                                       int depth_cap);

// One application of the Bellman optimality operator on the truncated space:
// input defined on depth <= D, output on depth <= D-1.
ValueTable bellman_operator(const LinearAtstMdp& mdp,
                            const ActionMatrixSet& ams, const ValueTable& v);

// Result of truncated optimal value iteration. v_star lives on S and is
// within gamma^n/(1-gamma) of V*; iterates[t] is T^t(0) restricted to S.
class OptimalValues {
 public:
  OptimalValues(const LinearAtstMdp& mdp, const ActionMatrixSet& ams,
                int iterations, long node_budget);

  const Eigen::VectorXd& v_star() const { return iterates_.back(); }
  const std::vector<Eigen::VectorXd>& iterates() const { return iterates_; }
  int iterations() const { return static_cast<int>(iterates_.size()) - 1; }
  int greedy_first_action(int s) const { return greedy_first_[s]; }

  // Greedy action at an augmented state w.r.t. the converged values.
  int greedy_action(const AugmentedState& x) const;

  long nodes_expanded() const { return nodes_; }

 private:
  double sweep_value(const Eigen::VectorXd* f, int s, int steps,
                     double weight, const std::vector<Eigen::VectorXd>& vs,
                     bool stationary, int* argmax_out) const;

  const LinearAtstMdp& mdp_;
  const ActionMatrixSet& ams_;
  std::vector<Eigen::VectorXd> iterates_;
  std::vector<int> greedy_first_;
  long node_budget_;
  mutable long nodes_ = 0;
};

// n applications of T starting from V == 0, organized as a depth-first sweep
// with weight-based pruning of branches whose total contribution is below
// float tolerance.
OptimalValues optimal_values(const LinearAtstMdp& mdp,
                             const ActionMatrixSet& ams, int iterations,
                             long node_budget = 50'000'000);

// Default iteration count for planning accuracy eps:
// ceil(log(1/(eps(1-gamma))) / (1-gamma)).
int default_planning_iterations(double gamma, double eps = 1e-4);

}  // namespace atst
