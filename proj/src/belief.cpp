#include "atst/belief.hpp"

#include <cmath>
#include <sstream>

namespace atst {

namespace {
constexpr double kClampTol = 1e-12;
constexpr double kPruneTol = 1e-13;  // max contribution of a pruned branch
}  // namespace

double operator_norm_2(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()[0];
}

ActionMatrixSet action_matrices(const LinearAtstMdp& mdp) {
  ActionMatrixSet out;
  out.matrices.reserve(mdp.num_actions());
  for (int a = 0; a < mdp.num_actions(); ++a) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(mdp.d(), mdp.d());
    for (int s = 0; s < mdp.num_states(); ++s)
      m += mdp.mu().col(s) * mdp.phi(s, a).transpose();
    out.matrices.push_back(std::move(m));
  }

  // spot-verify the sqrt(d) bound on products up to length 4
  const double bound = std::sqrt(static_cast<double>(mdp.d())) + 1e-9;
  SeededRng rng(0xa75f);
  for (int trial = 0; trial < 16; ++trial) {
    const int n = 1 + trial % 4;
    Eigen::MatrixXd prod =
        Eigen::MatrixXd::Identity(mdp.d(), mdp.d());
    for (int i = 0; i < n; ++i)
      prod = prod * out.matrices[rng.uniform_int(mdp.num_actions())];
    if (operator_norm_2(prod) > bound) {
      std::ostringstream os;
      os << "action-matrix product norm " << operator_norm_2(prod)
         << " exceeds sqrt(d)";
      throw ModelError(os.str());
    }
  }
  return out;
}

Eigen::VectorXd extended_feature(const LinearAtstMdp& mdp,
                                 const ActionMatrixSet& ams,
                                 const AugmentedState& x) {
  if (x.is_terminal() || x.depth() == 0)
    throw EmptyTail("extended_feature requires depth >= 1");
  Eigen::VectorXd f = mdp.phi(x.anchor, x.tail[0]);
  for (std::size_t i = 1; i < x.tail.size(); ++i)
    f = ams[x.tail[i]].transpose() * f;
  return f;
}

Eigen::VectorXd belief(const LinearAtstMdp& mdp, const ActionMatrixSet& ams,
                       const AugmentedState& x) {
  const Eigen::VectorXd f = extended_feature(mdp, ams, x);
  Eigen::VectorXd b = mdp.mu().transpose() * f;
  for (int s = 0; s < b.size(); ++s) {
    if (b[s] < -kClampTol) {
      std::ostringstream os;
      os << "belief entry " << b[s] << " at state " << s
         << " is below float noise; model is invalid";
      throw ModelError(os.str());
    }
    if (b[s] < 0.0) b[s] = 0.0;
  }
  const double sum = b.sum();
  if (std::abs(sum - 1.0) > 1e-9) {
    std::ostringstream os;
    os << "belief sums to " << sum;
    throw ModelError(os.str());
  }
  return b / sum;
}

std::vector<AugmentedState> enumerate_augmented_states(int num_states,
                                                       int num_actions,
                                                       int depth_cap) {
  std::vector<AugmentedState> out;
  for (int s = 0; s < num_states; ++s) out.emplace_back(s);
  std::size_t level_begin = 0;
  for (int depth = 1; depth <= depth_cap; ++depth) {
    const std::size_t level_end = out.size();
    for (std::size_t i = level_begin; i < level_end; ++i)
      for (int a = 0; a < num_actions; ++a) out.push_back(out[i].append(a));
    level_begin = level_end;
  }
  return out;
}

ValueTable bellman_operator(const LinearAtstMdp& mdp,
                            const ActionMatrixSet& ams, const ValueTable& v) {
  if (v.depth_cap == 0)
    throw DepthExhausted("bellman_operator needs depth_cap >= 1");
  const double vmax = 1.0 / (1.0 - mdp.gamma());
  ValueTable out;
  out.depth_cap = v.depth_cap - 1;

  Eigen::VectorXd v_states(mdp.num_states());
  for (int s = 0; s < mdp.num_states(); ++s)
    v_states[s] = v.at(AugmentedState(s));

  for (const AugmentedState& x : enumerate_augmented_states(
           mdp.num_states(), mdp.num_actions(), out.depth_cap)) {
    Eigen::VectorXd fx;
    if (x.depth() > 0) fx = extended_feature(mdp, ams, x);
    double best = -1.0;
    for (int a = 0; a < mdp.num_actions(); ++a) {
      const Eigen::VectorXd f2 =
          x.depth() == 0 ? mdp.phi(x.anchor, a)
                         : Eigen::VectorXd(ams[a].transpose() * fx);
      const double exp_reward = f2.dot(mdp.theta());
      const double burst_cont = (mdp.mu().transpose() * f2).dot(v_states);
      const double blind_cont = v.at(x.append(a));
      const double q = exp_reward +
                       mdp.gamma() * mdp.beta(a) * burst_cont +
                       mdp.gamma() * mdp.beta_bar(a) * blind_cont;
      if (q > best) best = q;
    }
    if (best < -1e-9 || best > vmax + 1e-9) {
      std::ostringstream os;
      os << "Bellman update left [0, 1/(1-gamma)]: " << best;
      throw ModelError(os.str());
    }
    out.values[x] = std::min(std::max(best, 0.0), vmax);
  }
  return out;
}

OptimalValues::OptimalValues(const LinearAtstMdp& mdp,
                             const ActionMatrixSet& ams, int iterations,
                             long node_budget)
    : mdp_(mdp), ams_(ams), node_budget_(node_budget) {
  iterates_.push_back(Eigen::VectorXd::Zero(mdp.num_states()));
  for (int t = 1; t <= iterations; ++t) {
    Eigen::VectorXd v(mdp.num_states());
    for (int s = 0; s < mdp.num_states(); ++s)
      v[s] = sweep_value(nullptr, s, t, 1.0, iterates_, false, nullptr);
    iterates_.push_back(std::move(v));
  }
  greedy_first_.resize(mdp.num_states());
  for (int s = 0; s < mdp.num_states(); ++s)
    sweep_value(nullptr, s, iterations, 1.0, iterates_, true,
                &greedy_first_[s]);
}

double OptimalValues::sweep_value(const Eigen::VectorXd* f, int s, int steps,
                                  double weight,
                                  const std::vector<Eigen::VectorXd>& vs,
                                  bool stationary, int* argmax_out) const {
  if (steps <= 0) return 0.0;
  const double vmax = 1.0 / (1.0 - mdp_.gamma());
  if (weight * vmax < kPruneTol) return 0.0;
  if (++nodes_ > node_budget_)
    throw OptimizerBudgetExceeded("optimal_values node budget exceeded");

  const Eigen::VectorXd& v_burst =
      stationary ? vs.back() : vs[static_cast<std::size_t>(steps - 1)];
  double best = -1.0;
  int best_a = 0;
  for (int a = 0; a < mdp_.num_actions(); ++a) {
    const Eigen::VectorXd f2 =
        f == nullptr ? mdp_.phi(s, a)
                     : Eigen::VectorXd(ams_[a].transpose() * (*f));
    double q = f2.dot(mdp_.theta()) +
               mdp_.gamma() * mdp_.beta(a) *
                   (mdp_.mu().transpose() * f2).dot(v_burst);
    if (mdp_.beta_bar(a) > 0.0) {
      const double w2 = weight * mdp_.gamma() * mdp_.beta_bar(a);
      q += mdp_.gamma() * mdp_.beta_bar(a) *
           sweep_value(&f2, s, steps - 1, w2, vs, stationary, nullptr);
    }
    if (q > best) {
      best = q;
      best_a = a;
    }
  }
  if (argmax_out) *argmax_out = best_a;
  return std::min(best, vmax);
}

int OptimalValues::greedy_action(const AugmentedState& x) const {
  int a = 0;
  if (x.depth() == 0) {
    sweep_value(nullptr, x.anchor, iterations(), 1.0, iterates_, true, &a);
  } else {
    const Eigen::VectorXd f = extended_feature(mdp_, ams_, x);
    sweep_value(&f, x.anchor, iterations(), 1.0, iterates_, true, &a);
  }
  return a;
}

OptimalValues optimal_values(const LinearAtstMdp& mdp,
                             const ActionMatrixSet& ams, int iterations,
                             long node_budget) {
  return OptimalValues(mdp, ams, iterations, node_budget);
}

int default_planning_iterations(double gamma, double eps) {
  return static_cast<int>(
      std::ceil(std::log(1.0 / (eps * (1.0 - gamma))) / (1.0 - gamma)));
}

}  // namespace atst
