#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "atst/model.hpp"
#include "atst/rng.hpp"

namespace atst {

struct OffPolicyRow {
  int s = 0;
  int a = 0;
  int s_next = 0;
  int b = 0;  // data-burst indicator
};

struct OffPolicyDataset {
  std::vector<OffPolicyRow> rows;
  Eigen::VectorXd sampling_dist;  // over (s,a) cells, index s*A + a
  int num_states = 0;
  int num_actions = 0;
  double sigma_min = 0.0;   // lambda_min of the empirical second-moment matrix
  double p_min_emp = 0.0;   // smallest empirical action frequency

  void write_csv(const std::string& path) const;
};

// N i.i.d. draws (s,a) ~ dist, s' from the true kernel, b ~ Ber(beta(a)).
OffPolicyDataset sample_dataset(const LinearAtstMdp& mdp,
                                const Eigen::VectorXd& dist, int n,
                                SeededRng& rng);

// Per-action ridge estimates M_hat_a = (X^T X + lambda I)^-1 X^T Y_a solved
// via an SPD factorization shared across actions.
std::vector<Eigen::MatrixXd> ridge_action_matrices(
    const OffPolicyDataset& data, const LinearAtstMdp& mdp,
    double lambda = 1.0);

struct BetaEstimate {
  Eigen::VectorXd beta_hat;
  std::vector<bool> unseen;  // actions with zero count (beta_hat = 1/2)
};

BetaEstimate empirical_beta(const OffPolicyDataset& data);

// Sample-size schedule for an eps-admissible off-policy feature map. The
// absolute constant is configurable; the default c = 1 is a heuristic since
// the analysis never instantiates it.
long required_sample_size(int d, int num_actions, double gamma, double eps,
                          double p, double lambda_min_sigma, double p_min,
                          bool beta_known, double c = 1.0);

}  // namespace atst
