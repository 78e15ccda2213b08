#pragma once

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "atst/belief.hpp"
#include "atst/learner.hpp"
#include "atst/model.hpp"
#include "atst/offpolicy.hpp"
#include "atst/psi.hpp"
#include "atst/rng.hpp"

namespace atst {

struct McEstimate {
  double mean = 0.0;
  double std_err = 0.0;
  int n_samples = 0;
};

// Stationary policy over augmented states. Return an action index; anything
// outside [0, A) signals "undefined here" and raises DepthExhausted.
using AugmentedPolicy = std::function<int(const AugmentedState&)>;

// Rollout horizon T with gamma^T/(1-gamma) <= tail.
int rollout_horizon(double gamma, double tail = 1e-6);

// Monte-Carlo estimate of the sequence value K^pi(x, seq): commit to seq
// until the first data-burst, then follow pi.
McEstimate mc_k_value(const LinearAtstMdp& mdp, const ActionMatrixSet& ams,
                      const AugmentedState& x, const ActionSequence& seq,
                      const AugmentedPolicy& pi, int n_samples, SeededRng& rng);

// Same rollouts split into the pre-burst reward part and the post-burst
// continuation part; parts sum to the K estimate sample-by-sample.
struct KValueParts {
  McEstimate reward_part;
  McEstimate continuation_part;
};
KValueParts mc_k_parts(const LinearAtstMdp& mdp, const ActionMatrixSet& ams,
                       const AugmentedState& x, const ActionSequence& seq,
                       const AugmentedPolicy& pi, int n_samples,
                       SeededRng& rng);

// Monte-Carlo V^pi(s) under pure discounting.
McEstimate mc_policy_value(const LinearAtstMdp& mdp, const AugmentedPolicy& pi,
                           int s, int n_samples, SeededRng& rng);

// n-step backward evaluation of the fixed-policy recursion; entry s is within
// gamma^n/(1-gamma) of V^pi(s).
Eigen::VectorXd exact_policy_value(const LinearAtstMdp& mdp,
                                   const ActionMatrixSet& ams,
                                   const AugmentedPolicy& pi, int horizon);

// Exact discounted value of a burst-dependent policy given as per-(u, s)
// action-sequence choices (the learner's frozen episode policy). Between
// bursts the policy is a committed sequence, so each value is a chain sum;
// the stationary tail index solves a linear system over S.
class BurstPolicyEvaluator {
 public:
  explicit BurstPolicyEvaluator(const LinearAtstMdp& mdp,
                                double tail_eps = 1e-12);

  // choice[u-1][s] indexes family; returns the index-1 value table on S.
  Eigen::VectorXd evaluate(const std::vector<std::vector<int>>& choice,
                           const std::vector<ActionSequence>& family) const;

 private:
  struct ChainRow {
    double c = 0.0;          // discounted reward along the committed chain
    Eigen::RowVectorXd B;    // discounted burst-arrival distribution
  };
  const ChainRow& row(int s, int j,
                      const std::vector<ActionSequence>& family) const;

  const LinearAtstMdp& mdp_;
  std::vector<Eigen::MatrixXd> P_;  // per-action kernels, rows stochastic
  int chain_len_;
  mutable std::map<std::pair<int, int>, ChainRow> cache_;
};

struct ExperimentConfig {
  // model source: either a file path or a generator name
  std::string model_file;
  std::string generator;  // "benchmark3" | "random"
  std::uint64_t model_seed = 0;
  int gen_states = 3;
  int gen_actions = 2;
  double gen_gamma = 0.8;
  double gen_beta_min = 0.2;
  double gen_beta_max = 1.0;

  int episodes = 100;
  double confidence = 0.05;

  // learner schedule; H == 0 and rho < 0 mean "derive from the default schedule"
  int H = 0;
  double lambda = 1.0;
  double rho = -1.0;
  double c_rho = 0.1;
  int search_depth = 4;
  std::string strategy = "auto";  // auto | exhaustive | beam
  int beam_width = 64;

  std::string engine_mode = "exact";  // exact | estimated
  long estimation_n = 0;              // 0: derive from the sample-size schedule
  bool beta_known = false;

  std::vector<std::uint64_t> seeds = {1};
  std::vector<int> initial_schedule;  // empty: state 0
  std::string out_dir = "out";
  int eval_horizon = 0;  // 0: derive from gamma

  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load_file(const std::string& path);
  std::string to_json() const;

  void validate() const;  // throws ConfigError with the offending field
  LearnerConfig learner_config(double gamma, int d) const;
};

struct SeedSummary {
  std::uint64_t seed = 0;
  double cumulative_regret = 0.0;
  double mean_regret_first = 0.0;   // episodes 1..K/5
  double mean_regret_last = 0.0;    // episodes 4K/5+1..K
  double slope_first_half = 0.0;    // cumulative-regret slope, episodes <= K/2
  double slope_second_half = 0.0;
  double sqrt_k_coeff = 0.0;        // LS fit of C_k ~ coeff * sqrt(k), 2nd half
  bool regret_halved = false;       // mean_last <= 0.5 * mean_first
  bool sublinear = false;           // slope_second < slope_first
  std::string csv_path;
};

struct ExperimentResult {
  std::vector<SeedSummary> seeds;
  int halved_count = 0;
  bool sublinear_all = false;
  double v_star_s1 = 0.0;
  std::string summary_path;
  std::string plot_path;
  std::string admissibility_summary;  // estimated mode only
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Cumulative-regret curves, one polyline per seed.
void write_regret_svg(const std::vector<std::vector<double>>& cumulative,
                      const std::vector<std::uint64_t>& seeds,
                      const std::string& path);

}  // namespace atst
