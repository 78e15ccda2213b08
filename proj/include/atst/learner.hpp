#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "atst/psi.hpp"
#include "atst/sim.hpp"

namespace atst {

enum class SearchStrategy { kAuto, kExhaustive, kBeam };

struct LearnerConfig {
  int H = 2;              // effective horizon
  double lambda = 1.0;    // ridge regularizer
  double rho = 0.0;       // bonus coefficient
  double c_rho = 0.1;
  int search_depth = 4;   // L_opt: length of candidate prefixes
  SearchStrategy strategy = SearchStrategy::kAuto;
  int beam_width = 64;
  long node_budget = 100'000;  // exhaustive search cap, beam beyond
  bool incremental_gram = false;

  // H = ceil(log(K/(1-gamma))/(1-gamma)) + 1, lambda = 1,
  // rho = c_rho * d * H * sqrt(log(2dKH/p)).
  static LearnerConfig default_schedule(int episodes, double gamma, int d,
                                        double p, double c_rho = 0.1,
                                        int search_depth = 4);
};

struct HistoryTuple {
  int state = 0;
  int seq_index = 0;        // into the candidate family
  double reward_capped = 0.0;
  int next_state = kTerminal;
};

// ST-LSVI-UCB: backward least-squares value iteration over burst indices
// with elliptical UCB bonuses, acting greedily over a truncated
// action-sequence family (prefixes of length search_depth with repeat-last
// continuation).
class StLsviUcb {
 public:
  StLsviUcb(const PsiEngine& engine, LearnerConfig cfg);

  const LearnerConfig& config() const { return cfg_; }
  const std::vector<ActionSequence>& family() const { return family_; }
  const std::vector<HistoryTuple>& history() const { return history_; }
  const Eigen::MatrixXd& gram() const { return gram_; }
  const Eigen::VectorXd& weights(int u) const { return weights_.at(u - 1); }
  int episode() const { return episode_; }
  long planning_nodes() const { return nodes_; }
  bool exhaustive() const { return exhaustive_; }
  // [u-1][s] -> family index of the frozen greedy choice for this episode
  const std::vector<std::vector<int>>& choice_table() const { return choice_; }

  // Upper bound on the objective loss from restricting the argmax to the
  // truncated family, logged per episode.
  double family_gap_bound() const;

  // Episode-k planning pass: rebuild the Gram matrix from the effective
  // history and run the backward sweep u = H-1 .. 1.
  void start_episode();

  // Greedy action-sequence for weight index u (1-based, capped at H-1).
  int select_sequence_index(int u, int s);
  const ActionSequence& select_sequence(int u, int s) {
    return family_[select_sequence_index(u, s)];
  }

  // UCB value min{1/(1-gamma), <psi, w_u> + rho ||psi||_{Lambda^-1}}.
  double k_value(int u, int s, const ActionSequence& seq) const;

  // Record a burst tuple; only the first H bursts of an episode enter the
  // effective history, and rewards are capped at H.
  void observe_burst(int s_prev, int seq_index, double reward_raw, int s_next);

  // count of effective-history tuples across episodes
  int effective_history_size() const { return static_cast<int>(history_.size()); }

 private:
  double score(const Eigen::VectorXd& psi, const Eigen::VectorXd& w) const;
  double bonus(const Eigen::VectorXd& psi) const;
  double best_in_family(int s, const Eigen::VectorXd& w, int* argmax);
  double beam_best(int s, const Eigen::VectorXd& w, int* argmax);
  int intern(const std::vector<int>& prefix);

  const PsiEngine& engine_;
  LearnerConfig cfg_;
  double vmax_;
  bool exhaustive_ = true;

  std::vector<ActionSequence> family_;       // lexicographic order
  std::map<std::vector<int>, int> family_index_;  // beam-mode interning
  std::vector<Eigen::MatrixXd> psi_cache_;   // per state: 2d x |family|
  std::vector<HistoryTuple> history_;
  std::vector<Eigen::VectorXd> history_psi_;  // cached feature per tuple
  Eigen::MatrixXd gram_;                     // Lambda^k
  Eigen::LLT<Eigen::MatrixXd> gram_llt_;
  std::vector<Eigen::MatrixXd> bonus_;       // per state: |family| (episode)
  std::vector<Eigen::VectorXd> weights_;     // w_u, u = 1..H-1
  std::vector<std::vector<int>> choice_;     // [u-1][s] -> family index

  int episode_ = 0;
  int bursts_this_episode_ = 0;
  mutable long nodes_ = 0;
};

struct RegretLogRow {
  int episode = 0;
  double realized_reward = 0.0;
  double v_star_s1 = 0.0;
  double v_pik_s1 = 0.0;
  double regret_contrib = 0.0;
  double planning_ms = 0.0;
  long opt_nodes = 0;
};

void write_regret_csv(const std::vector<RegretLogRow>& rows,
                      const std::string& path);

struct EpisodeEvaluation {
  double v_star_s1 = 0.0;
  double v_pik_s1 = 0.0;
};

// Per-episode oracle hook: receives the initial state, the frozen
// per-(u, s) sequence choices (u 1-based up to H-1) and the candidate
// family; returns exact values for regret accounting.
using PolicyEvaluator = std::function<EpisodeEvaluation(
    int s1, const std::vector<std::vector<int>>& choice,
    const std::vector<ActionSequence>& family)>;

using DecisionObserver =
    std::function<void(int episode, int burst_index, int state, int seq_index)>;

struct LearningResult {
  std::vector<RegretLogRow> log;
  std::vector<EpisodeTranscript> transcripts;
  std::vector<double> family_gap_bounds;
};

// Outer episodic loop against the simulator. Initial states cycle through
// initial_schedule; episode k uses RNG stream k.
LearningResult run_learning(const LinearAtstMdp& mdp, const PsiEngine& engine,
                            int episodes,
                            const std::vector<int>& initial_schedule,
                            const LearnerConfig& cfg, SeededRng& rng,
                            const PolicyEvaluator* evaluator = nullptr,
                            const DecisionObserver* observer = nullptr);

}  // namespace atst
