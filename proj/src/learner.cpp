#include "atst/learner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "atst/errors.hpp"

namespace atst {

LearnerConfig LearnerConfig::default_schedule(int episodes, double gamma, int d,
                                              double p, double c_rho,
                                              int search_depth) {
  if (episodes < 1 || gamma <= 0.0 || gamma >= 1.0 || p <= 0.0 || p >= 1.0)
    throw ConfigError("default_schedule: bad arguments");
  LearnerConfig cfg;
  cfg.H = static_cast<int>(
              std::ceil(std::log(episodes / (1.0 - gamma)) / (1.0 - gamma))) +
          1;
  cfg.H = std::max(cfg.H, 2);
  cfg.lambda = 1.0;
  cfg.c_rho = c_rho;
  const double iota =
      std::log(2.0 * d * static_cast<double>(episodes) * cfg.H / p);
  cfg.rho = c_rho * d * cfg.H * std::sqrt(iota);
  cfg.search_depth = search_depth;
  return cfg;
}

StLsviUcb::StLsviUcb(const PsiEngine& engine, LearnerConfig cfg)
    : engine_(engine), cfg_(cfg) {
  if (cfg_.H < 2) throw ConfigError("learner: H must be at least 2");
  if (cfg_.search_depth < 1) throw ConfigError("learner: search_depth < 1");
  if (cfg_.lambda <= 0.0) throw ConfigError("learner: lambda must be positive");
  vmax_ = 1.0 / (1.0 - engine_.gamma());

  const int A = engine_.num_actions();
  const int S = engine_.num_states();
  const int L = cfg_.search_depth;
  double count = 1.0;
  for (int i = 0; i < L; ++i) count *= A;
  const bool fits = count <= static_cast<double>(cfg_.node_budget);
  switch (cfg_.strategy) {
    case SearchStrategy::kAuto:
      exhaustive_ = fits;
      break;
    case SearchStrategy::kExhaustive:
      if (!fits)
        throw OptimizerBudgetExceeded(
            "exhaustive sequence search exceeds the node budget");
      exhaustive_ = true;
      break;
    case SearchStrategy::kBeam:
      exhaustive_ = false;
      break;
  }

  if (exhaustive_) {
    // all length-L prefixes with repeat-last tails, lexicographic order
    std::vector<int> prefix(L, 0);
    const long total = static_cast<long>(count);
    family_.reserve(total);
    for (long idx = 0; idx < total; ++idx) {
      long rem = idx;
      for (int i = L - 1; i >= 0; --i) {
        prefix[i] = static_cast<int>(rem % A);
        rem /= A;
      }
      family_.emplace_back(prefix);
    }
    psi_cache_.resize(S);
    for (int s = 0; s < S; ++s) {
      psi_cache_[s].resize(2 * engine_.d(), total);
      for (long j = 0; j < total; ++j)
        psi_cache_[s].col(j) = engine_.psi(s, family_[j]);
    }
    for (long j = 0; j < total; ++j) family_index_[family_[j].prefix] = j;
  }

  const int twod = 2 * engine_.d();
  gram_ = cfg_.lambda * Eigen::MatrixXd::Identity(twod, twod);
}

int StLsviUcb::intern(const std::vector<int>& prefix) {
  auto it = family_index_.find(prefix);
  if (it != family_index_.end()) return it->second;
  const int idx = static_cast<int>(family_.size());
  family_.emplace_back(prefix);
  family_index_.emplace(prefix, idx);
  return idx;
}

double StLsviUcb::score(const Eigen::VectorXd& psi,
                        const Eigen::VectorXd& w) const {
  return std::min(vmax_, psi.dot(w) + bonus(psi));
}

double StLsviUcb::bonus(const Eigen::VectorXd& psi) const {
  if (cfg_.rho == 0.0) return 0.0;
  return cfg_.rho * std::sqrt(psi.dot(gram_llt_.solve(psi)));
}

double StLsviUcb::k_value(int u, int s, const ActionSequence& seq) const {
  u = std::min(u, cfg_.H - 1);
  if (u < 1 || weights_.empty())
    throw std::logic_error("k_value: plan an episode first");
  const Eigen::VectorXd psi = engine_.psi(s, seq);
  return score(psi, weights_[u - 1]);
}

double StLsviUcb::best_in_family(int s, const Eigen::VectorXd& w,
                                 int* argmax) {
  if (!exhaustive_) return beam_best(s, w, argmax);
  const long n = static_cast<long>(family_.size());
  const Eigen::VectorXd dots = psi_cache_[s].transpose() * w;
  double best = -std::numeric_limits<double>::infinity();
  int best_j = 0;
  for (long j = 0; j < n; ++j) {
    const double v =
        std::min(vmax_, dots[j] + (cfg_.rho == 0.0 ? 0.0 : bonus_[s](j)));
    if (v > best) {  // strict: earliest index wins, family is lexicographic
      best = v;
      best_j = static_cast<int>(j);
    }
  }
  nodes_ += n;
  if (argmax) *argmax = best_j;
  return best;
}

double StLsviUcb::beam_best(int s, const Eigen::VectorXd& w, int* argmax) {
  struct Candidate {
    std::vector<int> prefix;
    double value;
  };
  const int A = engine_.num_actions();
  std::vector<Candidate> beam;
  for (int a = 0; a < A; ++a) beam.push_back({{a}, 0.0});

  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> best_prefix;
  for (int depth = 1; depth <= cfg_.search_depth; ++depth) {
    for (auto& c : beam) {
      const Eigen::VectorXd psi = engine_.psi(s, ActionSequence(c.prefix));
      c.value = score(psi, w);
      ++nodes_;
      if (c.value > best) {
        best = c.value;
        best_prefix = c.prefix;
      }
    }
    if (depth == cfg_.search_depth) break;
    std::stable_sort(beam.begin(), beam.end(),
                     [](const Candidate& a, const Candidate& b) {
                       return a.value > b.value;
                     });
    if (static_cast<int>(beam.size()) > cfg_.beam_width)
      beam.resize(cfg_.beam_width);
    std::vector<Candidate> next;
    next.reserve(beam.size() * A);
    for (const auto& c : beam)
      for (int a = 0; a < A; ++a) {
        auto p = c.prefix;
        p.push_back(a);
        next.push_back({std::move(p), 0.0});
      }
    beam = std::move(next);
  }
  if (argmax) *argmax = intern(best_prefix);
  return best;
}

double StLsviUcb::family_gap_bound() const {
  double wmax = 0.0;
  for (const auto& w : weights_) wmax = std::max(wmax, w.norm());
  return 2.0 * engine_.series().tail_bound *
         (wmax + cfg_.rho / std::sqrt(cfg_.lambda));
}

void StLsviUcb::start_episode() {
  ++episode_;
  bursts_this_episode_ = 0;
  nodes_ = 0;
  const int twod = 2 * engine_.d();
  const int S = engine_.num_states();
  const int H = cfg_.H;

  if (!cfg_.incremental_gram) {
    gram_ = cfg_.lambda * Eigen::MatrixXd::Identity(twod, twod);
    for (const auto& psi : history_psi_)
      gram_.noalias() += psi * psi.transpose();
  }
  gram_llt_.compute(gram_);
  if (gram_llt_.info() != Eigen::Success)
    throw ModelError("learner: Gram factorization failed");

  if (exhaustive_ && cfg_.rho != 0.0) {
    bonus_.assign(S, Eigen::MatrixXd());
    for (int s = 0; s < S; ++s) {
      const Eigen::MatrixXd solved = gram_llt_.solve(psi_cache_[s]);
      bonus_[s] = cfg_.rho *
                  (psi_cache_[s].cwiseProduct(solved).colwise().sum())
                      .cwiseMax(0.0)
                      .cwiseSqrt()
                      .transpose();
    }
  }

  weights_.assign(H - 1, Eigen::VectorXd::Zero(twod));
  choice_.assign(H - 1, std::vector<int>(S, 0));

  // Regression right-hand sides decompose as b0 + sum_s G(s) * psi_sum[s],
  // so each backward level costs O(d*S) instead of a pass over the history.
  Eigen::VectorXd b0 = Eigen::VectorXd::Zero(twod);
  Eigen::MatrixXd psi_sum = Eigen::MatrixXd::Zero(twod, S);
  for (std::size_t i = 0; i < history_.size(); ++i) {
    const auto& t = history_[i];
    b0.noalias() += history_psi_[i] * t.reward_capped;
    if (t.next_state != kTerminal) psi_sum.col(t.next_state) += history_psi_[i];
  }

  // value of the revealed next state one level up; level H is the cap
  Eigen::VectorXd next_level = Eigen::VectorXd::Constant(S, vmax_);
  const double wbound =
      4.0 * std::sqrt(engine_.d() * static_cast<double>(episode_) * H * H * H /
                      cfg_.lambda);
  for (int u = H - 1; u >= 1; --u) {
    const Eigen::VectorXd b = b0 + psi_sum * next_level;
    weights_[u - 1] = gram_llt_.solve(b);
    if (weights_[u - 1].norm() > wbound * (1.0 + 1e-9))
      throw ModelError("learner: weight norm invariant violated");
    for (int s = 0; s < S; ++s)
      next_level[s] = best_in_family(s, weights_[u - 1], &choice_[u - 1][s]);
  }
}

int StLsviUcb::select_sequence_index(int u, int s) {
  if (weights_.empty())
    throw std::logic_error("select_sequence_index: plan an episode first");
  u = std::min(u, cfg_.H - 1);
  if (u < 1) throw std::logic_error("select_sequence_index: u must be >= 1");
  return choice_[u - 1][s];
}

void StLsviUcb::observe_burst(int s_prev, int seq_index, double reward_raw,
                              int s_next) {
  ++bursts_this_episode_;
  if (bursts_this_episode_ > cfg_.H) return;  // effective history keeps H/episode
  HistoryTuple t;
  t.state = s_prev;
  t.seq_index = seq_index;
  t.reward_capped = std::min(reward_raw, static_cast<double>(cfg_.H));
  t.next_state = s_next;
  history_.push_back(t);
  Eigen::VectorXd psi =
      exhaustive_ ? Eigen::VectorXd(psi_cache_[t.state].col(t.seq_index))
                  : engine_.psi(t.state, family_[t.seq_index]);
  if (cfg_.incremental_gram) gram_.noalias() += psi * psi.transpose();
  history_psi_.push_back(std::move(psi));
}

void write_regret_csv(const std::vector<RegretLogRow>& rows,
                      const std::string& path) {
  std::ofstream out(path);
  out << "episode,realized_reward,V_star_s1,V_pik_s1,regret_contrib,"
         "planning_ms,opt_nodes\n";
  for (const auto& r : rows)
    out << r.episode << ',' << r.realized_reward << ',' << r.v_star_s1 << ','
        << r.v_pik_s1 << ',' << r.regret_contrib << ',' << r.planning_ms << ','
        << r.opt_nodes << '\n';
}

LearningResult run_learning(const LinearAtstMdp& mdp, const PsiEngine& engine,
                            int episodes,
                            const std::vector<int>& initial_schedule,
                            const LearnerConfig& cfg, SeededRng& rng,
                            const PolicyEvaluator* evaluator,
                            const DecisionObserver* observer) {
  if (initial_schedule.empty())
    throw ConfigError("run_learning: empty initial-state schedule");
  StLsviUcb learner(engine, cfg);
  LearningResult out;
  out.log.reserve(episodes);
  out.transcripts.reserve(episodes);

  for (int k = 0; k < episodes; ++k) {
    SeededRng ep_rng = rng.substream(static_cast<std::uint64_t>(k) + 1);
    const int s1 =
        initial_schedule[static_cast<std::size_t>(k) % initial_schedule.size()];

    const auto t0 = std::chrono::steady_clock::now();
    learner.start_episode();
    const auto t1 = std::chrono::steady_clock::now();

    std::vector<int> chosen;
    SequenceAgent agent = [&](int state, int burst_index) -> ActionSequence {
      const int u = std::min(burst_index + 1, cfg.H - 1);
      const int j = learner.select_sequence_index(u, state);
      chosen.push_back(j);
      if (observer) (*observer)(k + 1, burst_index, state, j);
      return learner.family()[j];
    };
    EpisodeTranscript tr = run_episode(mdp, s1, agent, ep_rng);
    for (std::size_t i = 0; i < tr.bursts.size(); ++i)
      learner.observe_burst(tr.bursts[i].observed_state, chosen[i],
                            tr.bursts[i].aggregated_reward,
                            tr.bursts[i].next_observed);

    RegretLogRow row;
    row.episode = k + 1;
    row.realized_reward = tr.total_reward;
    if (evaluator) {
      const EpisodeEvaluation ev =
          (*evaluator)(s1, learner.choice_table(), learner.family());
      row.v_star_s1 = ev.v_star_s1;
      row.v_pik_s1 = ev.v_pik_s1;
      row.regret_contrib = ev.v_star_s1 - ev.v_pik_s1;
    }
    row.planning_ms =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
    row.opt_nodes = learner.planning_nodes();
    out.log.push_back(row);
    out.transcripts.push_back(std::move(tr));
    out.family_gap_bounds.push_back(learner.family_gap_bound());
  }
  return out;
}

}  // namespace atst
