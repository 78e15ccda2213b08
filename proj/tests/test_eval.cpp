#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "atst/belief.hpp"
#include "atst/errors.hpp"
#include "atst/eval.hpp"
#include "atst/model.hpp"
#include "atst/psi.hpp"
#include "atst/rng.hpp"

using namespace atst;

namespace {

Eigen::VectorXd constant_policy_value(const LinearAtstMdp& m, int action) {
  const int S = m.num_states();
  Eigen::MatrixXd P(S, S);
  Eigen::VectorXd r(S);
  for (int s = 0; s < S; ++s) {
    P.row(s) = m.transition_row(s, action).transpose();
    r[s] = m.reward(s, action);
  }
  return (Eigen::MatrixXd::Identity(S, S) - m.gamma() * P)
      .partialPivLu()
      .solve(r);
}

// brute-force rollout of a burst-indexed sequence policy
double burst_policy_mc(const LinearAtstMdp& m,
                       const std::vector<std::vector<int>>& choice,
                       const std::vector<ActionSequence>& family, int s0,
                       int n_samples, SeededRng& rng) {
  const int T = rollout_horizon(m.gamma(), 1e-8);
  const int levels = static_cast<int>(choice.size());
  double total = 0.0;
  for (int n = 0; n < n_samples; ++n) {
    int bursts = 0, anchor = s0, s = s0, i = 0;
    double disc = 1.0, acc = 0.0;
    for (int t = 0; t < T; ++t) {
      const int u = std::min(bursts, levels - 1);
      const int a = family[choice[u][anchor]].at(i);
      acc += disc * m.reward(s, a);
      const int sp = rng.discrete(m.transition_row(s, a));
      disc *= m.gamma();
      if (rng.bernoulli(m.beta(a))) {
        anchor = sp;
        i = 0;
        ++bursts;
      } else {
        ++i;
      }
      s = sp;
    }
    total += acc;
  }
  return total / n_samples;
}

}  // namespace

TEST_CASE("rollout horizon meets its tail target") {
  for (double gamma : {0.5, 0.8, 0.95})
    for (double tail : {1e-4, 1e-6}) {
      const int T = rollout_horizon(gamma, tail);
      CHECK(std::pow(gamma, T) / (1.0 - gamma) <= tail);
      CHECK(std::pow(gamma, T - 2) / (1.0 - gamma) > tail);
    }
}

TEST_CASE("zero rewards give exactly zero estimates") {
  TabularMdp t;
  t.num_states = 2;
  t.num_actions = 2;
  t.P = {Eigen::MatrixXd::Constant(2, 2, 0.5),
         Eigen::MatrixXd::Constant(2, 2, 0.5)};
  t.r = Eigen::MatrixXd::Zero(2, 2);
  t.gamma = 0.8;
  t.beta = Eigen::VectorXd::Constant(2, 0.5);
  const LinearAtstMdp m = encode_tabular(t);
  const ActionMatrixSet ams = action_matrices(m);
  SeededRng rng(1);
  AugmentedPolicy pi = [](const AugmentedState&) { return 0; };
  const McEstimate k = mc_k_value(m, ams, AugmentedState(0),
                                  ActionSequence({1}), pi, 50, rng);
  CHECK(k.mean == 0.0);
  CHECK(k.std_err == 0.0);
  CHECK(mc_policy_value(m, pi, 1, 50, rng).mean == 0.0);
  CHECK((exact_policy_value(m, ams, pi, 50)).norm() == 0.0);
}

TEST_CASE("always-bursting sequence value is a one-step backup") {
  SeededRng mrng(7);
  const LinearAtstMdp m = make_faulty_channel(
      encode_tabular(random_tabular(3, 2, 0.8, 0.5, 0.5, mrng)), 1.0);
  const ActionMatrixSet ams = action_matrices(m);
  const Eigen::VectorXd v0 = constant_policy_value(m, 0);
  AugmentedPolicy pi = [](const AugmentedState&) { return 0; };
  SeededRng rng(11);
  for (int s = 0; s < 3; ++s) {
    const McEstimate k = mc_k_value(m, ams, AugmentedState(s),
                                    ActionSequence({1, 0}), pi, 40000, rng);
    const double want =
        m.reward(s, 1) + m.gamma() * m.transition_row(s, 1).dot(v0);
    CHECK(std::abs(k.mean - want) <= 4.0 * k.std_err + 1e-4);
  }
}

TEST_CASE("sequence-value estimates agree with the linear form") {
  const LinearAtstMdp m = make_benchmark3();
  const ActionMatrixSet ams = action_matrices(m);
  const PsiEngine eng = PsiEngine::exact(m, ams);
  const Eigen::VectorXd v1 = constant_policy_value(m, 1);
  const Eigen::VectorXd v12 = k_weight_vector(m, v1);
  AugmentedPolicy pi = [](const AugmentedState&) { return 1; };
  SeededRng rng(13);
  for (int trial = 0; trial < 6; ++trial) {
    const int s = trial % 3;
    const ActionSequence seq({trial % 2, (trial / 2) % 2});
    const McEstimate k =
        mc_k_value(m, ams, AugmentedState(s), seq, pi, 40000, rng);
    const double want = eng.psi(s, seq).dot(v12);
    CHECK(std::abs(k.mean - want) <= 4.0 * k.std_err + 1e-4);
  }
}

TEST_CASE("reward and continuation parts split the linear form") {
  const LinearAtstMdp m = make_benchmark3();
  const ActionMatrixSet ams = action_matrices(m);
  const PsiEngine eng = PsiEngine::exact(m, ams);
  const Eigen::VectorXd v0 = constant_policy_value(m, 0);
  Eigen::VectorXd reward_w = k_weight_vector(m, v0);
  Eigen::VectorXd cont_w = reward_w;
  reward_w.tail(m.d()).setZero();
  cont_w.head(m.d()).setZero();
  AugmentedPolicy pi = [](const AugmentedState&) { return 0; };
  SeededRng rng(17);
  const ActionSequence seq({1, 1});
  for (int s = 0; s < 3; ++s) {
    const KValueParts parts =
        mc_k_parts(m, ams, AugmentedState(s), seq, pi, 40000, rng);
    const Eigen::VectorXd psi = eng.psi(s, seq);
    CHECK(std::abs(parts.reward_part.mean - psi.dot(reward_w)) <=
          4.0 * parts.reward_part.std_err + 1e-4);
    CHECK(std::abs(parts.continuation_part.mean - psi.dot(cont_w)) <=
          4.0 * parts.continuation_part.std_err + 1e-4);
  }
}

TEST_CASE("one-state model evaluates to the geometric series") {
  TabularMdp t;
  t.num_states = 1;
  t.num_actions = 1;
  t.P = {Eigen::MatrixXd::Ones(1, 1)};
  t.r = Eigen::MatrixXd::Constant(1, 1, 0.5);
  t.gamma = 0.5;
  t.beta = Eigen::VectorXd::Constant(1, 0.4);
  const LinearAtstMdp m = encode_tabular(t);
  const ActionMatrixSet ams = action_matrices(m);
  AugmentedPolicy pi = [](const AugmentedState&) { return 0; };
  CHECK(exact_policy_value(m, ams, pi, 100)(0) ==
        doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("always-bursting evaluation matches the classical solve") {
  SeededRng mrng(23);
  const LinearAtstMdp m = make_faulty_channel(
      encode_tabular(random_tabular(4, 3, 0.85, 0.5, 0.5, mrng)), 1.0);
  const ActionMatrixSet ams = action_matrices(m);
  AugmentedPolicy pi = [](const AugmentedState& x) { return x.anchor % 3; };
  const int S = 4;
  Eigen::MatrixXd P(S, S);
  Eigen::VectorXd r(S);
  for (int s = 0; s < S; ++s) {
    P.row(s) = m.transition_row(s, s % 3).transpose();
    r[s] = m.reward(s, s % 3);
  }
  const Eigen::VectorXd want =
      (Eigen::MatrixXd::Identity(S, S) - m.gamma() * P).partialPivLu().solve(r);
  const Eigen::VectorXd got = exact_policy_value(m, ams, pi, 250);
  CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("backward evaluation matches rollouts for a depth-aware policy") {
  const LinearAtstMdp m = make_benchmark3();
  const ActionMatrixSet ams = action_matrices(m);
  AugmentedPolicy pi = [](const AugmentedState& x) {
    return (x.anchor + x.depth()) % 2;
  };
  const Eigen::VectorXd exact = exact_policy_value(m, ams, pi, 200);
  SeededRng rng(29);
  for (int s = 0; s < 3; ++s) {
    const McEstimate mc = mc_policy_value(m, pi, s, 60000, rng);
    CHECK(std::abs(mc.mean - exact[s]) <= 4.0 * mc.std_err + 1e-4);
  }
}

TEST_CASE("greedy policy evaluation reaches the optimal values") {
  const LinearAtstMdp m = make_benchmark3();
  const ActionMatrixSet ams = action_matrices(m);
  const int iters = default_planning_iterations(m.gamma());
  const OptimalValues opt = optimal_values(m, ams, iters);
  AugmentedPolicy greedy = [&](const AugmentedState& x) {
    return opt.greedy_action(x);
  };
  const Eigen::VectorXd v_pi = exact_policy_value(m, ams, greedy, 200);
  // v_star is the truncated iterate, a lower bound on the true optimum
  const double tail = std::pow(m.gamma(), iters) / (1.0 - m.gamma());
  for (int s = 0; s < 3; ++s) {
    CHECK(v_pi[s] <= opt.v_star()[s] + tail + 1e-9);
    CHECK(v_pi[s] >= opt.v_star()[s] - 2.0 * tail - 1e-6);
  }
}

TEST_CASE("policies undefined at deep states raise an error") {
  const LinearAtstMdp m = make_benchmark3();
  const ActionMatrixSet ams = action_matrices(m);
  // action 1 keeps the blind branch alive (beta < 1) until the cap bites
  AugmentedPolicy partial = [](const AugmentedState& x) {
    return x.depth() > 2 ? -1 : 1;
  };
  CHECK_THROWS_AS(exact_policy_value(m, ams, partial, 100), DepthExhausted);
}

TEST_CASE("burst-policy evaluator matches the blind-chain recursion") {
  const LinearAtstMdp m = make_benchmark3();
  const ActionMatrixSet ams = action_matrices(m);
  const std::vector<ActionSequence> family = {
      ActionSequence({0, 0}), ActionSequence({0, 1}), ActionSequence({1, 0}),
      ActionSequence({1, 1})};
  const std::vector<std::vector<int>> choice = {{3, 2, 1}};
  const BurstPolicyEvaluator ev(m);
  const Eigen::VectorXd got = ev.evaluate(choice, family);
  AugmentedPolicy pi = [&](const AugmentedState& x) {
    return family[choice[0][x.anchor]].at(x.depth());
  };
  const Eigen::VectorXd want = exact_policy_value(m, ams, pi, 200);
  CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("burst-policy evaluator matches rollouts across levels") {
  const LinearAtstMdp m = make_benchmark3();
  const std::vector<ActionSequence> family = {
      ActionSequence({0, 0}), ActionSequence({0, 1}), ActionSequence({1, 0}),
      ActionSequence({1, 1})};
  // different choices per burst level, stationary from level 3 on
  const std::vector<std::vector<int>> choice = {
      {3, 3, 3}, {1, 2, 0}, {2, 1, 1}};
  const BurstPolicyEvaluator ev(m);
  const Eigen::VectorXd got = ev.evaluate(choice, family);
  SeededRng rng(31);
  for (int s = 0; s < 3; ++s) {
    const double mc = burst_policy_mc(m, choice, family, s, 60000, rng);
    CHECK(std::abs(got[s] - mc) <= 0.03);
  }
}

TEST_CASE("experiment config parsing and validation") {
  const std::string text = R"({
    "model": {"generator": "benchmark3"},
    "episodes": 50,
    "learner": {"H": 3, "rho": 0.1, "search_depth": 2},
    "seeds": [4, 5],
    "out_dir": "/tmp/atst_cfg_test"
  })";
  const ExperimentConfig cfg = ExperimentConfig::from_json(text);
  CHECK(cfg.generator == "benchmark3");
  CHECK(cfg.episodes == 50);
  CHECK(cfg.H == 3);
  CHECK(cfg.rho == doctest::Approx(0.1));
  CHECK(cfg.seeds == std::vector<std::uint64_t>{4, 5});

  // round trip through to_json
  const ExperimentConfig again = ExperimentConfig::from_json(cfg.to_json());
  CHECK(again.episodes == cfg.episodes);
  CHECK(again.rho == doctest::Approx(cfg.rho));
  CHECK(again.out_dir == cfg.out_dir);

  CHECK_THROWS_WITH_AS(ExperimentConfig::from_json("{\"episodes\": 10}"),
                       "model: need exactly one of model.file / model.generator",
                       ConfigError);
  CHECK_THROWS_WITH_AS(
      ExperimentConfig::from_json(
          R"({"model": {"generator": "benchmark3"}, "episodes": "many"})"),
      "episodes: wrong type", ConfigError);
  CHECK_THROWS_WITH_AS(
      ExperimentConfig::from_json(
          R"({"model": {"generator": "benchmark3"},
              "learner": {"strategy": "magic"}})"),
      "learner.strategy: expected auto|exhaustive|beam", ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json("not json"), ConfigError);
}

TEST_CASE("small experiment produces its artifacts") {
  ExperimentConfig cfg;
  cfg.generator = "benchmark3";
  cfg.episodes = 40;
  cfg.H = 3;
  cfg.rho = 0.1;
  cfg.search_depth = 2;
  cfg.seeds = {1, 2};
  cfg.out_dir = "/tmp/atst_eval_exp";
  std::filesystem::remove_all(cfg.out_dir);
  const ExperimentResult res = run_experiment(cfg);
  REQUIRE(res.seeds.size() == 2);
  CHECK(std::filesystem::exists(res.summary_path));
  CHECK(std::filesystem::exists(res.plot_path));
  for (const auto& s : res.seeds) {
    CHECK(std::filesystem::exists(s.csv_path));
    CHECK(s.cumulative_regret >= 0.0);
    CHECK(s.mean_regret_first >= s.mean_regret_last - 1e-9);
  }
  const ActionMatrixSet ams = action_matrices(make_benchmark3());
  const LinearAtstMdp m = make_benchmark3();
  const OptimalValues opt =
      optimal_values(m, ams, default_planning_iterations(0.8));
  CHECK(res.v_star_s1 == doctest::Approx(opt.v_star()[0]).epsilon(1e-9));
  // the learner's regret rows never exceed the value scale
  std::ifstream csv(res.seeds[0].csv_path);
  std::string header;
  std::getline(csv, header);
  CHECK(header ==
        "episode,realized_reward,V_star_s1,V_pik_s1,regret_contrib,"
        "planning_ms,opt_nodes");
}

TEST_CASE("estimated-mode experiment certifies its feature map") {
  ExperimentConfig cfg;
  cfg.generator = "benchmark3";
  cfg.episodes = 20;
  cfg.H = 3;
  cfg.rho = 0.1;
  cfg.search_depth = 2;
  cfg.engine_mode = "estimated";
  cfg.estimation_n = 20000;
  cfg.beta_known = false;
  cfg.seeds = {3};
  cfg.out_dir = "/tmp/atst_eval_est";
  std::filesystem::remove_all(cfg.out_dir);
  const ExperimentResult res = run_experiment(cfg);
  CHECK_FALSE(res.admissibility_summary.empty());
  CHECK(res.admissibility_summary.find("PASS") != std::string::npos);
}
