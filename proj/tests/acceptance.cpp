// Acceptance suite: one line per criterion, exit code = number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "atst/belief.hpp"
#include "atst/errors.hpp"
#include "atst/eval.hpp"
#include "atst/learner.hpp"
#include "atst/model.hpp"
#include "atst/offpolicy.hpp"
#include "atst/psi.hpp"
#include "atst/rng.hpp"
#include "atst/sim.hpp"

using namespace atst;

namespace {

int failures = 0;
std::chrono::steady_clock::time_point t_start;

void begin() { t_start = std::chrono::steady_clock::now(); }

void report(int idx, const char* what, bool ok, const std::string& detail) {
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  std::printf("criterion %2d %s — %s (%s; %.1fs)\n", idx,
              ok ? "PASS" : "FAIL", what, detail.c_str(), secs);
  if (!ok) ++failures;
}

std::string fmt(const char* pattern, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, pattern, a, b);
  return buf;
}

// --- criterion 1: belief against brute-force chained sums -------------------

void criterion1() {
  begin();
  SeededRng rng(1001);
  double worst = 0.0;
  const int dims[3][2] = {{4, 3}, {5, 2}, {3, 3}};
  for (const auto& sa : dims) {
    const TabularMdp tab =
        random_tabular(sa[0], sa[1], 0.85, 0.1, 0.9, rng);
    const LinearAtstMdp m = encode_tabular(tab);
    const ActionMatrixSet ams = action_matrices(m);
    for (const AugmentedState& x :
         enumerate_augmented_states(sa[0], sa[1], 5)) {
      if (x.depth() == 0) continue;  // point mass by definition
      // chained sums over the raw tabular kernel
      Eigen::VectorXd p = Eigen::VectorXd::Zero(sa[0]);
      p[x.anchor] = 1.0;
      for (int a : x.tail) p = tab.P[a].transpose() * p;
      worst = std::max(worst,
                       (belief(m, ams, x) - p).cwiseAbs().sum());
    }
  }
  report(1, "belief matches brute-force chained sums (depth <= 5)",
         worst <= 1e-10, fmt("max l1 error %.2e", worst));
}

// --- criterion 2: feature and weight-vector norm bounds ---------------------

void criterion2() {
  begin();
  SeededRng rng(1002);
  double worst_psi = 0.0, worst_excess = 0.0;
  for (int model = 0; model < 5; ++model) {
    const int S = 3 + model % 3, A = 2 + model % 2;
    const LinearAtstMdp m = encode_tabular(
        random_tabular(S, A, 0.7 + 0.05 * model, 0.0, 1.0, rng));
    const ActionMatrixSet ams = action_matrices(m);
    const PsiEngine eng = PsiEngine::exact(m, ams);
    for (int i = 0; i < 2000; ++i) {
      AugmentedState x(rng.uniform_int(S));
      const int depth = rng.uniform_int(5);
      for (int k = 0; k < depth; ++k) x = x.append(rng.uniform_int(A));
      std::vector<int> prefix(1 + rng.uniform_int(6));
      for (auto& a : prefix) a = rng.uniform_int(A);
      worst_psi = std::max(worst_psi,
                           eng.psi(x, ActionSequence(prefix)).norm());
    }
    const double vmax = 1.0 / (1.0 - m.gamma());
    const double vbound =
        4.0 * std::sqrt(static_cast<double>(m.d())) / (1.0 - m.gamma());
    for (int i = 0; i < 50; ++i) {
      Eigen::VectorXd v(S);
      for (int s = 0; s < S; ++s) v[s] = rng.uniform() * vmax;
      worst_excess =
          std::max(worst_excess, k_weight_vector(m, v).norm() - vbound);
    }
  }
  report(2, "psi and weight-vector norm bounds over 10^4 samples",
         worst_psi <= 1.0 + 1e-6 && worst_excess <= 1e-9,
         fmt("max ||psi|| %.9f, weight excess %.2e", worst_psi, worst_excess));
}

// --- criterion 3: gamma-contraction of the planning operator ----------------

void criterion3() {
  begin();
  const LinearAtstMdp m = make_benchmark3();
  const ActionMatrixSet ams = action_matrices(m);
  const double vmax = 1.0 / (1.0 - m.gamma());
  const auto states = enumerate_augmented_states(3, 2, 4);
  SeededRng rng(1003);
  double worst_excess = -1.0;
  for (int pair = 0; pair < 100; ++pair) {
    ValueTable u, v;
    u.depth_cap = v.depth_cap = 4;
    for (const auto& x : states) {
      u.values[x] = rng.uniform() * vmax;
      v.values[x] = rng.uniform() * vmax;
    }
    double in_diff = 0.0;
    for (const auto& x : states)
      in_diff = std::max(in_diff, std::abs(u.values[x] - v.values[x]));
    const ValueTable tu = bellman_operator(m, ams, u);
    const ValueTable tv = bellman_operator(m, ams, v);
    double out_diff = 0.0;
    for (const auto& [x, val] : tu.values)
      out_diff = std::max(out_diff, std::abs(val - tv.values.at(x)));
    worst_excess =
        std::max(worst_excess, out_diff - m.gamma() * in_diff);
  }
  report(3, "one-step planning operator is a gamma-contraction",
         worst_excess <= 1e-12, fmt("max excess %.2e", worst_excess));
}

// --- criterion 4: linearity of sequence values in psi -----------------------

void criterion4() {
  begin();
  const LinearAtstMdp m = make_benchmark3();
  const ActionMatrixSet ams = action_matrices(m);
  const PsiEngine eng = PsiEngine::exact(m, ams);
  const BurstPolicyEvaluator beval(m);
  const std::vector<ActionSequence> family = {
      ActionSequence({0, 0}), ActionSequence({0, 1}), ActionSequence({1, 0}),
      ActionSequence({1, 1})};
  SeededRng rng(1004);
  int within = 0;
  double worst_sigma = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int s = rng.uniform_int(3);
    std::vector<int> prefix(1 + rng.uniform_int(4));
    for (auto& a : prefix) a = rng.uniform_int(2);
    const ActionSequence seq(prefix);
    // random per-anchor sequence policy; its value feeds the weight vector
    std::vector<int> choice(3);
    for (auto& c : choice) c = rng.uniform_int(4);
    const Eigen::VectorXd v_pi = beval.evaluate({choice}, family);
    AugmentedPolicy pi = [&](const AugmentedState& x) {
      return family[choice[x.anchor]].at(x.depth());
    };
    const double want = eng.psi(s, seq).dot(k_weight_vector(m, v_pi));
    const McEstimate mc =
        mc_k_value(m, ams, AugmentedState(s), seq, pi, 100000, rng);
    const double sigmas =
        std::abs(mc.mean - want) / std::max(mc.std_err, 1e-12);
    worst_sigma = std::max(worst_sigma, sigmas);
    if (sigmas <= 3.0) ++within;
  }
  report(4, "sequence values match the linear form within 3 sigma (>=19/20)",
         within >= 19, fmt("%.0f/20 within, worst %.2f sigma",
                           static_cast<double>(within), worst_sigma));
}

// --- criterion 5: estimation-error propagation ------------------------------

void criterion5() {
  begin();
  const LinearAtstMdp m = make_benchmark3();
  const ActionMatrixSet ams = action_matrices(m);
  const PsiEngine eng = PsiEngine::exact(m, ams);
  const double sqrt_d = std::sqrt(static_cast<double>(m.d()));
  SeededRng rng(1005);
  bool ok = true;
  std::string detail;
  for (double eps : {0.01, 0.02})
    for (double eps_beta : {0.0, 0.05}) {
      std::vector<Eigen::MatrixXd> m_hat = ams.matrices;
      for (auto& mat : m_hat) {
        Eigen::MatrixXd g(m.d(), m.d());
        for (int i = 0; i < m.d(); ++i)
          for (int c = 0; c < m.d(); ++c) g(i, c) = rng.uniform() - 0.5;
        mat += g * (eps / operator_norm_2(g));
      }
      Eigen::VectorXd beta_hat = m.beta_vector();
      beta_hat[0] -= eps_beta;
      beta_hat[1] += eps_beta;
      const PsiEngine raw = PsiEngine::estimated_raw(m, m_hat, beta_hat);
      const double level = m.d() * (eps + eps_beta / sqrt_d) /
                           (1.0 - m.gamma());
      double sup = 0.0;
      for (int i = 0; i < 500; ++i) {
        const int s = rng.uniform_int(3);
        std::vector<int> prefix(1 + rng.uniform_int(8));
        for (auto& a : prefix) a = rng.uniform_int(2);
        sup = std::max(sup, (raw.psi(s, ActionSequence(prefix)) -
                             eng.psi(s, ActionSequence(prefix)))
                                .norm());
      }
      const double bound = 16.0 * level + 2.0 * eng.series().tail_bound;
      const PsiEngine norm =
          build_estimated(m, m_hat, beta_hat, eps, eps_beta);
      SeededRng check_rng(77);
      const AdmissibilityReport rep =
          check_admissible(norm, eng, 32.0 * level, 300, check_rng);
      if (sup > bound || !rep.pass()) {
        ok = false;
        detail = fmt("violated at eps=%.2f", eps, 0.0) +
                 fmt(" eps_beta=%.2f", eps_beta, 0.0);
      }
    }
  if (ok) detail = "raw sup within 16d(eps+eps_b/sqrt(d))/(1-g); normalized admissible";
  report(5, "estimation-error propagation bound and admissibility", ok, detail);
}

// --- criterion 6: ridge-regression convergence rate -------------------------

void criterion6() {
  begin();
  TabularMdp t;
  t.num_states = 2;
  t.num_actions = 2;
  t.P = {Eigen::MatrixXd(2, 2), Eigen::MatrixXd(2, 2)};
  t.P[0] << 0.7, 0.3, 0.2, 0.8;
  t.P[1] << 0.5, 0.5, 0.9, 0.1;
  t.r = Eigen::MatrixXd::Constant(2, 2, 0.5);
  t.gamma = 0.9;
  t.beta = Eigen::VectorXd::Constant(2, 0.5);
  const LinearAtstMdp m = encode_tabular(t);  // uniform cells: lambda_min 0.25
  const ActionMatrixSet ams = action_matrices(m);
  const Eigen::VectorXd unif = Eigen::VectorXd::Constant(4, 0.25);

  auto med_err = [&](int n, int seed_base) {
    std::vector<double> errs;
    for (int seed = 0; seed < 20; ++seed) {
      SeededRng rng(seed_base + seed);
      const auto est =
          ridge_action_matrices(sample_dataset(m, unif, n, rng), m, 1.0);
      double e = 0.0;
      for (int a = 0; a < 2; ++a)
        e = std::max(e, operator_norm_2(est[a] - ams[a]));
      errs.push_back(e);
    }
    std::sort(errs.begin(), errs.end());
    return 0.5 * (errs[9] + errs[10]);
  };
  const double coarse = med_err(16384, 6100);
  const double fine = med_err(65536, 6200);
  report(6, "ridge error shrinks at the root-N rate (median ratio <= 0.7)",
         fine <= 0.7 * coarse,
         fmt("median %.2e -> %.2e", coarse, fine));
}

// --- criterion 7: burst-probability concentration ---------------------------

void criterion7() {
  begin();
  const LinearAtstMdp m = make_benchmark3();
  const int A = m.num_actions();
  const double p = 0.05;
  const int n = 2000;
  const double p_min = 0.5;  // uniform over cells
  const double bound = std::sqrt(12.0 * std::log(3.0 * A / p) / (n * p_min));
  const Eigen::VectorXd unif = Eigen::VectorXd::Constant(6, 1.0 / 6.0);
  int hold = 0;
  for (int trial = 0; trial < 200; ++trial) {
    SeededRng rng(7000 + trial);
    const BetaEstimate be = empirical_beta(sample_dataset(m, unif, n, rng));
    if ((be.beta_hat - m.beta_vector()).cwiseAbs().maxCoeff() <= bound) ++hold;
  }
  report(7, "empirical burst probabilities concentrate (>=90% of 200 trials)",
         hold >= 180, fmt("bound %.4f held in %.0f/200", bound,
                          static_cast<double>(hold)));
}

// --- criterion 8: reduction to single-step LSVI-UCB when beta == 1 ----------

// Independent single-step LSVI-UCB over (state, action) with features
// f(s,a) = [ (1-g)/2 phi ; g/2 phi ], coded without the sequence machinery.
struct ShadowLsvi {
  const LinearAtstMdp& m;
  LearnerConfig cfg;
  double vmax;
  std::vector<Eigen::VectorXd> feats;  // per cell s*A+a
  struct Row {
    int s, a, next;
    double r;
  };
  std::vector<Row> hist;
  std::vector<Eigen::VectorXd> w;  // u = 1..H-1
  Eigen::LLT<Eigen::MatrixXd> llt;

  ShadowLsvi(const LinearAtstMdp& mdp, LearnerConfig c) : m(mdp), cfg(c) {
    vmax = 1.0 / (1.0 - m.gamma());
    const int A = m.num_actions();
    for (int s = 0; s < m.num_states(); ++s)
      for (int a = 0; a < A; ++a) {
        Eigen::VectorXd f(2 * m.d());
        f.head(m.d()) = 0.5 * (1.0 - m.gamma()) * m.phi(s, a);
        f.tail(m.d()) = 0.5 * m.gamma() * m.phi(s, a);
        feats.push_back(f);
      }
  }
  const Eigen::VectorXd& f(int s, int a) const {
    return feats[s * m.num_actions() + a];
  }
  double score(const Eigen::VectorXd& x, const Eigen::VectorXd& wu) const {
    double b = 0.0;
    if (cfg.rho != 0.0) b = cfg.rho * std::sqrt(x.dot(llt.solve(x)));
    return std::min(vmax, x.dot(wu) + b);
  }
  void plan() {
    const int twod = 2 * m.d();
    Eigen::MatrixXd gram =
        cfg.lambda * Eigen::MatrixXd::Identity(twod, twod);
    for (const Row& r : hist)
      gram.noalias() += f(r.s, r.a) * f(r.s, r.a).transpose();
    llt.compute(gram);
    w.assign(cfg.H - 1, Eigen::VectorXd::Zero(twod));
    Eigen::VectorXd next = Eigen::VectorXd::Constant(m.num_states(), vmax);
    for (int u = cfg.H - 1; u >= 1; --u) {
      Eigen::VectorXd b = Eigen::VectorXd::Zero(twod);
      for (const Row& r : hist)
        b.noalias() +=
            f(r.s, r.a) * (r.r + (r.next == kTerminal ? 0.0 : next[r.next]));
      w[u - 1] = llt.solve(b);
      for (int s = 0; s < m.num_states(); ++s) {
        double best = -1.0;
        int unused = 0;
        (void)unused;
        for (int a = 0; a < m.num_actions(); ++a)
          best = std::max(best, score(f(s, a), w[u - 1]));
        next[s] = best;
      }
    }
  }
  int select(int u, int s) const {
    u = std::min(u, cfg.H - 1);
    double best = -1.0;
    int best_a = 0;
    for (int a = 0; a < m.num_actions(); ++a) {
      const double v = score(f(s, a), w[u - 1]);
      if (v > best) {
        best = v;
        best_a = a;
      }
    }
    return best_a;
  }
};

void criterion8() {
  begin();
  const LinearAtstMdp m = make_faulty_channel(make_benchmark3(), 1.0);
  const ActionMatrixSet ams = action_matrices(m);
  const PsiEngine eng = PsiEngine::exact(m, ams);
  LearnerConfig cfg;
  cfg.H = 5;
  cfg.rho = 0.1;
  cfg.search_depth = 2;
  cfg.strategy = SearchStrategy::kExhaustive;

  struct Decision {
    int episode, burst_index, state, seq_index;
  };
  std::vector<Decision> decisions;
  DecisionObserver obs = [&](int episode, int burst_index, int state,
                             int seq_index) {
    decisions.push_back({episode, burst_index, state, seq_index});
  };
  SeededRng rng(8001);
  const int K = 200;
  const LearningResult res =
      run_learning(m, eng, K, {0, 1, 2}, cfg, rng, nullptr, &obs);

  // replay against the independent single-step learner on the same history
  ShadowLsvi shadow(m, cfg);
  std::size_t cursor = 0;
  int checked = 0, mismatches = 0;
  const int A = m.num_actions();
  for (int k = 0; k < K; ++k) {
    shadow.plan();
    const auto& bursts = res.transcripts[k].bursts;
    for (std::size_t i = 0; i < bursts.size(); ++i) {
      const Decision& dec = decisions[cursor++];
      const int first_action = dec.seq_index / A;  // lexicographic family, L=2
      const int u = std::min(dec.burst_index + 1, cfg.H - 1);
      ++checked;
      if (shadow.select(u, dec.state) != first_action) ++mismatches;
      if (static_cast<int>(i) < cfg.H)
        shadow.hist.push_back({dec.state, first_action,
                               bursts[i].next_observed,
                               std::min(bursts[i].aggregated_reward,
                                        static_cast<double>(cfg.H))});
    }
  }
  report(8, "always-burst learner reduces to single-step LSVI-UCB",
         mismatches == 0 && cursor == decisions.size() && checked > 0,
         fmt("%.0f decisions, %.0f mismatches", static_cast<double>(checked),
             static_cast<double>(mismatches)));
}

// --- criterion 9: empirical regret decay on the benchmark -------------------

void criterion9() {
  begin();
  ExperimentConfig cfg;
  cfg.generator = "benchmark3";
  cfg.episodes = 2000;
  cfg.rho = 0.2;
  cfg.search_depth = 4;
  cfg.seeds = {1, 2, 3, 4, 5};
  cfg.out_dir = "acceptance_out";
  std::filesystem::remove_all(cfg.out_dir);
  const ExperimentResult res = run_experiment(cfg);
  report(9,
         "tail regret halves on >=4/5 seeds and every seed is sublinear "
         "(K = 2000)",
         res.halved_count >= 4 && res.sublinear_all,
         fmt("halved %.0f/5, sublinear_all %.0f",
             static_cast<double>(res.halved_count),
             res.sublinear_all ? 1.0 : 0.0));
}

// --- criterion 10: example constructions ------------------------------------

void criterion10() {
  begin();
  SeededRng rng(1010);
  const LinearAtstMdp base =
      encode_tabular(random_tabular(3, 2, 0.85, 0.2, 0.8, rng));
  double worst = 0.0;
  bool ok = true;
  try {
    const double c_max = 0.7;
    Eigen::MatrixXd cost(3, 2);
    for (int s = 0; s < 3; ++s)
      for (int a = 0; a < 2; ++a) cost(s, a) = rng.uniform() * c_max;
    const LinearAtstMdp paid = make_paid_observations(base, cost, c_max);
    paid.validate();
    for (int s = 0; s < 3; ++s)
      for (int a = 0; a < 2; ++a) {
        const double blind =
            (base.reward(s, a) + c_max) / (1.0 + c_max);
        const double observing =
            (base.reward(s, a) - cost(s, a) + c_max) / (1.0 + c_max);
        worst = std::max(worst,
                         std::abs(paid.reward(s, 2 * a) - blind));
        worst = std::max(worst,
                         std::abs(paid.reward(s, 2 * a + 1) - observing));
        worst = std::max(worst, (paid.transition_row(s, 2 * a) -
                                 base.transition_row(s, a))
                                    .cwiseAbs()
                                    .maxCoeff());
        if (paid.beta(2 * a) != 0.0 || paid.beta(2 * a + 1) != 1.0) ok = false;
      }

    Eigen::VectorXd reset(3);
    reset << 0.2, 0.5, 0.3;
    const LinearAtstMdp rst = make_reset_to_observe(base, reset);
    rst.validate();
    const int astar = rst.num_actions() - 1;
    for (int s = 0; s < 3; ++s) {
      worst = std::max(worst, (rst.transition_row(s, astar) - reset)
                                  .cwiseAbs()
                                  .maxCoeff());
      for (int a = 0; a < 2; ++a) {
        worst = std::max(worst,
                         std::abs(rst.reward(s, a) - base.reward(s, a)));
        if (rst.beta(a) != 0.0) ok = false;
      }
    }
    if (rst.beta(astar) != 1.0) ok = false;
  } catch (const std::exception&) {
    ok = false;
  }
  report(10, "observation-control constructions reproduce their formulas",
         ok && worst <= 1e-12, fmt("max deviation %.2e", worst));
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  criterion9();
  criterion10();
  if (failures == 0)
    std::printf("all 10 acceptance criteria passed\n");
  else
    std::printf("%d acceptance criteria FAILED\n", failures);
  return failures;
}
