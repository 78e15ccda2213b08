#include "atst/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "atst/errors.hpp"
#include "atst/sim.hpp"

namespace atst {

namespace {

McEstimate summarize(const std::vector<double>& xs) {
  McEstimate out;
  out.n_samples = static_cast<int>(xs.size());
  if (out.n_samples < 2)
    throw std::invalid_argument("McEstimate needs at least 2 samples");
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / out.n_samples;
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.std_err = std::sqrt(ss / (out.n_samples - 1)) / std::sqrt(out.n_samples);
  return out;
}

int checked_action(const AugmentedPolicy& pi, const AugmentedState& x, int A) {
  const int a = pi(x);
  if (a < 0 || a >= A)
    throw DepthExhausted("policy undefined at queried augmented state");
  return a;
}

// One K^pi rollout; returns (pre-burst reward, post-burst continuation).
std::pair<double, double> k_rollout(const LinearAtstMdp& mdp,
                                    const ActionMatrixSet& ams,
                                    const AugmentedState& x,
                                    const ActionSequence& seq,
                                    const AugmentedPolicy& pi, int horizon,
                                    SeededRng& rng) {
  const int A = mdp.num_actions();
  int s = x.depth() == 0 ? x.anchor : rng.discrete(belief(mdp, ams, x));
  double disc = 1.0;
  double pre = 0.0;
  int h = 0;
  int revealed = kTerminal;
  for (int i = 0; h < horizon; ++i, ++h) {
    const int a = seq.at(i);
    pre += disc * mdp.reward(s, a);
    const int sp = rng.discrete(mdp.transition_row(s, a));
    disc *= mdp.gamma();
    s = sp;
    if (rng.bernoulli(mdp.beta(a))) {
      revealed = sp;
      break;
    }
  }
  double post = 0.0;
  if (revealed != kTerminal) {
    AugmentedState xc(revealed);
    ++h;  // the loop above broke before advancing h past the burst round
    for (; h < horizon; ++h) {
      const int a = checked_action(pi, xc, A);
      post += disc * mdp.reward(s, a);
      const int sp = rng.discrete(mdp.transition_row(s, a));
      disc *= mdp.gamma();
      xc = rng.bernoulli(mdp.beta(a)) ? AugmentedState(sp) : xc.append(a);
      s = sp;
    }
  }
  return {pre, post};
}

}  // namespace

int rollout_horizon(double gamma, double tail) {
  return static_cast<int>(
             std::ceil(std::log(tail * (1.0 - gamma)) / std::log(gamma))) +
         1;
}

McEstimate mc_k_value(const LinearAtstMdp& mdp, const ActionMatrixSet& ams,
                      const AugmentedState& x, const ActionSequence& seq,
                      const AugmentedPolicy& pi, int n_samples,
                      SeededRng& rng) {
  const int T = rollout_horizon(mdp.gamma());
  std::vector<double> xs(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    const auto [pre, post] = k_rollout(mdp, ams, x, seq, pi, T, rng);
    xs[i] = pre + post;
  }
  return summarize(xs);
}

KValueParts mc_k_parts(const LinearAtstMdp& mdp, const ActionMatrixSet& ams,
                       const AugmentedState& x, const ActionSequence& seq,
                       const AugmentedPolicy& pi, int n_samples,
                       SeededRng& rng) {
  const int T = rollout_horizon(mdp.gamma());
  std::vector<double> pres(n_samples), posts(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    const auto [pre, post] = k_rollout(mdp, ams, x, seq, pi, T, rng);
    pres[i] = pre;
    posts[i] = post;
  }
  return {summarize(pres), summarize(posts)};
}

McEstimate mc_policy_value(const LinearAtstMdp& mdp, const AugmentedPolicy& pi,
                           int s0, int n_samples, SeededRng& rng) {
  const int A = mdp.num_actions();
  const int T = rollout_horizon(mdp.gamma());
  std::vector<double> xs(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    int s = s0;
    AugmentedState x(s0);
    double disc = 1.0;
    double total = 0.0;
    for (int h = 0; h < T; ++h) {
      const int a = checked_action(pi, x, A);
      total += disc * mdp.reward(s, a);
      const int sp = rng.discrete(mdp.transition_row(s, a));
      disc *= mdp.gamma();
      x = rng.bernoulli(mdp.beta(a)) ? AugmentedState(sp) : x.append(a);
      s = sp;
    }
    xs[i] = total;
  }
  return summarize(xs);
}

Eigen::VectorXd exact_policy_value(const LinearAtstMdp& mdp,
                                   const ActionMatrixSet& ams,
                                   const AugmentedPolicy& pi, int horizon) {
  (void)ams;
  if (horizon < 1) throw DepthExhausted("exact_policy_value: horizon < 1");
  const int S = mdp.num_states();
  const int A = mdp.num_actions();
  const double gamma = mdp.gamma();

  std::vector<Eigen::MatrixXd> P(A, Eigen::MatrixXd(S, S));
  for (int a = 0; a < A; ++a)
    for (int s = 0; s < S; ++s)
      P[a].row(s) = mdp.transition_row(s, a).transpose();

  // Under a fixed policy the blind branch from each anchor is a single
  // chain; precompute its actions, hidden-state marginals, and rewards.
  struct Chain {
    std::vector<int> actions;
    std::vector<Eigen::VectorXd> p;  // p[i]: marginal before action i
    std::vector<double> reward;
  };
  std::vector<Chain> chains(S);
  for (int s = 0; s < S; ++s) {
    Chain& c = chains[s];
    AugmentedState x(s);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(S);
    p[s] = 1.0;
    double w = 1.0;
    for (int i = 0; i < horizon && w > 1e-300; ++i) {
      const int a = checked_action(pi, x, A);
      c.actions.push_back(a);
      c.p.push_back(p);
      double r = 0.0;
      for (int t = 0; t < S; ++t) r += p[t] * mdp.reward(t, a);
      c.reward.push_back(r);
      p = P[a].transpose() * p;
      w *= gamma * mdp.beta_bar(a);
      x = x.append(a);
    }
    c.p.push_back(p);  // marginal after the last expanded action
  }

  std::vector<Eigen::VectorXd> sv(horizon + 1, Eigen::VectorXd::Zero(S));
  for (int t = 1; t <= horizon; ++t) {
    for (int s = 0; s < S; ++s) {
      const Chain& c = chains[s];
      double acc = 0.0;
      double w = 1.0;  // gamma^i * prod_{j<i} beta_bar
      const int steps = std::min<int>(t, static_cast<int>(c.actions.size()));
      for (int i = 0; i < steps && w > 1e-300; ++i) {
        const int a = c.actions[i];
        acc += w * (c.reward[i] +
                    gamma * mdp.beta(a) * c.p[i + 1].dot(sv[t - 1 - i]));
        w *= gamma * mdp.beta_bar(a);
      }
      sv[t][s] = acc;
    }
  }
  return sv[horizon];
}

BurstPolicyEvaluator::BurstPolicyEvaluator(const LinearAtstMdp& mdp,
                                           double tail_eps)
    : mdp_(mdp) {
  const int S = mdp.num_states();
  const int A = mdp.num_actions();
  P_.assign(A, Eigen::MatrixXd(S, S));
  for (int a = 0; a < A; ++a)
    for (int s = 0; s < S; ++s)
      P_[a].row(s) = mdp.transition_row(s, a).transpose();
  const double g = mdp.gamma();
  chain_len_ = static_cast<int>(
                   std::ceil(std::log(tail_eps * (1.0 - g)) / std::log(g))) +
               1;
  chain_len_ = std::min(chain_len_, 100000);
}

const BurstPolicyEvaluator::ChainRow& BurstPolicyEvaluator::row(
    int s, int j, const std::vector<ActionSequence>& family) const {
  const auto key = std::make_pair(s, j);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;

  const int S = mdp_.num_states();
  const ActionSequence& seq = family[static_cast<std::size_t>(j)];
  ChainRow out;
  out.B = Eigen::RowVectorXd::Zero(S);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(S);
  p[s] = 1.0;
  double w = 1.0;  // gamma^i * prod_{j<i} beta_bar
  for (int i = 0; i < chain_len_ && w > 1e-300; ++i) {
    const int a = seq.at(i);
    double r = 0.0;
    for (int t = 0; t < S; ++t) r += p[t] * mdp_.reward(t, a);
    out.c += w * r;
    p = P_[a].transpose() * p;
    out.B += w * mdp_.gamma() * mdp_.beta(a) * p.transpose();
    w *= mdp_.gamma() * mdp_.beta_bar(a);
  }
  return cache_.emplace(key, std::move(out)).first->second;
}

Eigen::VectorXd BurstPolicyEvaluator::evaluate(
    const std::vector<std::vector<int>>& choice,
    const std::vector<ActionSequence>& family) const {
  if (choice.empty())
    throw std::invalid_argument("evaluate: empty choice table");
  const int S = mdp_.num_states();
  const int levels = static_cast<int>(choice.size());

  // stationary tail: every burst from level `levels` on reuses its choices
  Eigen::MatrixXd B(S, S);
  Eigen::VectorXd c(S);
  for (int s = 0; s < S; ++s) {
    const ChainRow& r = row(s, choice[levels - 1][s], family);
    B.row(s) = r.B;
    c[s] = r.c;
  }
  Eigen::VectorXd w =
      (Eigen::MatrixXd::Identity(S, S) - B).partialPivLu().solve(c);

  for (int u = levels - 2; u >= 0; --u) {
    Eigen::VectorXd next(S);
    for (int s = 0; s < S; ++s) {
      const ChainRow& r = row(s, choice[u][s], family);
      next[s] = r.c + r.B.dot(w);
    }
    w = std::move(next);
  }
  return w;
}

// ---------------------------------------------------------------------------

using nlohmann::json;

namespace {

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(std::string(key) + ": wrong type");
    }
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig cfg;
  if (j.contains("model")) {
    const json& m = j["model"];
    read_field(m, "file", cfg.model_file);
    read_field(m, "generator", cfg.generator);
    read_field(m, "seed", cfg.model_seed);
    read_field(m, "states", cfg.gen_states);
    read_field(m, "actions", cfg.gen_actions);
    read_field(m, "gamma", cfg.gen_gamma);
    read_field(m, "beta_min", cfg.gen_beta_min);
    read_field(m, "beta_max", cfg.gen_beta_max);
  }
  read_field(j, "episodes", cfg.episodes);
  read_field(j, "confidence", cfg.confidence);
  if (j.contains("learner")) {
    const json& l = j["learner"];
    read_field(l, "H", cfg.H);
    read_field(l, "lambda", cfg.lambda);
    read_field(l, "rho", cfg.rho);
    read_field(l, "c_rho", cfg.c_rho);
    read_field(l, "search_depth", cfg.search_depth);
    read_field(l, "strategy", cfg.strategy);
    read_field(l, "beam_width", cfg.beam_width);
  }
  if (j.contains("engine")) {
    const json& e = j["engine"];
    read_field(e, "mode", cfg.engine_mode);
    read_field(e, "n", cfg.estimation_n);
    read_field(e, "beta_known", cfg.beta_known);
  }
  read_field(j, "seeds", cfg.seeds);
  read_field(j, "initial_schedule", cfg.initial_schedule);
  read_field(j, "out_dir", cfg.out_dir);
  read_field(j, "eval_horizon", cfg.eval_horizon);
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["model"] = json::object();
  if (!model_file.empty()) j["model"]["file"] = model_file;
  if (!generator.empty()) {
    j["model"]["generator"] = generator;
    j["model"]["seed"] = model_seed;
    if (generator == "random") {
      j["model"]["states"] = gen_states;
      j["model"]["actions"] = gen_actions;
      j["model"]["gamma"] = gen_gamma;
      j["model"]["beta_min"] = gen_beta_min;
      j["model"]["beta_max"] = gen_beta_max;
    }
  }
  j["episodes"] = episodes;
  j["confidence"] = confidence;
  j["learner"] = {{"H", H},
                  {"lambda", lambda},
                  {"rho", rho},
                  {"c_rho", c_rho},
                  {"search_depth", search_depth},
                  {"strategy", strategy},
                  {"beam_width", beam_width}};
  j["engine"] = {{"mode", engine_mode},
                 {"n", estimation_n},
                 {"beta_known", beta_known}};
  j["seeds"] = seeds;
  j["initial_schedule"] = initial_schedule;
  j["out_dir"] = out_dir;
  j["eval_horizon"] = eval_horizon;
  return j.dump(2);
}

void ExperimentConfig::validate() const {
  if (model_file.empty() == generator.empty())
    throw ConfigError("model: need exactly one of model.file / model.generator");
  if (!generator.empty() && generator != "benchmark3" && generator != "random")
    throw ConfigError("model.generator: unknown generator '" + generator + "'");
  if (episodes < 1) throw ConfigError("episodes: must be >= 1");
  if (confidence <= 0.0 || confidence >= 1.0)
    throw ConfigError("confidence: must lie in (0,1)");
  if (lambda <= 0.0) throw ConfigError("learner.lambda: must be positive");
  if (search_depth < 1) throw ConfigError("learner.search_depth: must be >= 1");
  if (beam_width < 1) throw ConfigError("learner.beam_width: must be >= 1");
  if (strategy != "auto" && strategy != "exhaustive" && strategy != "beam")
    throw ConfigError("learner.strategy: expected auto|exhaustive|beam");
  if (H != 0 && H < 2) throw ConfigError("learner.H: must be 0 (auto) or >= 2");
  if (engine_mode != "exact" && engine_mode != "estimated")
    throw ConfigError("engine.mode: expected exact|estimated");
  if (estimation_n < 0) throw ConfigError("engine.n: must be >= 0");
  if (seeds.empty()) throw ConfigError("seeds: need at least one seed");
  if (eval_horizon < 0) throw ConfigError("eval_horizon: must be >= 0");
  for (int s : initial_schedule)
    if (s < 0) throw ConfigError("initial_schedule: negative state index");
}

LearnerConfig ExperimentConfig::learner_config(double gamma, int d) const {
  LearnerConfig cfg = LearnerConfig::default_schedule(episodes, gamma, d,
                                                      confidence, c_rho,
                                                      search_depth);
  if (H != 0) cfg.H = H;
  if (rho >= 0.0) cfg.rho = rho;
  cfg.lambda = lambda;
  cfg.beam_width = beam_width;
  if (strategy == "exhaustive") cfg.strategy = SearchStrategy::kExhaustive;
  if (strategy == "beam") cfg.strategy = SearchStrategy::kBeam;
  return cfg;
}

void write_regret_svg(const std::vector<std::vector<double>>& cumulative,
                      const std::vector<std::uint64_t>& seeds,
                      const std::string& path) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#9467bd", "#ff7f0e", "#8c564b"};
  const double W = 640, Hpx = 400, ml = 60, mr = 20, mt = 20, mb = 40;
  double ymax = 1e-9;
  std::size_t kmax = 1;
  for (const auto& c : cumulative) {
    if (!c.empty()) ymax = std::max(ymax, c.back());
    kmax = std::max(kmax, c.size());
  }
  ymax *= 1.05;

  std::ofstream out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
      << "\" height=\"" << Hpx << "\" viewBox=\"0 0 " << W << ' ' << Hpx
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << Hpx - mb << "\" x2=\"" << W - mr
      << "\" y2=\"" << Hpx - mb << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
      << "\" y2=\"" << Hpx - mb << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << (W - mr + ml) / 2 << "\" y=\"" << Hpx - 8
      << "\" font-size=\"13\" text-anchor=\"middle\">episode</text>\n";
  out << "<text x=\"14\" y=\"" << (Hpx - mb + mt) / 2
      << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << (Hpx - mb + mt) / 2 << ")\">cumulative regret</text>\n";
  out << "<text x=\"" << ml << "\" y=\"" << Hpx - mb + 16
      << "\" font-size=\"11\">0</text>\n";
  out << "<text x=\"" << W - mr << "\" y=\"" << Hpx - mb + 16
      << "\" font-size=\"11\" text-anchor=\"end\">" << kmax << "</text>\n";
  out << "<text x=\"" << ml - 6 << "\" y=\"" << mt + 4
      << "\" font-size=\"11\" text-anchor=\"end\">" << ymax << "</text>\n";

  for (std::size_t i = 0; i < cumulative.size(); ++i) {
    const auto& c = cumulative[i];
    if (c.empty()) continue;
    out << "<polyline fill=\"none\" stroke=\"" << kColors[i % 6]
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < c.size(); ++k) {
      const double px =
          ml + (W - ml - mr) * static_cast<double>(k + 1) / kmax;
      const double py = Hpx - mb - (Hpx - mt - mb) * (c[k] / ymax);
      out << px << ',' << py << ' ';
    }
    out << "\"/>\n";
    out << "<text x=\"" << W - mr - 4 << "\" y=\"" << mt + 14 * (i + 1)
        << "\" font-size=\"11\" text-anchor=\"end\" fill=\"" << kColors[i % 6]
        << "\">seed " << seeds[i] << "</text>\n";
  }
  out << "</svg>\n";
}

namespace {

SeedSummary summarize_seed(std::uint64_t seed,
                           const std::vector<RegretLogRow>& log,
                           const std::string& csv_path,
                           std::vector<double>* cumulative_out) {
  SeedSummary s;
  s.seed = seed;
  s.csv_path = csv_path;
  const int K = static_cast<int>(log.size());
  std::vector<double> cum(K);
  double acc = 0.0;
  for (int k = 0; k < K; ++k) {
    acc += log[k].regret_contrib;
    cum[k] = acc;
  }
  s.cumulative_regret = acc;

  const int fifth = std::max(1, K / 5);
  double first = 0.0, last = 0.0;
  for (int k = 0; k < fifth; ++k) first += log[k].regret_contrib;
  for (int k = K - fifth; k < K; ++k) last += log[k].regret_contrib;
  s.mean_regret_first = first / fifth;
  s.mean_regret_last = last / fifth;
  s.regret_halved = s.mean_regret_last <= 0.5 * s.mean_regret_first;

  const int half = std::max(1, K / 2);
  s.slope_first_half = cum[half - 1] / half;
  s.slope_second_half = (cum[K - 1] - cum[half - 1]) / std::max(1, K - half);
  s.sublinear = s.slope_second_half < s.slope_first_half;

  double num = 0.0, den = 0.0;
  for (int k = half; k < K; ++k) {
    num += std::sqrt(static_cast<double>(k + 1)) * cum[k];
    den += static_cast<double>(k + 1);
  }
  s.sqrt_k_coeff = den > 0.0 ? num / den : 0.0;

  if (cumulative_out) *cumulative_out = std::move(cum);
  return s;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();

  LinearAtstMdp mdp = [&]() {
    if (!cfg.model_file.empty()) return load_model_file(cfg.model_file);
    if (cfg.generator == "benchmark3") return make_benchmark3();
    SeededRng gen_rng(cfg.model_seed);
    return encode_tabular(random_tabular(cfg.gen_states, cfg.gen_actions,
                                         cfg.gen_gamma, cfg.gen_beta_min,
                                         cfg.gen_beta_max, gen_rng));
  }();
  mdp.validate();
  const double gamma = mdp.gamma();
  const int d = mdp.d();
  const int S = mdp.num_states();
  const int A = mdp.num_actions();
  for (int s : cfg.initial_schedule)
    if (s >= S) throw ConfigError("initial_schedule: state index out of range");

  const ActionMatrixSet ams = action_matrices(mdp);
  const int plan_iters = default_planning_iterations(gamma);
  const OptimalValues opt = optimal_values(mdp, ams, plan_iters);
  const double oracle_slack = std::pow(gamma, plan_iters) / (1.0 - gamma);

  std::filesystem::create_directories(cfg.out_dir);
  const LearnerConfig lcfg = cfg.learner_config(gamma, d);
  const std::vector<int> schedule =
      cfg.initial_schedule.empty() ? std::vector<int>{0} : cfg.initial_schedule;

  const double eps_target = std::sqrt((1.0 - gamma) / cfg.episodes);
  const bool estimated = cfg.engine_mode == "estimated";
  PsiEngine exact_engine = PsiEngine::exact(mdp, ams);

  long n_est = cfg.estimation_n;
  bool n_capped = false;
  if (estimated && n_est == 0) {
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(d, d);
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        const Eigen::VectorXd f = mdp.phi(s, a);
        sigma.noalias() += f * f.transpose() / (S * A);
      }
    const double lmin =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sigma)
            .eigenvalues()
            .minCoeff();
    n_est = required_sample_size(d, A, gamma, eps_target, cfg.confidence, lmin,
                                 1.0 / A, cfg.beta_known);
    if (n_est > 5'000'000) {  // keep dataset generation tractable
      n_est = 5'000'000;
      n_capped = true;
    }
  }

  const int n_seeds = static_cast<int>(cfg.seeds.size());
  std::vector<SeedSummary> summaries(n_seeds);
  std::vector<std::vector<double>> cumulative(n_seeds);
  std::vector<std::string> admissibility(n_seeds);
  std::vector<std::exception_ptr> failures(n_seeds);

  auto run_seed = [&](int i) {
    try {
      const std::uint64_t seed = cfg.seeds[i];
      SeededRng rng(seed);
      PsiEngine engine = exact_engine;
      if (estimated) {
        SeededRng data_rng = rng.substream(777);
        const Eigen::VectorXd unif =
            Eigen::VectorXd::Constant(S * A, 1.0 / (S * A));
        OffPolicyDataset data =
            sample_dataset(mdp, unif, static_cast<int>(n_est), data_rng);
        std::vector<Eigen::MatrixXd> m_hat = ridge_action_matrices(data, mdp);
        double eps = 0.0;
        for (int a = 0; a < A; ++a)
          eps = std::max(eps, operator_norm_2(m_hat[a] - ams[a]));
        Eigen::VectorXd beta_hat = mdp.beta_vector();
        double eps_beta = 0.0;
        if (!cfg.beta_known) {
          const BetaEstimate be = empirical_beta(data);
          beta_hat = be.beta_hat;
          eps_beta = (beta_hat - mdp.beta_vector()).cwiseAbs().maxCoeff();
        }
        engine = build_estimated(mdp, std::move(m_hat), beta_hat, eps, eps_beta);
        SeededRng adm_rng = rng.substream(778);
        admissibility[i] =
            check_admissible(engine, exact_engine,
                             engine.admissibility_level(), 200, adm_rng)
                .summary();
      }

      BurstPolicyEvaluator beval(mdp);
      PolicyEvaluator evaluator =
          [&](int s1, const std::vector<std::vector<int>>& choice,
              const std::vector<ActionSequence>& family) -> EpisodeEvaluation {
        const Eigen::VectorXd w = beval.evaluate(choice, family);
        return {opt.v_star()[s1], w[s1]};
      };

      LearningResult res = run_learning(mdp, engine, cfg.episodes, schedule,
                                        lcfg, rng, &evaluator, nullptr);
      const std::string csv_path =
          cfg.out_dir + "/regret_seed_" + std::to_string(seed) + ".csv";
      write_regret_csv(res.log, csv_path);
      summaries[i] = summarize_seed(seed, res.log, csv_path, &cumulative[i]);
    } catch (...) {
      failures[i] = std::current_exception();
    }
  };

  std::vector<std::thread> workers;
  workers.reserve(n_seeds);
  for (int i = 0; i < n_seeds; ++i) workers.emplace_back(run_seed, i);
  for (auto& t : workers) t.join();
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);

  ExperimentResult out;
  out.seeds = summaries;
  out.v_star_s1 = opt.v_star()[schedule.front()];
  for (const auto& s : summaries) {
    if (s.regret_halved) ++out.halved_count;
  }
  out.sublinear_all =
      std::all_of(summaries.begin(), summaries.end(),
                  [](const SeedSummary& s) { return s.sublinear; });
  if (estimated) out.admissibility_summary = admissibility[0];

  json summary;
  summary["config"] = json::parse(cfg.to_json());
  summary["v_star_s1"] = out.v_star_s1;
  summary["oracle_slack"] = oracle_slack;
  summary["learner"] = {{"H", lcfg.H}, {"rho", lcfg.rho},
                        {"lambda", lcfg.lambda}};
  if (estimated) {
    summary["estimation_n"] = n_est;
    summary["estimation_n_capped"] = n_capped;
    summary["eps_target"] = eps_target;
    summary["admissibility"] = out.admissibility_summary;
  }
  summary["seeds"] = json::array();
  for (const auto& s : summaries) {
    summary["seeds"].push_back({{"seed", s.seed},
                                {"cumulative_regret", s.cumulative_regret},
                                {"mean_regret_first_fifth", s.mean_regret_first},
                                {"mean_regret_last_fifth", s.mean_regret_last},
                                {"regret_halved", s.regret_halved},
                                {"slope_first_half", s.slope_first_half},
                                {"slope_second_half", s.slope_second_half},
                                {"sublinear", s.sublinear},
                                {"sqrt_k_coeff", s.sqrt_k_coeff},
                                {"csv", s.csv_path}});
  }
  summary["halved_count"] = out.halved_count;
  summary["sublinear_all_seeds"] = out.sublinear_all;

  out.summary_path = cfg.out_dir + "/summary.json";
  {
    std::ofstream f(out.summary_path);
    f << summary.dump(2) << '\n';
  }
  out.plot_path = cfg.out_dir + "/cumulative_regret.svg";
  write_regret_svg(cumulative, cfg.seeds, out.plot_path);
  return out;
}

}  // namespace atst
