#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "atst/belief.hpp"
#include "atst/errors.hpp"
#include "atst/eval.hpp"
#include "atst/model.hpp"
#include "atst/offpolicy.hpp"
#include "atst/psi.hpp"
#include "atst/rng.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kValidationFailure = 2;
constexpr int kCheckFailure = 3;

int cmd_validate(const std::string& path) {
  const atst::LinearAtstMdp mdp = atst::load_model_file(path);
  mdp.validate();
  std::cout << "ok: d=" << mdp.d() << " states=" << mdp.num_states()
            << " actions=" << mdp.num_actions() << " gamma=" << mdp.gamma()
            << '\n';
  return kOk;
}

int cmd_estimate(const std::string& model_path, long n, bool beta_known,
                 std::uint64_t seed, double lambda,
                 const std::string& out_path) {
  const atst::LinearAtstMdp mdp = atst::load_model_file(model_path);
  mdp.validate();
  const atst::ActionMatrixSet ams = atst::action_matrices(mdp);
  atst::SeededRng rng(seed);
  const int cells = mdp.num_states() * mdp.num_actions();
  const Eigen::VectorXd unif = Eigen::VectorXd::Constant(cells, 1.0 / cells);
  const atst::OffPolicyDataset data =
      atst::sample_dataset(mdp, unif, static_cast<int>(n), rng);
  std::vector<Eigen::MatrixXd> m_hat =
      atst::ridge_action_matrices(data, mdp, lambda);

  double eps = 0.0;
  for (int a = 0; a < mdp.num_actions(); ++a)
    eps = std::max(eps, atst::operator_norm_2(m_hat[a] - ams[a]));
  Eigen::VectorXd beta_hat = mdp.beta_vector();
  double eps_beta = 0.0;
  if (!beta_known) {
    const atst::BetaEstimate be = atst::empirical_beta(data);
    beta_hat = be.beta_hat;
    eps_beta = (beta_hat - mdp.beta_vector()).cwiseAbs().maxCoeff();
  }
  const atst::PsiEngine engine =
      atst::build_estimated(mdp, std::move(m_hat), beta_hat, eps, eps_beta);
  engine.save_file(out_path);
  std::cout << "engine written to " << out_path << "\neps=" << eps
            << " eps_beta=" << eps_beta
            << " admissibility_level=" << engine.admissibility_level() << '\n';
  return kOk;
}

int cmd_certify(const std::string& engine_path, const std::string& model_path,
                double eps, int samples, std::uint64_t seed) {
  const atst::LinearAtstMdp mdp = atst::load_model_file(model_path);
  mdp.validate();
  const atst::ActionMatrixSet ams = atst::action_matrices(mdp);
  const atst::PsiEngine exact = atst::PsiEngine::exact(mdp, ams);
  const atst::PsiEngine candidate = atst::PsiEngine::load_file(engine_path);
  atst::SeededRng rng(seed);
  const atst::AdmissibilityReport report =
      atst::check_admissible(candidate, exact, eps, samples, rng);
  std::cout << report.summary() << '\n';
  return report.pass() ? kOk : kCheckFailure;
}

int cmd_learn(const std::string& config_path) {
  const atst::ExperimentConfig cfg =
      atst::ExperimentConfig::load_file(config_path);
  const atst::ExperimentResult res = atst::run_experiment(cfg);
  std::cout << "summary: " << res.summary_path << "\nplot: " << res.plot_path
            << "\nseeds with halved tail regret: " << res.halved_count << '/'
            << res.seeds.size()
            << "\nsublinear on all seeds: " << (res.sublinear_all ? "yes" : "no")
            << '\n';
  return kOk;
}

int cmd_oracle(const std::string& model_path, int depth,
               const std::string& out_path) {
  const atst::LinearAtstMdp mdp = atst::load_model_file(model_path);
  mdp.validate();
  const atst::ActionMatrixSet ams = atst::action_matrices(mdp);
  const int iters =
      depth > 0 ? depth : atst::default_planning_iterations(mdp.gamma());
  const atst::OptimalValues opt = atst::optimal_values(mdp, ams, iters);
  nlohmann::json j;
  j["iterations"] = iters;
  j["error_bound"] = std::pow(mdp.gamma(), iters) / (1.0 - mdp.gamma());
  j["v_star"] = std::vector<double>(
      opt.v_star().data(), opt.v_star().data() + opt.v_star().size());
  std::vector<int> greedy(mdp.num_states());
  for (int s = 0; s < mdp.num_states(); ++s) greedy[s] = opt.greedy_first_action(s);
  j["greedy_first_action"] = greedy;
  const std::string text = j.dump(2);
  if (out_path.empty()) {
    std::cout << text << '\n';
  } else {
    std::ofstream f(out_path);
    f << text << '\n';
    std::cout << "written to " << out_path << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"learning and planning for action-triggered sporadically "
               "traceable MDPs"};
  app.require_subcommand(1);

  std::string model_path, engine_path, config_path, out_path;
  long n = 10000;
  bool beta_known = false;
  std::uint64_t seed = 1;
  double lambda = 1.0, eps = 0.1;
  int samples = 500, depth = 0;

  auto* validate = app.add_subcommand("validate-model", "check model invariants");
  validate->add_option("file", model_path, "model JSON file")->required();

  auto* estimate = app.add_subcommand(
      "estimate", "estimate dynamics from an off-policy dataset");
  estimate->add_option("model", model_path, "model JSON file")->required();
  estimate->add_option("--n", n, "dataset size");
  estimate->add_flag("--beta-known", beta_known, "use true burst probabilities");
  estimate->add_option("--seed", seed, "RNG seed");
  estimate->add_option("--lambda", lambda, "ridge regularizer");
  estimate->add_option("--out", out_path, "engine output file");

  auto* certify = app.add_subcommand("certify", "check engine admissibility");
  certify->add_option("engine", engine_path, "engine JSON file")->required();
  certify->add_option("--model", model_path, "reference model")->required();
  certify->add_option("--eps", eps, "admissibility level");
  certify->add_option("--samples", samples, "sampled check points");
  certify->add_option("--seed", seed, "RNG seed");

  auto* learn = app.add_subcommand("learn", "run a full learning experiment");
  learn->add_option("config", config_path, "experiment config JSON")->required();

  auto* oracle = app.add_subcommand("oracle", "dump optimal values");
  oracle->add_option("model", model_path, "model JSON file")->required();
  oracle->add_option("--depth", depth, "value-iteration count (0 = auto)");
  oracle->add_option("--out", out_path, "output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) return cmd_validate(model_path);
    if (estimate->parsed()) {
      if (out_path.empty()) out_path = "engine.json";
      return cmd_estimate(model_path, n, beta_known, seed, lambda, out_path);
    }
    if (certify->parsed())
      return cmd_certify(engine_path, model_path, eps, samples, seed);
    if (learn->parsed()) return cmd_learn(config_path);
    if (oracle->parsed()) return cmd_oracle(model_path, depth, out_path);
  } catch (const atst::ModelError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidationFailure;
  } catch (const atst::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kValidationFailure;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidationFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kCheckFailure;
  }
  return kOk;
}
