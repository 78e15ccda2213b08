#include "atst/offpolicy.hpp"

#include <cmath>
#include <fstream>

namespace atst {

void OffPolicyDataset::write_csv(const std::string& path) const {
  std::ofstream out(path);
  out << "s,a,s_next,b\n";
  for (const auto& r : rows)
    out << r.s << ',' << r.a << ',' << r.s_next << ',' << r.b << '\n';
}

OffPolicyDataset sample_dataset(const LinearAtstMdp& mdp,
                                const Eigen::VectorXd& dist, int n,
                                SeededRng& rng) {
  const int S = mdp.num_states();
  const int A = mdp.num_actions();
  if (dist.size() != S * A)
    throw DegenerateDistribution("sampling distribution has wrong length");
  if (dist.maxCoeff() <= 0.0)
    throw DegenerateDistribution("sampling distribution has empty support");
  if (n < 1) throw DegenerateDistribution("need at least one sample");

  OffPolicyDataset out;
  out.num_states = S;
  out.num_actions = A;
  out.sampling_dist = dist / dist.sum();
  out.rows.reserve(n);

  Eigen::MatrixXd second_moment = Eigen::MatrixXd::Zero(mdp.d(), mdp.d());
  Eigen::VectorXi action_counts = Eigen::VectorXi::Zero(A);
  for (int i = 0; i < n; ++i) {
    const int cell = rng.discrete(out.sampling_dist);
    const int s = cell / A;
    const int a = cell % A;
    const int sp = rng.discrete(mdp.transition_row(s, a));
    const int b = rng.bernoulli(mdp.beta(a)) ? 1 : 0;
    out.rows.push_back({s, a, sp, b});
    const Eigen::VectorXd f = mdp.phi(s, a);
    second_moment.noalias() += f * f.transpose();
    ++action_counts[a];
  }
  second_moment /= n;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(second_moment);
  out.sigma_min = es.eigenvalues().minCoeff();
  out.p_min_emp = static_cast<double>(action_counts.minCoeff()) / n;
  return out;
}

std::vector<Eigen::MatrixXd> ridge_action_matrices(
    const OffPolicyDataset& data, const LinearAtstMdp& mdp, double lambda) {
  const int d = mdp.d();
  const int A = data.num_actions;
  Eigen::MatrixXd gram = lambda * Eigen::MatrixXd::Identity(d, d);
  std::vector<Eigen::MatrixXd> rhs(A, Eigen::MatrixXd::Zero(d, d));
  for (const auto& row : data.rows) {
    const Eigen::VectorXd x = mdp.phi(row.s, row.a);
    gram.noalias() += x * x.transpose();
    for (int a = 0; a < A; ++a)
      rhs[a].noalias() += x * mdp.phi(row.s_next, a).transpose();
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(gram);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(A);
  for (int a = 0; a < A; ++a) out.push_back(llt.solve(rhs[a]));
  return out;
}

BetaEstimate empirical_beta(const OffPolicyDataset& data) {
  const int A = data.num_actions;
  Eigen::VectorXd hits = Eigen::VectorXd::Zero(A);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(A);
  for (const auto& row : data.rows) {
    counts[row.a] += 1.0;
    hits[row.a] += row.b;
  }
  BetaEstimate out;
  out.beta_hat.resize(A);
  out.unseen.assign(A, false);
  for (int a = 0; a < A; ++a) {
    if (counts[a] == 0.0) {
      out.beta_hat[a] = 0.5;  // maximum-entropy fallback
      out.unseen[a] = true;
    } else {
      out.beta_hat[a] = hits[a] / counts[a];
    }
  }
  return out;
}

long required_sample_size(int d, int num_actions, double gamma, double eps,
                          double p, double lambda_min_sigma, double p_min,
                          bool beta_known, double c) {
  const double log_term = std::log(2.0 * num_actions * d / p);
  const double dd = static_cast<double>(d);
  double denom = lambda_min_sigma * lambda_min_sigma;
  if (!beta_known) denom = std::min(denom, dd * dd * p_min);
  const double n = c * dd * dd * dd * log_term /
                   (eps * eps * (1.0 - gamma) * (1.0 - gamma) * denom);
  return static_cast<long>(std::ceil(n));
}

}  // namespace atst
