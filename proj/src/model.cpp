#include "atst/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace atst {

namespace {
constexpr double kStochasticTol = 1e-9;  // row sums
constexpr double kAlgebraTol = 1e-12;    // exact algebraic identities
}  // namespace

LinearAtstMdp::LinearAtstMdp(int d, int num_states, int num_actions,
                             Eigen::MatrixXd phi, Eigen::MatrixXd mu,
                             Eigen::VectorXd theta, double gamma,
                             Eigen::VectorXd beta)
    : d_(d),
      num_states_(num_states),
      num_actions_(num_actions),
      phi_(std::move(phi)),
      mu_(std::move(mu)),
      theta_(std::move(theta)),
      gamma_(gamma),
      beta_(std::move(beta)) {
  if (d_ <= 0 || num_states_ <= 0 || num_actions_ <= 0)
    throw ModelError("model dimensions must be positive");
  if (phi_.rows() != d_ || phi_.cols() != num_states_ * num_actions_)
    throw ModelError("phi table has wrong shape");
  if (mu_.rows() != d_ || mu_.cols() != num_states_)
    throw ModelError("mu has wrong shape");
  if (theta_.size() != d_) throw ModelError("theta has wrong length");
  if (beta_.size() != num_actions_) throw ModelError("beta has wrong length");
  if (!(gamma_ > 0.0 && gamma_ < 1.0))
    throw ModelError("gamma must lie in (0,1)");
  validate();
}

void LinearAtstMdp::validate() const {
  const double sqrt_d = std::sqrt(static_cast<double>(d_));
  for (int a = 0; a < num_actions_; ++a) {
    if (beta_[a] < 0.0 || beta_[a] > 1.0) {
      std::ostringstream os;
      os << "beta out of [0,1] at action " << a;
      throw ModelError(os.str());
    }
  }
  for (int s = 0; s < num_states_; ++s) {
    for (int a = 0; a < num_actions_; ++a) {
      const Eigen::VectorXd f = phi(s, a);
      if (f.norm() > 1.0 + kStochasticTol) {
        std::ostringstream os;
        os << "||phi||_2 > 1 at (s=" << s << ", a=" << a << "): " << f.norm();
        throw NormBoundViolated(os.str());
      }
      const double rw = f.dot(theta_);
      if (rw < -kStochasticTol || rw > 1.0 + kStochasticTol) {
        std::ostringstream os;
        os << "reward outside [0,1] at (s=" << s << ", a=" << a << "): " << rw;
        throw NormBoundViolated(os.str());
      }
      const Eigen::VectorXd row = transition_row(s, a);
      double sum = 0.0;
      for (int sp = 0; sp < num_states_; ++sp) {
        if (row[sp] < -kAlgebraTol) {
          std::ostringstream os;
          os << "negative kernel entry at (s=" << s << ", a=" << a
             << ", s'=" << sp << "): " << row[sp];
          throw NonStochasticKernel(os.str());
        }
        sum += row[sp];
      }
      if (std::abs(sum - 1.0) > kStochasticTol) {
        std::ostringstream os;
        os << "kernel row does not sum to 1 at (s=" << s << ", a=" << a
           << "): " << sum;
        throw NonStochasticKernel(os.str());
      }
    }
  }
  if (theta_.norm() > sqrt_d + kStochasticTol) {
    std::ostringstream os;
    os << "||theta||_2 > sqrt(d): " << theta_.norm();
    throw NormBoundViolated(os.str());
  }
  // row-wise absolute mass of mu must have l2-norm <= sqrt(d)
  const Eigen::VectorXd abs_mass = mu_.cwiseAbs().rowwise().sum();
  if (abs_mass.norm() > sqrt_d + kStochasticTol) {
    std::ostringstream os;
    os << "|| |mu|(S) ||_2 > sqrt(d): " << abs_mass.norm();
    throw NormBoundViolated(os.str());
  }
}

LinearAtstMdp encode_tabular(const TabularMdp& tab) {
  const int S = tab.num_states;
  const int A = tab.num_actions;
  if (S <= 0 || A <= 0) throw ModelError("empty tabular MDP");
  if (static_cast<int>(tab.P.size()) != A)
    throw ModelError("P must have one S x S matrix per action");
  for (int a = 0; a < A; ++a) {
    for (int s = 0; s < S; ++s) {
      const double sum = tab.P[a].row(s).sum();
      if (std::abs(sum - 1.0) > kStochasticTol) {
        std::ostringstream os;
        os << "P row does not sum to 1 at (s=" << s << ", a=" << a
           << "): " << sum;
        throw NonStochasticKernel(os.str());
      }
      if (tab.P[a].row(s).minCoeff() < -kAlgebraTol) {
        std::ostringstream os;
        os << "negative P entry at (s=" << s << ", a=" << a << ")";
        throw NonStochasticKernel(os.str());
      }
    }
  }
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a)
      if (tab.r(s, a) < 0.0 || tab.r(s, a) > 1.0) {
        std::ostringstream os;
        os << "reward outside [0,1] at (s=" << s << ", a=" << a
           << "): " << tab.r(s, a);
        throw NormBoundViolated(os.str());
      }

  const int d = S * A;
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(d, S);
  Eigen::VectorXd theta(d);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const int idx = s * A + a;
      phi(idx, idx) = 1.0;  // indicator basis, one coordinate per (s,a)
      theta[idx] = tab.r(s, a);
      for (int sp = 0; sp < S; ++sp) mu(idx, sp) = tab.P[a](s, sp);
    }
  }
  return LinearAtstMdp(d, S, A, std::move(phi), std::move(mu),
                       std::move(theta), tab.gamma, tab.beta);
}

LinearAtstMdp make_paid_observations(const LinearAtstMdp& base,
                                     const Eigen::MatrixXd& cost,
                                     double c_max) {
  const int S = base.num_states();
  const int A = base.num_actions();
  const int d = base.d();
  if (c_max < 0.0) throw CostOutOfRange("c_max must be nonnegative");
  if (cost.rows() != S || cost.cols() != A)
    throw CostOutOfRange("cost table has wrong shape");
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a)
      if (cost(s, a) < 0.0 || cost(s, a) > c_max) {
        std::ostringstream os;
        os << "cost outside [0, c_max] at (s=" << s << ", a=" << a
           << "): " << cost(s, a);
        throw CostOutOfRange(os.str());
      }

  const int d2 = d + 1;
  const int A2 = 2 * A;
  const double root_ratio = std::sqrt(static_cast<double>(d2) / d);
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(d2, S * A2);
  Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(d2, S);
  mu.topRows(d) = root_ratio * base.mu();
  Eigen::VectorXd theta(d2);
  theta.head(d) = base.theta();
  theta[d] = c_max * std::sqrt(static_cast<double>(d));
  theta *= root_ratio / (1.0 + c_max);
  Eigen::VectorXd beta(A2);
  const double inv_root_d2 = 1.0 / std::sqrt(static_cast<double>(d2));
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      for (int i = 0; i < 2; ++i) {
        const int col = s * A2 + 2 * a + i;
        phi.col(col).head(d) =
            inv_root_d2 * std::sqrt(static_cast<double>(d)) * base.phi(s, a);
        const double ratio = (i == 1 && c_max > 0.0) ? cost(s, a) / c_max : 0.0;
        phi(d, col) = inv_root_d2 * (1.0 - ratio);
      }
    }
  }
  for (int a = 0; a < A; ++a) {
    beta[2 * a] = 0.0;
    beta[2 * a + 1] = 1.0;
  }
  return LinearAtstMdp(d2, S, A2, std::move(phi), std::move(mu),
                       std::move(theta), base.gamma(), std::move(beta));
}

LinearAtstMdp make_reset_to_observe(const LinearAtstMdp& base,
                                    const Eigen::VectorXd& lambda_reset) {
  const int S = base.num_states();
  const int A = base.num_actions();
  const int d = base.d();
  if (lambda_reset.size() != S)
    throw NonStochasticReset("lambda_reset has wrong length");
  if (std::abs(lambda_reset.sum() - 1.0) > kStochasticTol) {
    std::ostringstream os;
    os << "lambda_reset sums to " << lambda_reset.sum();
    throw NonStochasticReset(os.str());
  }
  if (lambda_reset.minCoeff() < -kAlgebraTol)
    throw NonStochasticReset("lambda_reset has a negative entry");

  const int d2 = d + 1;
  const int A2 = A + 1;  // restart action appended last
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(d2, S * A2);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a)
      phi.col(s * A2 + a).head(d) = base.phi(s, a);
    phi(d, s * A2 + A) = 1.0;
  }
  Eigen::MatrixXd mu(d2, S);
  mu.topRows(d) = base.mu();
  mu.row(d) = lambda_reset.transpose();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d2);
  theta.head(d) = base.theta();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(A2);
  beta[A] = 1.0;
  return LinearAtstMdp(d2, S, A2, std::move(phi), std::move(mu),
                       std::move(theta), base.gamma(), std::move(beta));
}

LinearAtstMdp make_faulty_channel(const LinearAtstMdp& base, double beta_star) {
  Eigen::VectorXd beta =
      Eigen::VectorXd::Constant(base.num_actions(), beta_star);
  return LinearAtstMdp(base.d(), base.num_states(), base.num_actions(),
                       base.phi_table(), base.mu(), base.theta(), base.gamma(),
                       std::move(beta));
}

namespace {

using nlohmann::json;

Eigen::VectorXd to_vector(const json& j) {
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

Eigen::VectorXd beta_from_json(const json& j, int num_actions) {
  if (j.is_number())
    return Eigen::VectorXd::Constant(num_actions, j.get<double>());
  Eigen::VectorXd b = to_vector(j);
  if (b.size() != num_actions) throw ConfigError("beta has wrong length");
  return b;
}

int count_from_json(const json& j) {
  if (j.is_number_integer()) return j.get<int>();
  if (j.is_array()) return static_cast<int>(j.size());
  throw ConfigError("states/actions must be an integer count or an array");
}

}  // namespace

LinearAtstMdp load_model_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model parse error: ") + e.what());
  }
  try {
  if (j.contains("phi")) {
    const int d = j.at("d").get<int>();
    const auto& jphi = j.at("phi");  // [s][a][i]
    const int S = static_cast<int>(jphi.size());
    const int A = static_cast<int>(jphi[0].size());
    Eigen::MatrixXd phi(d, S * A);
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) phi.col(s * A + a) = to_vector(jphi[s][a]);
    const auto& jmu = j.at("mu");  // [i][s]
    Eigen::MatrixXd mu(d, S);
    for (int i = 0; i < d; ++i) mu.row(i) = to_vector(jmu[i]).transpose();
    return LinearAtstMdp(d, S, A, std::move(phi), std::move(mu),
                         to_vector(j.at("theta")), j.at("gamma").get<double>(),
                         beta_from_json(j.at("beta"), A));
  }
  TabularMdp tab;
  tab.num_states = count_from_json(j.at("states"));
  tab.num_actions = count_from_json(j.at("actions"));
  tab.gamma = j.at("gamma").get<double>();
  tab.beta = beta_from_json(j.at("beta"), tab.num_actions);
  const auto& jP = j.at("P");  // [s][a][s']
  tab.P.assign(tab.num_actions,
               Eigen::MatrixXd::Zero(tab.num_states, tab.num_states));
  for (int s = 0; s < tab.num_states; ++s)
    for (int a = 0; a < tab.num_actions; ++a)
      tab.P[a].row(s) = to_vector(jP[s][a]).transpose();
  const auto& jr = j.at("r");  // [s][a]
  tab.r.resize(tab.num_states, tab.num_actions);
  for (int s = 0; s < tab.num_states; ++s)
    tab.r.row(s) = to_vector(jr[s]).transpose();
  return encode_tabular(tab);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model field error: ") + e.what());
  }
}

LinearAtstMdp load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_model_json(ss.str());
}

std::string model_to_json(const LinearAtstMdp& mdp) {
  json j;
  j["d"] = mdp.d();
  j["gamma"] = mdp.gamma();
  json jphi = json::array();
  for (int s = 0; s < mdp.num_states(); ++s) {
    json row = json::array();
    for (int a = 0; a < mdp.num_actions(); ++a) {
      const Eigen::VectorXd f = mdp.phi(s, a);
      row.push_back(std::vector<double>(f.data(), f.data() + f.size()));
    }
    jphi.push_back(row);
  }
  j["phi"] = jphi;
  json jmu = json::array();
  for (int i = 0; i < mdp.d(); ++i) {
    const Eigen::VectorXd row = mdp.mu().row(i).transpose();
    jmu.push_back(std::vector<double>(row.data(), row.data() + row.size()));
  }
  j["mu"] = jmu;
  j["theta"] = std::vector<double>(mdp.theta().data(),
                                   mdp.theta().data() + mdp.d());
  j["beta"] = std::vector<double>(mdp.beta_vector().data(),
                                  mdp.beta_vector().data() + mdp.num_actions());
  return j.dump(2);
}

LinearAtstMdp make_benchmark3() {
  TabularMdp tab;
  tab.num_states = 3;
  tab.num_actions = 2;
  tab.gamma = 0.8;
  tab.beta = Eigen::VectorXd(2);
  tab.beta << 1.0, 0.3;
  tab.P.assign(2, Eigen::MatrixXd(3, 3));
  tab.P[0] << 0.6, 0.3, 0.1,
              0.1, 0.7, 0.2,
              0.25, 0.25, 0.5;
  tab.P[1] << 0.1, 0.2, 0.7,
              0.5, 0.2, 0.3,
              0.3, 0.4, 0.3;
  tab.r.resize(3, 2);
  tab.r << 0.9, 0.1,
           0.2, 0.6,
           0.5, 0.8;
  return encode_tabular(tab);
}

TabularMdp random_tabular(int num_states, int num_actions, double gamma,
                          double beta_min, double beta_max, SeededRng& rng) {
  TabularMdp tab;
  tab.num_states = num_states;
  tab.num_actions = num_actions;
  tab.gamma = gamma;
  tab.P.assign(num_actions, Eigen::MatrixXd(num_states, num_states));
  tab.r.resize(num_states, num_actions);
  tab.beta.resize(num_actions);
  for (int a = 0; a < num_actions; ++a) {
    tab.beta[a] = beta_min + (beta_max - beta_min) * rng.uniform();
    for (int s = 0; s < num_states; ++s) {
      Eigen::VectorXd row(num_states);
      for (int sp = 0; sp < num_states; ++sp) row[sp] = 0.05 + rng.uniform();
      tab.P[a].row(s) = (row / row.sum()).transpose();
    }
  }
  for (int s = 0; s < num_states; ++s)
    for (int a = 0; a < num_actions; ++a) tab.r(s, a) = rng.uniform();
  return tab;
}

}  // namespace atst
