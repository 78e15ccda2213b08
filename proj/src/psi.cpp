#include "atst/psi.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace atst {

SeriesConfig SeriesConfig::for_model(double gamma, int d, double eps_ser) {
  SeriesConfig out;
  const double sqrt_d = std::sqrt(static_cast<double>(d));
  // smallest L with gamma^(L+1) sqrt(d)/(1-gamma) <= eps_ser
  out.trunc_depth = static_cast<int>(std::ceil(
      std::log(sqrt_d / (eps_ser * (1.0 - gamma))) / std::log(1.0 / gamma)));
  if (out.trunc_depth < 1) out.trunc_depth = 1;
  out.tail_bound = std::pow(gamma, out.trunc_depth + 1) * sqrt_d / (1.0 - gamma);
  return out;
}

PsiEngine PsiEngine::exact(const LinearAtstMdp& mdp, const ActionMatrixSet& ams,
                           double eps_ser) {
  PsiEngine e;
  e.mode_ = PsiMode::kExact;
  e.d_ = mdp.d();
  e.num_states_ = mdp.num_states();
  e.num_actions_ = mdp.num_actions();
  e.gamma_ = mdp.gamma();
  e.phi_ = mdp.phi_table();
  e.matrices_ = ams.matrices;
  e.beta_ = mdp.beta_vector();
  e.series_ = SeriesConfig::for_model(e.gamma_, e.d_, eps_ser);
  return e;
}

PsiEngine PsiEngine::estimated_raw(const LinearAtstMdp& mdp,
                                   std::vector<Eigen::MatrixXd> m_estimates,
                                   Eigen::VectorXd beta_estimates,
                                   double eps_ser) {
  PsiEngine e;
  e.mode_ = PsiMode::kEstimated;
  e.d_ = mdp.d();
  e.num_states_ = mdp.num_states();
  e.num_actions_ = mdp.num_actions();
  e.gamma_ = mdp.gamma();
  e.phi_ = mdp.phi_table();
  e.matrices_ = std::move(m_estimates);
  e.beta_ = std::move(beta_estimates);
  e.series_ = SeriesConfig::for_model(e.gamma_, e.d_, eps_ser);
  return e;
}

PsiEngine build_estimated(const LinearAtstMdp& mdp,
                          std::vector<Eigen::MatrixXd> m_estimates,
                          Eigen::VectorXd beta_estimates, double eps,
                          double eps_beta, bool per_matrix_corrected,
                          double eps_ser) {
  const double sqrt_d = std::sqrt(static_cast<double>(mdp.d()));
  if (eps < 0.0 || eps_beta < 0.0 || eps_beta > 1.0)
    throw EpsilonTooLarge("eps must be >= 0 and eps_beta in [0,1]");
  if (eps > (1.0 - mdp.gamma()) / (2.0 * sqrt_d)) {
    std::ostringstream os;
    os << "eps = " << eps << " exceeds (1-gamma)/(2 sqrt(d)) = "
       << (1.0 - mdp.gamma()) / (2.0 * sqrt_d);
    throw EpsilonTooLarge(os.str());
  }
  if (per_matrix_corrected) {
    const double c = 1.0 + eps * sqrt_d;
    for (auto& m : m_estimates) m /= c;
  }
  PsiEngine e = PsiEngine::estimated_raw(mdp, std::move(m_estimates),
                                         std::move(beta_estimates), eps_ser);
  e.mode_ = PsiMode::kNormalized;
  const double level = mdp.d() * (eps + eps_beta / sqrt_d) / (1.0 - mdp.gamma());
  e.norm_divisor_ = 1.0 + 16.0 * level;
  e.admissibility_ = 32.0 * level;
  e.per_matrix_corrected_ = per_matrix_corrected;
  return e;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> PsiEngine::m1_m2(
    const ActionSequence& seq) const {
  Eigen::MatrixXd m1 = Eigen::MatrixXd::Identity(d_, d_);
  Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(d_, d_);
  Eigen::MatrixXd prod = Eigen::MatrixXd::Identity(d_, d_);
  double coeff = 1.0;  // gamma^k prod_{i<k} beta_bar(a_i)
  for (int k = 1; k <= series_.trunc_depth; ++k) {
    const int a = seq.at(k - 1);
    prod = prod * matrices_[a];
    coeff *= gamma_;
    m1 += coeff * prod;
    m2 += coeff * beta_[a] * prod;
    coeff *= 1.0 - beta_[a];
    if (coeff == 0.0) break;
  }
  return {m1, m2};
}

Eigen::VectorXd PsiEngine::psi(const AugmentedState& x,
                               const ActionSequence& seq) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(2 * d_);
  if (x.is_terminal()) return out;  // K(terminal, .) = 0

  const int a0 = seq.at(0);
  // f = phi(x + a0)
  Eigen::VectorXd f;
  if (x.depth() == 0) {
    f = phi(x.anchor, a0);
  } else {
    f = phi(x.anchor, x.tail[0]);
    for (std::size_t i = 1; i < x.tail.size(); ++i)
      f = matrices_[x.tail[i]].transpose() * f;
    f = matrices_[a0].transpose() * f;
  }

  // row accumulation of f^T M1(tail) and f^T M2(tail)
  Eigen::VectorXd f_m1 = f;
  Eigen::VectorXd f_m2 = Eigen::VectorXd::Zero(d_);
  Eigen::VectorXd row = f;
  double coeff = 1.0;
  for (int k = 1; k <= series_.trunc_depth; ++k) {
    const int a = seq.at(k);  // tail element k-1 is seq element k
    row = matrices_[a].transpose() * row;
    coeff *= gamma_;
    f_m1 += coeff * row;
    f_m2 += coeff * beta_[a] * row;
    coeff *= 1.0 - beta_[a];
    if (coeff == 0.0) break;
  }

  const double b = beta_[a0];
  const double bb = 1.0 - b;
  out.head(d_) = 0.5 * (1.0 - gamma_) * (b * f + bb * f_m1);
  out.tail(d_) = 0.5 * gamma_ * (b * f + bb * f_m2);
  return out / norm_divisor_;
}

Eigen::VectorXd k_weight_vector(const LinearAtstMdp& mdp,
                                const Eigen::VectorXd& v_states) {
  Eigen::VectorXd out(2 * mdp.d());
  out.head(mdp.d()) = 2.0 * mdp.theta() / (1.0 - mdp.gamma());
  out.tail(mdp.d()) = 2.0 * (mdp.mu() * v_states);
  return out;
}

namespace {
using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    const Eigen::VectorXd r = m.row(i).transpose();
    rows.push_back(std::vector<double>(r.data(), r.data() + r.size()));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  return m;
}
}  // namespace

std::string PsiEngine::to_json() const {
  json j;
  j["mode"] = mode_ == PsiMode::kExact        ? "exact"
              : mode_ == PsiMode::kEstimated ? "estimated"
                                             : "normalized";
  j["d"] = d_;
  j["num_states"] = num_states_;
  j["num_actions"] = num_actions_;
  j["gamma"] = gamma_;
  j["L_ser"] = series_.trunc_depth;
  j["norm_divisor"] = norm_divisor_;
  j["admissibility"] = admissibility_;
  j["per_matrix_corrected"] = per_matrix_corrected_;
  j["phi"] = matrix_to_json(phi_);
  json mats = json::array();
  for (const auto& m : matrices_) mats.push_back(matrix_to_json(m));
  j["M"] = mats;
  j["beta"] = std::vector<double>(beta_.data(), beta_.data() + beta_.size());
  return j.dump();
}

PsiEngine PsiEngine::from_json(const std::string& text) {
  json j = json::parse(text);
  PsiEngine e;
  const std::string mode = j.at("mode").get<std::string>();
  e.mode_ = mode == "exact"       ? PsiMode::kExact
            : mode == "estimated" ? PsiMode::kEstimated
                                  : PsiMode::kNormalized;
  e.d_ = j.at("d").get<int>();
  e.num_states_ = j.at("num_states").get<int>();
  e.num_actions_ = j.at("num_actions").get<int>();
  e.gamma_ = j.at("gamma").get<double>();
  e.series_.trunc_depth = j.at("L_ser").get<int>();
  e.series_.tail_bound = std::pow(e.gamma_, e.series_.trunc_depth + 1) *
                         std::sqrt(static_cast<double>(e.d_)) /
                         (1.0 - e.gamma_);
  e.norm_divisor_ = j.at("norm_divisor").get<double>();
  e.admissibility_ = j.at("admissibility").get<double>();
  e.per_matrix_corrected_ = j.at("per_matrix_corrected").get<bool>();
  e.phi_ = matrix_from_json(j.at("phi"));
  for (const auto& jm : j.at("M")) e.matrices_.push_back(matrix_from_json(jm));
  const auto b = j.at("beta").get<std::vector<double>>();
  e.beta_ = Eigen::Map<const Eigen::VectorXd>(b.data(), b.size());
  return e;
}

PsiEngine PsiEngine::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open engine file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void PsiEngine::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write engine file: " + path);
  out << to_json();
}

std::string AdmissibilityReport::summary() const {
  std::ostringstream os;
  os << (pass() ? "PASS" : "FAIL") << " admissibility at eps=" << eps_target
     << " over " << samples << " samples: sup error " << worst_error
     << (error_ok ? " (ok)" : " (VIOLATED)") << ", sup norm " << worst_norm
     << (norm_ok ? " (ok)" : " (VIOLATED)") << ", tail instability "
     << worst_instability << (stability_ok ? " (ok)" : " (VIOLATED)");
  if (!worst_error_at.empty()) os << "; worst at " << worst_error_at;
  return os.str();
}

AdmissibilityReport check_admissible(const PsiEngine& candidate,
                                     const PsiEngine& reference,
                                     double eps_target, int n_samples,
                                     SeededRng& rng) {
  AdmissibilityReport rep;
  rep.samples = n_samples;
  rep.eps_target = eps_target;
  const int L = candidate.series().trunc_depth;
  for (int i = 0; i < n_samples; ++i) {
    const int s = rng.uniform_int(candidate.num_states());
    const int len = 1 + rng.uniform_int(L + 8);
    std::vector<int> prefix(len);
    for (int k = 0; k < len; ++k)
      prefix[k] = rng.uniform_int(candidate.num_actions());
    const Continuation cont = rng.bernoulli(0.5) ? Continuation::kRepeatLast
                                                 : Continuation::kCyclePrefix;
    const ActionSequence seq(prefix, cont);

    const Eigen::VectorXd hat = candidate.psi(s, seq);
    const Eigen::VectorXd ref = reference.psi(s, seq);
    const double err = (hat - ref).norm();
    if (err > rep.worst_error) {
      rep.worst_error = err;
      std::ostringstream os;
      os << "(s=" << s << ", |prefix|=" << len << ")";
      rep.worst_error_at = os.str();
    }
    rep.worst_norm = std::max(rep.worst_norm, hat.norm());

    // prefix stability: changing the sequence beyond trunc_depth must move
    // the output by at most 2 * tail_bound
    std::vector<int> long_prefix(L + 8);
    for (int k = 0; k < L + 8; ++k) long_prefix[k] = seq.at(k);
    std::vector<int> perturbed = long_prefix;
    for (int k = L; k < L + 8; ++k)
      perturbed[k] = rng.uniform_int(candidate.num_actions());
    const Eigen::VectorXd p1 = candidate.psi(s, ActionSequence(long_prefix));
    const Eigen::VectorXd p2 = candidate.psi(s, ActionSequence(perturbed));
    rep.worst_instability = std::max(rep.worst_instability, (p1 - p2).norm());
  }
  rep.error_ok = rep.worst_error <= eps_target + 1e-12;
  rep.norm_ok = rep.worst_norm <= 1.0 + 1e-9;
  rep.stability_ok =
      rep.worst_instability <= 2.0 * candidate.series().tail_bound + 1e-12;
  return rep;
}

}  // namespace atst
