#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "atst/belief.hpp"
#include "atst/model.hpp"
#include "atst/rng.hpp"

namespace atst {

// Truncation of the infinite series behind M1/M2. tail_bound is the certified
// operator-norm error: gamma^(L+1) sqrt(d) / (1-gamma).
struct SeriesConfig {
  int trunc_depth = 0;
  double tail_bound = 0.0;

  static SeriesConfig for_model(double gamma, int d, double eps_ser = 1e-8);
};

enum class PsiMode { kExact, kEstimated, kNormalized };

// Evaluates the action-sequence feature map psi (exact, estimated, or
// normalized). Immutable after construction; evaluations are pure.
class PsiEngine {
 public:
  static PsiEngine exact(const LinearAtstMdp& mdp, const ActionMatrixSet& ams,
                         double eps_ser = 1e-8);

  // Raw estimated map (unnormalized hat-psi).
  static PsiEngine estimated_raw(const LinearAtstMdp& mdp,
                                 std::vector<Eigen::MatrixXd> m_estimates,
                                 Eigen::VectorXd beta_estimates,
                                 double eps_ser = 1e-8);

  PsiMode mode() const { return mode_; }
  int d() const { return d_; }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  double gamma() const { return gamma_; }
  const SeriesConfig& series() const { return series_; }
  double norm_divisor() const { return norm_divisor_; }
  double admissibility_level() const { return admissibility_; }
  bool per_matrix_corrected() const { return per_matrix_corrected_; }
  const std::vector<Eigen::MatrixXd>& matrices() const { return matrices_; }
  const Eigen::VectorXd& burst_probs() const { return beta_; }
  Eigen::VectorXd phi(int s, int a) const {
    return phi_.col(s * num_actions_ + a);
  }

  // Type 1 and 2 action-sequence matrices of seq, truncated at trunc_depth.
  std::pair<Eigen::MatrixXd, Eigen::MatrixXd> m1_m2(
      const ActionSequence& seq) const;

  // psi(x, seq) in R^{2d}; the terminal augmented state maps to zero.
  Eigen::VectorXd psi(const AugmentedState& x, const ActionSequence& seq) const;
  Eigen::VectorXd psi(int s, const ActionSequence& seq) const {
    return psi(AugmentedState(s), seq);
  }

  std::string to_json() const;
  static PsiEngine from_json(const std::string& text);
  static PsiEngine load_file(const std::string& path);
  void save_file(const std::string& path) const;

  friend PsiEngine build_estimated(const LinearAtstMdp& mdp,
                                   std::vector<Eigen::MatrixXd> m_estimates,
                                   Eigen::VectorXd beta_estimates, double eps,
                                   double eps_beta, bool per_matrix_corrected,
                                   double eps_ser);

 private:
  PsiEngine() = default;

  PsiMode mode_ = PsiMode::kExact;
  int d_ = 0;
  int num_states_ = 0;
  int num_actions_ = 0;
  double gamma_ = 0.0;
  Eigen::MatrixXd phi_;                   // d x (S*A)
  std::vector<Eigen::MatrixXd> matrices_;  // M_a or estimates
  Eigen::VectorXd beta_;                   // true beta or estimates
  SeriesConfig series_;
  double norm_divisor_ = 1.0;
  double admissibility_ = 0.0;
  bool per_matrix_corrected_ = false;
};

// v^pi_12 = 2 [theta/(1-gamma); sum_s mu(.,s) V(s)].
Eigen::VectorXd k_weight_vector(const LinearAtstMdp& mdp,
                                const Eigen::VectorXd& v_states);

// Normalized estimated map per the error-propagation bound: the raw
// estimate divided by 1 + 16 d (eps + eps_beta/sqrt(d)) / (1-gamma). Errors
// with EpsilonTooLarge when eps > (1-gamma)/(2 sqrt(d)). The per-matrix
// corrected variant (each M divided by 1 + eps sqrt(d)) sits behind a flag
// for comparison.
PsiEngine build_estimated(const LinearAtstMdp& mdp,
                          std::vector<Eigen::MatrixXd> m_estimates,
                          Eigen::VectorXd beta_estimates, double eps,
                          double eps_beta, bool per_matrix_corrected = false,
                          double eps_ser = 1e-8);

struct AdmissibilityReport {
  int samples = 0;
  double eps_target = 0.0;
  double worst_error = 0.0;       // sup ||psi_hat - psi||_2
  double worst_norm = 0.0;        // sup ||psi_hat||_2
  double worst_instability = 0.0; // tail-change response beyond trunc_depth
  bool error_ok = false;
  bool norm_ok = false;
  bool stability_ok = false;
  std::string worst_error_at;

  bool pass() const { return error_ok && norm_ok && stability_ok; }
  std::string summary() const;
};

// Samples (s, seq) pairs and checks the three admissibility conditions, with
// prefix-stability standing in for product-topology continuity.
AdmissibilityReport check_admissible(const PsiEngine& candidate,
                                     const PsiEngine& reference,
                                     double eps_target, int n_samples,
                                     SeededRng& rng);

}  // namespace atst
