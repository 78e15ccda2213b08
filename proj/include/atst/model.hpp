#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "atst/errors.hpp"
#include "atst/rng.hpp"

namespace atst {

inline constexpr int kTerminal = -1;  // the termination sentinel state

// Last observed state plus the actions executed since, or the termination
// sentinel (anchor == kTerminal, empty tail).
struct AugmentedState {
  int anchor = kTerminal;
  std::vector<int> tail;

  AugmentedState() = default;
  explicit AugmentedState(int s) : anchor(s) {}
  AugmentedState(int s, std::vector<int> t) : anchor(s), tail(std::move(t)) {}

  static AugmentedState terminal() { return AugmentedState(); }

  bool is_terminal() const { return anchor == kTerminal; }
  int depth() const { return static_cast<int>(tail.size()); }

  AugmentedState append(int action) const {
    AugmentedState out = *this;
    out.tail.push_back(action);
    return out;
  }

  bool operator==(const AugmentedState& o) const {
    return anchor == o.anchor && tail == o.tail;
  }
};

struct AugmentedStateHash {
  std::size_t operator()(const AugmentedState& x) const {
    std::size_t h = std::hash<int>()(x.anchor);
    for (int a : x.tail) h = h * 1000003u + static_cast<std::size_t>(a + 1);
    return h;
  }
};

// Finite stand-in for an infinite action sequence: an explicit prefix plus a
// rule describing the tail.
enum class Continuation { kRepeatLast, kCyclePrefix };

struct ActionSequence {
  std::vector<int> prefix;
  Continuation continuation = Continuation::kRepeatLast;

  ActionSequence() = default;
  explicit ActionSequence(std::vector<int> p,
                          Continuation c = Continuation::kRepeatLast)
      : prefix(std::move(p)), continuation(c) {
    if (prefix.empty()) throw std::invalid_argument("ActionSequence: empty prefix");
  }

  int length() const { return static_cast<int>(prefix.size()); }

  // element k (0-based) of the infinite sequence
  int at(int k) const {
    const int n = length();
    if (k < n) return prefix[static_cast<std::size_t>(k)];
    if (continuation == Continuation::kRepeatLast) return prefix.back();
    return prefix[static_cast<std::size_t>(k % n)];
  }

  bool operator==(const ActionSequence& o) const {
    return prefix == o.prefix && continuation == o.continuation;
  }
};

// Tabular MDP input: P(s'|s,a) and r(s,a) tables.
struct TabularMdp {
  int num_states = 0;
  int num_actions = 0;
  std::vector<Eigen::MatrixXd> P;  // per action: S x S row-stochastic
  Eigen::MatrixXd r;               // S x A, values in [0,1]
  double gamma = 0.9;
  Eigen::VectorXd beta;            // per action
};

// Linear ATST-MDP (phi, mu, theta, gamma, beta) with a finite-state backing
// for mu so every integral over S becomes a finite sum. Immutable after
// construction and safe to share across threads.
class LinearAtstMdp {
 public:
  LinearAtstMdp(int d, int num_states, int num_actions, Eigen::MatrixXd phi,
                Eigen::MatrixXd mu, Eigen::VectorXd theta, double gamma,
                Eigen::VectorXd beta);

  int d() const { return d_; }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  double gamma() const { return gamma_; }
  double beta(int a) const { return beta_[a]; }
  double beta_bar(int a) const { return 1.0 - beta_[a]; }
  const Eigen::VectorXd& beta_vector() const { return beta_; }

  // phi(s, a), column view into the d x (S*A) table
  Eigen::VectorXd phi(int s, int a) const { return phi_.col(s * num_actions_ + a); }
  const Eigen::MatrixXd& phi_table() const { return phi_; }
  const Eigen::MatrixXd& mu() const { return mu_; }       // d x S
  const Eigen::VectorXd& theta() const { return theta_; }

  double reward(int s, int a) const { return phi(s, a).dot(theta_); }

  // reconstructed kernel row P(.|s,a) = phi(s,a)^T mu
  Eigen::VectorXd transition_row(int s, int a) const {
    return mu_.transpose() * phi(s, a);
  }

  // Checks every kernel-regularity invariant; throws with the first violation
  // and its cell index.
  void validate() const;

 private:
  int d_;
  int num_states_;
  int num_actions_;
  Eigen::MatrixXd phi_;    // d x (S*A)
  Eigen::MatrixXd mu_;     // d x S
  Eigen::VectorXd theta_;  // d
  double gamma_;
  Eigen::VectorXd beta_;   // A
};

// Indicator-basis encoding of a tabular MDP: d = S*A, one coordinate per
// (s,a) cell.
LinearAtstMdp encode_tabular(const TabularMdp& tab);

// Paid observations: every base action gets an observing version a1 (cost
// c(s,a), always bursts) and a blind version a0. Action order is
// (a0_0, a1_0, a0_1, a1_1, ...). Rewards come out in the transformed
// (r + c_max - cost) / (1 + c_max) scale.
LinearAtstMdp make_paid_observations(const LinearAtstMdp& base,
                                     const Eigen::MatrixXd& cost, double c_max);

// Reset-to-observe: one extra always-bursting restart action (appended last)
// that transitions according to lambda_reset; all base actions become blind.
LinearAtstMdp make_reset_to_observe(const LinearAtstMdp& base,
                                    const Eigen::VectorXd& lambda_reset);

// Faulty channel: identical dynamics, beta == beta_star for every action.
LinearAtstMdp make_faulty_channel(const LinearAtstMdp& base, double beta_star);

// JSON model files: either {states, actions, P, r, gamma, beta} (tabular) or
// {d, phi, mu, theta, gamma, beta} (direct linear form).
LinearAtstMdp load_model_json(const std::string& text);
LinearAtstMdp load_model_file(const std::string& path);
std::string model_to_json(const LinearAtstMdp& mdp);

// Fixed 3-state 2-action benchmark (gamma = 0.8, beta = (1, 0.3)).
LinearAtstMdp make_benchmark3();

// Random row-stochastic tabular instance; beta entries drawn uniformly in
// [beta_min, beta_max].
TabularMdp random_tabular(int num_states, int num_actions, double gamma,
                          double beta_min, double beta_max, SeededRng& rng);

}  // namespace atst
