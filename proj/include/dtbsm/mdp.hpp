#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dtbsm {

using StateIndex = std::size_t;
using ActionIndex = std::size_t;

struct ValidationOptions {
  /// Absolute tolerance on |sum(row) - 1|; rows inside it are renormalized.
  double row_tolerance = 1e-9;
};

/**
 * Finite discounted MDP <S, A, P, R, gamma> stored as dense tables.
 *
 * Instances are only obtainable through validate_mdp() (or the helpers built on
 * it), so every TabularMdp in circulation satisfies: each transition row is a
 * probability vector, every reward is finite and 0 < gamma < 1.
 */
class TabularMdp {
 public:
  std::size_t num_states() const noexcept { return num_states_; }
  std::size_t num_actions() const noexcept { return num_actions_; }
  double gamma() const noexcept { return gamma_; }

  double reward(StateIndex s, ActionIndex a) const noexcept {
    return rewards_[s * num_actions_ + a];
  }

  /// P(. | s, a) as a view of length num_states().
  std::span<const double> row(StateIndex s, ActionIndex a) const noexcept {
    return {transitions_.data() + (s * num_actions_ + a) * num_states_, num_states_};
  }

  double transition(StateIndex s, ActionIndex a, StateIndex next) const noexcept {
    return transitions_[(s * num_actions_ + a) * num_states_ + next];
  }

  /// Row-major (state, action) reward table.
  const std::vector<double>& rewards() const noexcept { return rewards_; }
  /// Row-major (state, action, next_state) transition table.
  const std::vector<double>& transitions() const noexcept { return transitions_; }

  double min_reward() const noexcept;
  double max_reward() const noexcept;

  friend bool operator==(const TabularMdp&, const TabularMdp&) = default;

 private:
  friend TabularMdp validate_mdp(std::size_t, std::size_t, double, std::vector<double>,
                                 std::vector<double>, const ValidationOptions&);

  TabularMdp() = default;

  std::size_t num_states_ = 0;
  std::size_t num_actions_ = 0;
  double gamma_ = 0.0;
  std::vector<double> rewards_;
  std::vector<double> transitions_;
};

/// Checks every TabularMdp invariant and returns the validated MDP.
///
/// `rewards` is indexed [s * A + a] and `transitions` [(s * A + a) * S + s'].
/// Rows whose sum drifts from one by at most `row_tolerance` are renormalized;
/// anything further off raises RowNotStochastic.
TabularMdp validate_mdp(std::size_t num_states, std::size_t num_actions, double gamma,
                        std::vector<double> rewards, std::vector<double> transitions,
                        const ValidationOptions& options = {});

/// Deterministic stationary policy pi(s).
class Policy {
 public:
  Policy() = default;
  explicit Policy(std::vector<ActionIndex> actions) : actions_(std::move(actions)) {}

  std::size_t size() const noexcept { return actions_.size(); }
  ActionIndex operator()(StateIndex s) const noexcept { return actions_[s]; }
  const std::vector<ActionIndex>& actions() const noexcept { return actions_; }

  friend bool operator==(const Policy&, const Policy&) = default;

 private:
  std::vector<ActionIndex> actions_;
};

/// Throws ActionOutOfRange unless `pi` covers every state with a valid action.
void check_policy(const TabularMdp& mdp, const Policy& pi);

struct ValueVector {
  std::vector<double> values;
  /// Certified bound on the sup-norm distance to the exact fixed point.
  double residual = 0.0;
  /// Bellman sweeps performed (0 for a direct linear solve).
  std::size_t iterations = 0;
};

/// Either a fixed number of Bellman sweeps or a target certified residual.
class StoppingRule {
 public:
  static StoppingRule steps(std::size_t n) { return StoppingRule(true, n, 0.0); }
  static StoppingRule tolerance(double delta) { return StoppingRule(false, 0, delta); }

  bool is_fixed() const noexcept { return fixed_; }
  std::size_t step_count() const noexcept { return steps_; }
  double target() const noexcept { return tolerance_; }

 private:
  StoppingRule(bool fixed, std::size_t n, double delta)
      : fixed_(fixed), steps_(n), tolerance_(delta) {}
  bool fixed_;
  std::size_t steps_;
  double tolerance_;
};

inline constexpr double kDefaultValueTolerance = 1e-10;

/// Value iteration V(n) = max_a {R + gamma P V(n-1)} from V(0) = 0.
///
/// The residual is the a-posteriori contraction certificate
/// gamma * ||V(n) - V(n-1)|| / (1 - gamma).
ValueVector value_iteration(const TabularMdp& mdp,
                            StoppingRule stop = StoppingRule::tolerance(kDefaultValueTolerance));

/// V^pi. A fixed step count runs that many evaluation sweeps from zero; a
/// tolerance solves (I - gamma P_pi) V = R_pi directly, certifying the result
/// through the linear-system backward error.
ValueVector policy_evaluation(const TabularMdp& mdp, const Policy& pi,
                              StoppingRule stop = StoppingRule::tolerance(kDefaultValueTolerance));

/// argmax_a {R(s,a) + gamma sum P(s'|s,a) v(s')}, ties to the lowest action.
Policy greedy_policy(const TabularMdp& mdp, std::span<const double> values);

inline Policy greedy_policy(const TabularMdp& mdp, const ValueVector& v) {
  return greedy_policy(mdp, std::span<const double>(v.values));
}

/// Regret max_i {V*(s_i) - V^pi(s_i)}, clamped at zero inside the combined
/// solver certificate.
double suboptimality(const TabularMdp& mdp, const Policy& pi);

/// Same quantity when V* is already available (saves a solve in sweeps).
double suboptimality(const TabularMdp& mdp, const Policy& pi, const ValueVector& optimal);

}  // namespace dtbsm
