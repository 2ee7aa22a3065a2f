#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <utility>
#include <vector>

#include "dtbsm/mdp.hpp"
#include "dtbsm/metrics.hpp"
#include "dtbsm/random.hpp"

namespace dtbsm {

/// Next-state counts gathered from K draws per (state, action).
class EmpiricalModel {
 public:
  EmpiricalModel(std::size_t num_states, std::size_t num_actions);

  std::size_t num_states() const noexcept { return num_states_; }
  std::size_t num_actions() const noexcept { return num_actions_; }

  void add(StateIndex s, ActionIndex a, StateIndex next);

  std::uint64_t count(StateIndex s, ActionIndex a, StateIndex next) const noexcept {
    return counts_[(s * num_actions_ + a) * num_states_ + next];
  }
  std::uint64_t samples(StateIndex s, ActionIndex a) const noexcept {
    return k_per_pair_[s * num_actions_ + a];
  }

  /// Empirical distribution counts / K; throws NoSamples when K = 0.
  std::vector<double> distribution(StateIndex s, ActionIndex a) const;

  friend bool operator==(const EmpiricalModel&, const EmpiricalModel&) = default;

 private:
  std::size_t num_states_;
  std::size_t num_actions_;
  std::vector<std::uint64_t> counts_;
  std::vector<std::uint64_t> k_per_pair_;
};

/// Source of next-state draws. `draw` is the 0-based index of the draw for
/// this (s, a), so replay-style samplers stay stateless.
class GenerativeSampler {
 public:
  virtual ~GenerativeSampler() = default;
  virtual std::size_t num_states() const = 0;
  virtual std::size_t num_actions() const = 0;
  virtual StateIndex sample_next(StateIndex s, ActionIndex a, std::uint64_t draw, Rng& rng) const = 0;
  /// Draws available for (s, a); unbounded samplers report UINT64_MAX.
  virtual std::uint64_t available(StateIndex, ActionIndex) const { return UINT64_MAX; }
};

/// Inverse-CDF sampling from a known TabularMdp.
class MdpSampler final : public GenerativeSampler {
 public:
  explicit MdpSampler(const TabularMdp& mdp);
  std::size_t num_states() const override { return mdp_.num_states(); }
  std::size_t num_actions() const override { return mdp_.num_actions(); }
  StateIndex sample_next(StateIndex s, ActionIndex a, std::uint64_t draw, Rng& rng) const override;

 private:
  const TabularMdp& mdp_;
  std::vector<double> cdf_;
};

struct Transition {
  StateIndex state;
  ActionIndex action;
  StateIndex next_state;
};

/// Replays recorded transitions in file order, per (s, a).
class TraceSampler final : public GenerativeSampler {
 public:
  TraceSampler(std::size_t num_states, std::size_t num_actions,
               const std::vector<Transition>& trace);
  std::size_t num_states() const override { return num_states_; }
  std::size_t num_actions() const override { return num_actions_; }
  StateIndex sample_next(StateIndex s, ActionIndex a, std::uint64_t draw, Rng& rng) const override;
  std::uint64_t available(StateIndex s, ActionIndex a) const override;

 private:
  std::size_t num_states_;
  std::size_t num_actions_;
  std::vector<std::vector<StateIndex>> next_;
};

/// Parses `state,action,next_state` CSV rows. A non-numeric first line is
/// treated as a header; blank lines are skipped.
std::vector<Transition> read_trace_csv(std::istream& in);

/// Draws exactly k next states for every (s, a). Each pair uses its own
/// stream seeded from (seed, s, a), so the result does not depend on visit
/// order. Throws Coverage (listing every deficient pair) if the sampler cannot
/// supply k draws, SamplerOutOfRange if it returns an invalid state.
EmpiricalModel collect(const GenerativeSampler& sampler, std::uint64_t k, std::uint64_t seed);

/// 0.5 * sum |P_hat(.|s,a) - Q_hat(.|s,a)|.
double empirical_tv(const EmpiricalModel& model_p, const EmpiricalModel& model_q, StateIndex s,
                    ActionIndex a);

/// d_TV with both transition rows replaced by their empirical estimates;
/// rewards (and R_max) come from `pair_rewards` exactly.
DiagMetric empirical_dtv_metric(const MdpPair& pair_rewards, const EmpiricalModel& model_real,
                                const EmpiricalModel& model_twin);

struct SamplePlan {
  double epsilon = 0.0;
  double alpha = 0.0;
  std::uint64_t k_required = 0;
  /// R_max = 0: the metric is degenerate and one draw suffices.
  bool degenerate = false;
};

/// Unrounded -ln(alpha/2) gamma^2 R_max^2 |S|^2 / (2 eps^2 (1 - gamma)^2).
double required_samples_exact(double epsilon, double alpha, double gamma, double r_max,
                              std::size_t num_states);

/// Hoeffding sample size per (s, a) in both MDPs for |d_TV - d_hat_TV| <= eps
/// with confidence 1 - alpha.
SamplePlan required_samples(double epsilon, double alpha, double gamma, double r_max,
                            std::size_t num_states);

/// Smallest epsilon that K samples per (s, a) certify at confidence 1 - alpha.
double certified_epsilon(std::uint64_t k, double alpha, double gamma, double r_max,
                         std::size_t num_states);

}  // namespace dtbsm
