#include "dtbsm/mdp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dtbsm/error.hpp"

namespace dtbsm {

namespace {

// Above this many states policy evaluation iterates over the nonzero pattern
// instead of factorizing a dense |S| x |S| matrix.
constexpr std::size_t kDirectSolveLimit = 512;

// Nonzero pattern of the transition table; the Bellman sweeps only touch these.
struct SparseKernel {
  std::vector<std::size_t> offsets;  // (s * A + a) -> begin in cols/probs
  std::vector<std::size_t> cols;
  std::vector<double> probs;

  explicit SparseKernel(const TabularMdp& mdp) {
    const auto S = mdp.num_states();
    const auto A = mdp.num_actions();
    offsets.reserve(S * A + 1);
    offsets.push_back(0);
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t a = 0; a < A; ++a) {
        auto row = mdp.row(s, a);
        for (std::size_t t = 0; t < S; ++t) {
          if (row[t] != 0.0) {
            cols.push_back(t);
            probs.push_back(row[t]);
          }
        }
        offsets.push_back(cols.size());
      }
    }
  }

  double expect(std::size_t sa, const std::vector<double>& v) const noexcept {
    double acc = 0.0;
    for (std::size_t k = offsets[sa]; k < offsets[sa + 1]; ++k) acc += probs[k] * v[cols[k]];
    return acc;
  }
};

double sup_distance(const std::vector<double>& x, const std::vector<double>& y) {
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

double max_abs_reward(const TabularMdp& mdp) {
  return std::max(std::abs(mdp.min_reward()), std::abs(mdp.max_reward()));
}

// Sweeps needed before the contraction certificate can drop below `delta`,
// padded generously; guards against stagnation at rounding level.
std::size_t sweep_budget(const TabularMdp& mdp, double delta) {
  const double gamma = mdp.gamma();
  const double scale = max_abs_reward(mdp);
  if (scale == 0.0) return 2;
  const double ratio = delta * (1.0 - gamma) / scale;
  double n = ratio >= 1.0 ? 1.0 : std::log(ratio) / std::log(gamma);
  return static_cast<std::size_t>(std::ceil(n)) * 2 + 100;
}

ValueVector iterate_bellman(const TabularMdp& mdp, const SparseKernel& kernel, const Policy* pi,
                            std::vector<double> start, StoppingRule stop) {
  const auto S = mdp.num_states();
  const auto A = mdp.num_actions();
  const double gamma = mdp.gamma();
  const double certificate_scale = gamma / (1.0 - gamma);

  ValueVector out;
  out.values = std::move(start);
  std::vector<double> next(S);

  const std::size_t budget =
      stop.is_fixed() ? stop.step_count() : sweep_budget(mdp, stop.target());
  double last_diff = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < budget; ++n) {
    for (std::size_t s = 0; s < S; ++s) {
      if (pi != nullptr) {
        const auto a = (*pi)(s);
        next[s] = mdp.reward(s, a) + gamma * kernel.expect(s * A + a, out.values);
      } else {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < A; ++a) {
          best = std::max(best, mdp.reward(s, a) + gamma * kernel.expect(s * A + a, out.values));
        }
        next[s] = best;
      }
    }
    last_diff = sup_distance(next, out.values);
    out.values.swap(next);
    ++out.iterations;
    if (!stop.is_fixed() && certificate_scale * last_diff <= stop.target()) break;
  }

  if (out.iterations == 0) {
    // No sweep taken: V(0) = 0 is within max|R| / (1 - gamma) of the fixed point.
    out.residual = max_abs_reward(mdp) / (1.0 - gamma);
  } else {
    out.residual = certificate_scale * last_diff;
  }
  return out;
}

ValueVector solve_policy_system(const TabularMdp& mdp, const Policy& pi, double delta) {
  const auto S = mdp.num_states();
  const double gamma = mdp.gamma();
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(S),
                                                     static_cast<Eigen::Index>(S));
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(S));
  for (std::size_t s = 0; s < S; ++s) {
    const auto a = pi(s);
    auto row = mdp.row(s, a);
    for (std::size_t t = 0; t < S; ++t) {
      system(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) -= gamma * row[t];
    }
    rhs(static_cast<Eigen::Index>(s)) = mdp.reward(s, a);
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
  Eigen::VectorXd x = lu.solve(rhs);
  Eigen::VectorXd r = rhs - system * x;
  x += lu.solve(r);
  r = rhs - system * x;

  ValueVector out;
  out.values.assign(x.data(), x.data() + x.size());
  // ||(I - gamma P)^-1||_inf <= 1 / (1 - gamma).
  out.residual = r.lpNorm<Eigen::Infinity>() / (1.0 - gamma);
  if (out.residual > delta) {
    SparseKernel kernel(mdp);
    auto refined = iterate_bellman(mdp, kernel, &pi, std::move(out.values),
                                   StoppingRule::tolerance(delta));
    return refined;
  }
  return out;
}

}  // namespace

double TabularMdp::min_reward() const noexcept {
  return rewards_.empty() ? 0.0 : *std::min_element(rewards_.begin(), rewards_.end());
}

double TabularMdp::max_reward() const noexcept {
  return rewards_.empty() ? 0.0 : *std::max_element(rewards_.begin(), rewards_.end());
}

TabularMdp validate_mdp(std::size_t num_states, std::size_t num_actions, double gamma,
                        std::vector<double> rewards, std::vector<double> transitions,
                        const ValidationOptions& options) {
  if (num_states == 0 || num_actions == 0) {
    throw Error(ErrorCode::InvalidArgument, "MDP needs at least one state and one action");
  }
  if (rewards.size() != num_states * num_actions) {
    throw Error(ErrorCode::InvalidArgument, "reward table has wrong size");
  }
  if (transitions.size() != num_states * num_actions * num_states) {
    throw Error(ErrorCode::InvalidArgument, "transition table has wrong size");
  }
  if (!std::isfinite(gamma) || gamma <= 0.0 || gamma >= 1.0) {
    std::ostringstream msg;
    msg << "discount factor must lie in (0, 1), got " << gamma;
    throw Error(ErrorCode::BadGamma, msg.str());
  }
  for (std::size_t k = 0; k < rewards.size(); ++k) {
    if (!std::isfinite(rewards[k])) {
      std::ostringstream msg;
      msg << "non-finite reward at state " << k / num_actions << ", action " << k % num_actions;
      throw Error(ErrorCode::NonFiniteEntry, msg.str());
    }
  }
  for (std::size_t sa = 0; sa < num_states * num_actions; ++sa) {
    double* row = transitions.data() + sa * num_states;
    double sum = 0.0;
    for (std::size_t t = 0; t < num_states; ++t) {
      if (!std::isfinite(row[t])) {
        std::ostringstream msg;
        msg << "non-finite transition probability at state " << sa / num_actions << ", action "
            << sa % num_actions << ", next state " << t;
        throw Error(ErrorCode::NonFiniteEntry, msg.str());
      }
      if (row[t] < 0.0) {
        std::ostringstream msg;
        msg << "negative transition probability at state " << sa / num_actions << ", action "
            << sa % num_actions << ", next state " << t;
        throw Error(ErrorCode::RowNotStochastic, msg.str());
      }
      sum += row[t];
    }
    if (std::abs(sum - 1.0) > options.row_tolerance) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "transition row for state " << sa / num_actions << ", action " << sa % num_actions
          << " sums to " << sum;
      throw Error(ErrorCode::RowNotStochastic, msg.str());
    }
    // Rows off only by summation rounding are kept as is, so revalidation is a no-op.
    if (std::abs(sum - 1.0) > static_cast<double>(num_states) * std::numeric_limits<double>::epsilon()) {
      for (std::size_t t = 0; t < num_states; ++t) row[t] /= sum;
    }
  }

  TabularMdp mdp;
  mdp.num_states_ = num_states;
  mdp.num_actions_ = num_actions;
  mdp.gamma_ = gamma;
  mdp.rewards_ = std::move(rewards);
  mdp.transitions_ = std::move(transitions);
  return mdp;
}

void check_policy(const TabularMdp& mdp, const Policy& pi) {
  if (pi.size() != mdp.num_states()) {
    std::ostringstream msg;
    msg << "policy covers " << pi.size() << " states, MDP has " << mdp.num_states();
    throw Error(ErrorCode::ActionOutOfRange, msg.str());
  }
  for (std::size_t s = 0; s < pi.size(); ++s) {
    if (pi(s) >= mdp.num_actions()) {
      std::ostringstream msg;
      msg << "policy picks action " << pi(s) << " at state " << s << " but the MDP has "
          << mdp.num_actions() << " actions";
      throw Error(ErrorCode::ActionOutOfRange, msg.str());
    }
  }
}

ValueVector value_iteration(const TabularMdp& mdp, StoppingRule stop) {
  SparseKernel kernel(mdp);
  return iterate_bellman(mdp, kernel, nullptr, std::vector<double>(mdp.num_states(), 0.0), stop);
}

ValueVector policy_evaluation(const TabularMdp& mdp, const Policy& pi, StoppingRule stop) {
  check_policy(mdp, pi);
  if (stop.is_fixed() || mdp.num_states() > kDirectSolveLimit) {
    SparseKernel kernel(mdp);
    return iterate_bellman(mdp, kernel, &pi, std::vector<double>(mdp.num_states(), 0.0), stop);
  }
  return solve_policy_system(mdp, pi, stop.target());
}

Policy greedy_policy(const TabularMdp& mdp, std::span<const double> values) {
  if (values.size() != mdp.num_states()) {
    throw Error(ErrorCode::InvalidArgument, "value vector length does not match the MDP");
  }
  const auto S = mdp.num_states();
  const auto A = mdp.num_actions();
  std::vector<ActionIndex> actions(S, 0);
  for (std::size_t s = 0; s < S; ++s) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < A; ++a) {
      auto row = mdp.row(s, a);
      double q = 0.0;
      for (std::size_t t = 0; t < S; ++t) q += row[t] * values[t];
      q = mdp.reward(s, a) + mdp.gamma() * q;
      if (q > best) {
        best = q;
        actions[s] = a;
      }
    }
  }
  return Policy(std::move(actions));
}

double suboptimality(const TabularMdp& mdp, const Policy& pi) {
  return suboptimality(mdp, pi, value_iteration(mdp));
}

double suboptimality(const TabularMdp& mdp, const Policy& pi, const ValueVector& optimal) {
  const auto v_pi = policy_evaluation(mdp, pi);
  double gap = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < mdp.num_states(); ++s) {
    gap = std::max(gap, optimal.values[s] - v_pi.values[s]);
  }
  if (gap >= 0.0) return gap;
  const double slack = 2.0 * (optimal.residual + v_pi.residual) +
                       1e-12 * (1.0 + max_abs_reward(mdp) / (1.0 - mdp.gamma()));
  if (gap >= -slack) return 0.0;
  std::ostringstream msg;
  msg.precision(17);
  msg << "policy value exceeds the optimal value by " << -gap << ", beyond the solver certificates";
  throw Error(ErrorCode::InvariantViolation, msg.str());
}

}  // namespace dtbsm
