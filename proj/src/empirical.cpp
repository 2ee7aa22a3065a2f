#include "dtbsm/empirical.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "dtbsm/error.hpp"
#include "dtbsm/transport.hpp"

namespace dtbsm {

EmpiricalModel::EmpiricalModel(std::size_t num_states, std::size_t num_actions)
    : num_states_(num_states),
      num_actions_(num_actions),
      counts_(num_states * num_actions * num_states, 0),
      k_per_pair_(num_states * num_actions, 0) {}

void EmpiricalModel::add(StateIndex s, ActionIndex a, StateIndex next) {
  if (s >= num_states_ || a >= num_actions_ || next >= num_states_) {
    std::ostringstream msg;
    msg << "transition (" << s << ", " << a << ") -> " << next << " is outside "
        << num_states_ << " states x " << num_actions_ << " actions";
    throw Error(ErrorCode::SamplerOutOfRange, msg.str());
  }
  ++counts_[(s * num_actions_ + a) * num_states_ + next];
  ++k_per_pair_[s * num_actions_ + a];
}

std::vector<double> EmpiricalModel::distribution(StateIndex s, ActionIndex a) const {
  const auto k = samples(s, a);
  if (k == 0) {
    std::ostringstream msg;
    msg << "no samples for (s=" << s << ", a=" << a << ")";
    throw Error(ErrorCode::NoSamples, msg.str());
  }
  std::vector<double> p(num_states_);
  const auto* row = &counts_[(s * num_actions_ + a) * num_states_];
  for (std::size_t t = 0; t < num_states_; ++t)
    p[t] = static_cast<double>(row[t]) / static_cast<double>(k);
  return p;
}

MdpSampler::MdpSampler(const TabularMdp& mdp) : mdp_(mdp), cdf_(mdp.transitions().size()) {
  const auto S = mdp.num_states();
  for (std::size_t r = 0; r < S * mdp.num_actions(); ++r) {
    double acc = 0.0;
    for (std::size_t t = 0; t < S; ++t) {
      acc += mdp.transitions()[r * S + t];
      cdf_[r * S + t] = acc;
    }
  }
}

StateIndex MdpSampler::sample_next(StateIndex s, ActionIndex a, std::uint64_t, Rng& rng) const {
  const auto S = mdp_.num_states();
  const auto first = cdf_.begin() + static_cast<std::ptrdiff_t>((s * mdp_.num_actions() + a) * S);
  const auto last = first + static_cast<std::ptrdiff_t>(S);
  // Scale by the row total so rounding in the running sum never leaves a gap at the top.
  const double u = rng.uniform() * *(last - 1);
  auto it = std::upper_bound(first, last, u);
  if (it == last) {
    // u rounded up to the total: take the last state with positive mass.
    it = std::lower_bound(first, last, *(last - 1));
  }
  return static_cast<StateIndex>(it - first);
}

TraceSampler::TraceSampler(std::size_t num_states, std::size_t num_actions,
                           const std::vector<Transition>& trace)
    : num_states_(num_states), num_actions_(num_actions), next_(num_states * num_actions) {
  for (const auto& tr : trace) {
    if (tr.state >= num_states || tr.action >= num_actions || tr.next_state >= num_states) {
      std::ostringstream msg;
      msg << "trace row (" << tr.state << ", " << tr.action << ", " << tr.next_state
          << ") is outside " << num_states << " states x " << num_actions << " actions";
      throw Error(ErrorCode::SamplerOutOfRange, msg.str());
    }
    next_[tr.state * num_actions + tr.action].push_back(tr.next_state);
  }
}

StateIndex TraceSampler::sample_next(StateIndex s, ActionIndex a, std::uint64_t draw, Rng&) const {
  return next_[s * num_actions_ + a].at(draw);
}

std::uint64_t TraceSampler::available(StateIndex s, ActionIndex a) const {
  return next_[s * num_actions_ + a].size();
}

namespace {

bool parse_index(const std::string& field, std::size_t& out) {
  std::size_t begin = field.find_first_not_of(" \t\r");
  std::size_t end = field.find_last_not_of(" \t\r");
  if (begin == std::string::npos) return false;
  const std::string token = field.substr(begin, end - begin + 1);
  if (token.empty() || token.find_first_not_of("0123456789") != std::string::npos) return false;
  try {
    out = static_cast<std::size_t>(std::stoull(token));
  } catch (const std::out_of_range&) {
    return false;
  }
  return true;
}

}  // namespace

std::vector<Transition> read_trace_csv(std::istream& in) {
  std::vector<Transition> rows;
  std::string line;
  std::size_t line_no = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    Transition tr{};
    const bool ok = fields.size() == 3 && parse_index(fields[0], tr.state) &&
                    parse_index(fields[1], tr.action) && parse_index(fields[2], tr.next_state);
    const bool header = first_content && !ok;
    first_content = false;
    if (header) continue;
    if (!ok) {
      std::ostringstream msg;
      msg << "trace line " << line_no << ": expected `state,action,next_state`, got `" << line << "`";
      throw Error(ErrorCode::Parse, msg.str());
    }
    rows.push_back(tr);
  }
  return rows;
}

EmpiricalModel collect(const GenerativeSampler& sampler, std::uint64_t k, std::uint64_t seed) {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  const auto S = sampler.num_states();
  const auto A = sampler.num_actions();

  std::ostringstream deficient;
  std::size_t missing = 0;
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      const auto have = sampler.available(s, a);
      if (have >= k) continue;
      deficient << (missing++ == 0 ? "" : ", ") << "(s=" << s << ", a=" << a << ": " << have
                << "/" << k << ")";
    }
  }
  if (missing > 0) {
    std::ostringstream msg;
    msg << missing << " state-action pair(s) below K = " << k << ": " << deficient.str();
    throw Error(ErrorCode::Coverage, msg.str());
  }

  EmpiricalModel model(S, A);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      Rng rng(stream_seed(seed, {s, a}));
      for (std::uint64_t draw = 0; draw < k; ++draw) model.add(s, a, sampler.sample_next(s, a, draw, rng));
    }
  }
  return model;
}

double empirical_tv(const EmpiricalModel& model_p, const EmpiricalModel& model_q, StateIndex s,
                    ActionIndex a) {
  if (model_p.num_states() != model_q.num_states() ||
      model_p.num_actions() != model_q.num_actions())
    throw Error(ErrorCode::ShapeMismatch, "empirical models have different shapes");
  return tv_distance(model_p.distribution(s, a), model_q.distribution(s, a));
}

DiagMetric empirical_dtv_metric(const MdpPair& pair_rewards, const EmpiricalModel& model_real,
                                const EmpiricalModel& model_twin) {
  const auto S = pair_rewards.num_states();
  const auto A = pair_rewards.num_actions();
  for (const auto* m : {&model_real, &model_twin}) {
    if (m->num_states() != S || m->num_actions() != A)
      throw Error(ErrorCode::ShapeMismatch, "empirical model does not match the MDP pair");
  }
  DiagMetric out;
  out.r_max = compute_rmax(pair_rewards);
  out.d_tv.assign(S, 0.0);
  const double gamma = pair_rewards.gamma();
  const double weight = gamma * out.r_max / (1.0 - gamma);
  for (std::size_t i = 0; i < S; ++i) {
    double best = 0.0;
    for (std::size_t a = 0; a < A; ++a) {
      const double reward_gap =
          std::abs(pair_rewards.real().reward(i, a) - pair_rewards.twin().reward(i, a));
      best = std::max(best, reward_gap + weight * empirical_tv(model_real, model_twin, i, a));
    }
    out.d_tv[i] = best;
  }
  return out;
}

namespace {

void check_plan_arguments(double epsilon, double alpha, double gamma, double r_max,
                          std::size_t num_states) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw Error(ErrorCode::InvalidArgument, "epsilon must be positive");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
  if (!(gamma > 0.0 && gamma < 1.0)) throw Error(ErrorCode::BadGamma, "gamma must lie in (0, 1)");
  if (!(r_max >= 0.0) || !std::isfinite(r_max))
    throw Error(ErrorCode::InvalidArgument, "r_max must be nonnegative");
  if (num_states == 0) throw Error(ErrorCode::InvalidArgument, "num_states must be positive");
}

}  // namespace

double required_samples_exact(double epsilon, double alpha, double gamma, double r_max,
                              std::size_t num_states) {
  check_plan_arguments(epsilon, alpha, gamma, r_max, num_states);
  const double S = static_cast<double>(num_states);
  const double num = -std::log(alpha / 2.0) * gamma * gamma * r_max * r_max * S * S;
  const double den = 2.0 * epsilon * epsilon * (1.0 - gamma) * (1.0 - gamma);
  return num / den;
}

SamplePlan required_samples(double epsilon, double alpha, double gamma, double r_max,
                            std::size_t num_states) {
  SamplePlan plan;
  plan.epsilon = epsilon;
  plan.alpha = alpha;
  const double exact = required_samples_exact(epsilon, alpha, gamma, r_max, num_states);
  if (r_max == 0.0) {
    plan.k_required = 1;
    plan.degenerate = true;
    return plan;
  }
  if (!(exact < 1.8e19)) throw Error(ErrorCode::InvalidArgument, "required sample size overflows 64 bits");
  plan.k_required = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(exact)));
  return plan;
}

double certified_epsilon(std::uint64_t k, double alpha, double gamma, double r_max,
                         std::size_t num_states) {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  check_plan_arguments(1.0, alpha, gamma, r_max, num_states);
  const double S = static_cast<double>(num_states);
  return gamma * r_max * S / (1.0 - gamma) *
         std::sqrt(-std::log(alpha / 2.0) / (2.0 * static_cast<double>(k)));
}

}  // namespace dtbsm
