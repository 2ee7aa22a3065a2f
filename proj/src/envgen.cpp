#include "dtbsm/envgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>

#include "dtbsm/error.hpp"
#include "dtbsm/random.hpp"
#include "internal/kv_config.hpp"

namespace dtbsm {

namespace {

template <typename T>
void check_length(const char* key, const std::vector<T>& v, std::size_t slices) {
  if (v.size() != slices) {
    std::ostringstream msg;
    msg << "`" << key << "` has " << v.size() << " entries for " << slices << " slices";
    throw Error(ErrorCode::InvalidArgument, msg.str());
  }
}

template <typename F>
void check_each(const char* key, const std::vector<double>& v, F ok, const char* expected) {
  for (double x : v) {
    if (!std::isfinite(x) || !ok(x)) {
      std::ostringstream msg;
      msg << "`" << key << "` entries must be " << expected << ", got " << x;
      throw Error(ErrorCode::InvalidArgument, msg.str());
    }
  }
}

// Most services of slice k that fit alone into the resources.
std::uint32_t max_occupancy(const AdmissionConfig& cfg, std::size_t k) {
  if (cfg.queue_cap[k] == 0) return 0;
  std::uint32_t best = UINT32_MAX;
  for (std::size_t r = 0; r < cfg.resources.size(); ++r) {
    if (cfg.demand[k][r] > 0) best = std::min(best, cfg.resources[r] / cfg.demand[k][r]);
  }
  return best;
}

bool fits(const AdmissionConfig& cfg, const std::vector<std::uint32_t>& occupancy) {
  for (std::size_t r = 0; r < cfg.resources.size(); ++r) {
    std::uint64_t used = 0;
    for (std::size_t k = 0; k < cfg.num_slices; ++k)
      used += static_cast<std::uint64_t>(occupancy[k]) * cfg.demand[k][r];
    if (used > cfg.resources[r]) return false;
  }
  return true;
}

struct SliceState {
  std::vector<std::uint32_t> queue;
  std::vector<std::uint32_t> busy;

  auto key() const { return std::make_pair(queue, busy); }
};

class StateSpace {
 public:
  StateSpace(const AdmissionConfig& cfg, const std::vector<std::uint32_t>& max_occ)
      : cfg_(cfg), max_occ_(max_occ) {
    SliceState cur{std::vector<std::uint32_t>(cfg.num_slices, 0),
                   std::vector<std::uint32_t>(cfg.num_slices, 0)};
    enumerate(0, cur);
    for (std::size_t i = 0; i < states_.size(); ++i) index_.emplace(states_[i].key(), i);
  }

  const std::vector<SliceState>& states() const noexcept { return states_; }
  std::size_t index(const SliceState& s) const { return index_.at(s.key()); }

 private:
  void enumerate(std::size_t k, SliceState& cur) {
    if (k == cfg_.num_slices) {
      if (states_.size() >= cfg_.state_cap) {
        std::ostringstream msg;
        msg << "admission state space exceeds state_cap = " << cfg_.state_cap;
        throw Error(ErrorCode::StateSpaceTooLarge, msg.str());
      }
      states_.push_back(cur);
      return;
    }
    for (std::uint32_t q = 0; q <= cfg_.queue_cap[k]; ++q) {
      cur.queue[k] = q;
      for (std::uint32_t n = 0; n <= max_occ_[k]; ++n) {
        cur.busy[k] = n;
        // Demands are nonnegative, so an overflowing prefix stays infeasible.
        if (!fits(cfg_, cur.busy)) break;
        enumerate(k + 1, cur);
      }
      cur.busy[k] = 0;
    }
    cur.queue[k] = 0;
  }

  const AdmissionConfig& cfg_;
  const std::vector<std::uint32_t>& max_occ_;
  std::vector<SliceState> states_;
  std::map<std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>>, std::size_t> index_;
};

}  // namespace

AdmissionConfig read_admission_config(std::istream& in) {
  AdmissionConfig cfg;
  for (const auto& [key, value] : kv::read(in, "admission config")) {
    if (key == "num_slices") {
      cfg.num_slices = kv::count(key, value);
    } else if (key == "resources") {
      cfg.resources = kv::counts(key, value);
    } else if (key == "demand") {
      cfg.demand.clear();
      for (const auto& row : kv::split(value, ';')) cfg.demand.push_back(kv::counts(key, row));
    } else if (key == "arrival_rate") {
      cfg.arrival_rate = kv::reals(key, value);
    } else if (key == "service_rate") {
      cfg.service_rate = kv::reals(key, value);
    } else if (key == "queue_cap") {
      cfg.queue_cap = kv::counts(key, value);
    } else if (key == "profit") {
      cfg.profit = kv::reals(key, value);
    } else if (key == "timeout_penalty") {
      cfg.timeout_penalty = kv::reals(key, value);
    } else if (key == "timeout_rate") {
      cfg.timeout_rate = kv::reals(key, value);
    } else if (key == "max_admit") {
      const auto v = kv::count(key, value);
      if (v > UINT32_MAX) kv::bad_value(key, value, "a 32-bit count");
      cfg.max_admit = static_cast<std::uint32_t>(v);
    } else if (key == "gamma") {
      cfg.gamma = kv::real(key, value);
    } else if (key == "state_cap") {
      cfg.state_cap = kv::count(key, value);
    } else {
      throw Error(ErrorCode::Parse, "admission config: unknown key `" + key + "`");
    }
  }
  return cfg;
}

void check_admission_config(const AdmissionConfig& cfg) {
  const auto K = cfg.num_slices;
  if (K == 0) throw Error(ErrorCode::InvalidArgument, "num_slices must be positive");
  check_length("demand", cfg.demand, K);
  check_length("arrival_rate", cfg.arrival_rate, K);
  check_length("service_rate", cfg.service_rate, K);
  check_length("queue_cap", cfg.queue_cap, K);
  check_length("profit", cfg.profit, K);
  check_length("timeout_penalty", cfg.timeout_penalty, K);
  check_length("timeout_rate", cfg.timeout_rate, K);
  for (std::size_t k = 0; k < K; ++k) {
    if (cfg.demand[k].size() != cfg.resources.size()) {
      std::ostringstream msg;
      msg << "demand row " << k << " has " << cfg.demand[k].size() << " entries for "
          << cfg.resources.size() << " resources";
      throw Error(ErrorCode::InvalidArgument, msg.str());
    }
  }
  check_each("arrival_rate", cfg.arrival_rate, [](double x) { return x > 0.0; }, "positive");
  check_each("service_rate", cfg.service_rate, [](double x) { return x > 0.0; }, "positive");
  check_each("profit", cfg.profit, [](double) { return true; }, "finite");
  check_each("timeout_penalty", cfg.timeout_penalty, [](double x) { return x >= 0.0; }, "nonnegative");
  check_each("timeout_rate", cfg.timeout_rate, [](double x) { return x >= 0.0; }, "nonnegative");
  if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) throw Error(ErrorCode::BadGamma, "gamma must lie in (0, 1)");
  if (cfg.state_cap == 0) throw Error(ErrorCode::InvalidArgument, "state_cap must be positive");

  for (std::size_t k = 0; k < K; ++k) {
    if (cfg.queue_cap[k] == 0) continue;
    const bool any_demand = std::any_of(cfg.demand[k].begin(), cfg.demand[k].end(),
                                        [](std::uint32_t d) { return d > 0; });
    if (!any_demand) {
      std::ostringstream msg;
      msg << "slice " << k << " demands no resources, so its occupancy is unbounded";
      throw Error(ErrorCode::InvalidArgument, msg.str());
    }
    for (std::size_t r = 0; r < cfg.resources.size(); ++r) {
      if (cfg.demand[k][r] > cfg.resources[r]) {
        std::ostringstream msg;
        msg << "slice " << k << " needs " << cfg.demand[k][r] << " units of resource " << r
            << " but only " << cfg.resources[r] << " exist";
        throw Error(ErrorCode::InfeasibleDemand, msg.str());
      }
    }
  }
}

TabularMdp admission_mdp(const AdmissionConfig& cfg) {
  check_admission_config(cfg);
  const auto K = cfg.num_slices;

  std::vector<std::uint32_t> max_occ(K);
  std::vector<std::uint32_t> admit_range(K);
  double lambda_total = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    max_occ[k] = max_occupancy(cfg, k);
    admit_range[k] = std::min(cfg.max_admit, cfg.queue_cap[k]) + 1;
    lambda_total += cfg.arrival_rate[k] + max_occ[k] * cfg.service_rate[k] +
                    cfg.queue_cap[k] * cfg.timeout_rate[k];
  }

  const StateSpace space(cfg, max_occ);
  const auto& states = space.states();
  const std::size_t S = states.size();
  std::size_t A = 1;
  for (auto r : admit_range) A *= r;

  std::vector<double> rewards(S * A, 0.0);
  std::vector<double> transitions(S * A * S, 0.0);
  std::vector<std::uint32_t> admit(K);

  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      std::size_t code = a;
      for (std::size_t k = K; k-- > 0;) {
        admit[k] = static_cast<std::uint32_t>(code % admit_range[k]);
        code /= admit_range[k];
      }
      SliceState post = states[s];
      bool feasible = true;
      for (std::size_t k = 0; k < K; ++k) {
        if (admit[k] > post.queue[k]) feasible = false;
        post.busy[k] += admit[k];
      }
      feasible = feasible && fits(cfg, post.busy);
      if (!feasible) {
        post = states[s];
        std::fill(admit.begin(), admit.end(), 0u);
      } else {
        for (std::size_t k = 0; k < K; ++k) post.queue[k] -= admit[k];
      }

      double reward = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        reward += cfg.profit[k] * admit[k];
        reward -= cfg.timeout_penalty[k] * post.queue[k] * cfg.timeout_rate[k] / lambda_total;
      }
      rewards[s * A + a] = reward;

      double* row = &transitions[(s * A + a) * S];
      const std::size_t here = space.index(post);
      double used = 0.0;
      auto add = [&](const SliceState& next, double rate) {
        if (rate <= 0.0) return;
        row[space.index(next)] += rate / lambda_total;
        used += rate;
      };
      for (std::size_t k = 0; k < K; ++k) {
        SliceState next = post;
        if (post.queue[k] < cfg.queue_cap[k]) ++next.queue[k];
        add(next, cfg.arrival_rate[k]);
        if (post.busy[k] > 0) {
          next = post;
          --next.busy[k];
          add(next, post.busy[k] * cfg.service_rate[k]);
        }
        if (post.queue[k] > 0) {
          next = post;
          --next.queue[k];
          add(next, post.queue[k] * cfg.timeout_rate[k]);
        }
      }
      row[here] += std::max(0.0, lambda_total - used) / lambda_total;
    }
  }
  return validate_mdp(S, A, cfg.gamma, std::move(rewards), std::move(transitions));
}

TabularMdp random_mdp(std::size_t num_states, std::size_t num_actions, double gamma, double sparsity,
                      std::uint64_t seed) {
  if (num_states == 0 || num_actions == 0)
    throw Error(ErrorCode::InvalidArgument, "random_mdp needs at least one state and one action");
  if (!(sparsity > 0.0 && sparsity <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "sparsity must lie in (0, 1]");
  if (!(gamma > 0.0 && gamma < 1.0)) throw Error(ErrorCode::BadGamma, "gamma must lie in (0, 1)");

  const auto S = num_states;
  const auto A = num_actions;
  const auto support = std::max<std::size_t>(
      1, std::min<std::size_t>(S, static_cast<std::size_t>(std::llround(sparsity * S))));

  std::vector<double> rewards(S * A);
  Rng reward_rng(stream_seed(seed, {0}));
  for (auto& r : rewards) r = reward_rng.uniform();

  std::vector<double> transitions(S * A * S, 0.0);
  std::vector<std::size_t> order(S);
  for (std::size_t sa = 0; sa < S * A; ++sa) {
    Rng rng(stream_seed(seed, {1, sa}));
    for (std::size_t t = 0; t < S; ++t) order[t] = t;
    for (std::size_t i = 0; i < support; ++i) std::swap(order[i], order[i + rng.index(S - i)]);
    double total = 0.0;
    double* row = &transitions[sa * S];
    for (std::size_t i = 0; i < support; ++i) {
      // A zero weight could shrink the support below one state.
      const double w = rng.exponential() + 1e-12;
      row[order[i]] = w;
      total += w;
    }
    for (std::size_t i = 0; i < support; ++i) row[order[i]] /= total;
  }
  return validate_mdp(S, A, gamma, std::move(rewards), std::move(transitions));
}

TabularMdp perturb(const TabularMdp& mdp, double reward_noise, double transition_noise,
                   std::uint64_t seed) {
  if (!(reward_noise >= 0.0) || !std::isfinite(reward_noise))
    throw Error(ErrorCode::InvalidArgument, "reward_noise must be finite and nonnegative");
  if (!(transition_noise >= 0.0) || !std::isfinite(transition_noise))
    throw Error(ErrorCode::InvalidArgument, "transition_noise must be finite and nonnegative");
  if (reward_noise == 0.0 && transition_noise == 0.0) return mdp;

  const auto S = mdp.num_states();
  const auto A = mdp.num_actions();
  std::vector<double> rewards = mdp.rewards();
  std::vector<double> transitions = mdp.transitions();

  if (reward_noise > 0.0) {
    Rng rng(stream_seed(seed, {0}));
    for (auto& r : rewards) r += rng.uniform(-reward_noise, reward_noise);
  }
  if (transition_noise > 0.0) {
    const double eta_max = std::min(1.0, transition_noise);
    std::vector<double> noise(S);
    for (std::size_t sa = 0; sa < S * A; ++sa) {
      Rng rng(stream_seed(seed, {1, sa}));
      const double eta = rng.uniform(0.0, eta_max);
      double total = 0.0;
      for (auto& w : noise) total += (w = rng.exponential());
      if (!(total > 0.0)) {
        std::fill(noise.begin(), noise.end(), 1.0);
        total = static_cast<double>(S);
      }
      double* row = &transitions[sa * S];
      for (std::size_t t = 0; t < S; ++t) row[t] = (1.0 - eta) * row[t] + eta * noise[t] / total;
    }
  }
  return validate_mdp(S, A, mdp.gamma(), std::move(rewards), std::move(transitions));
}

}  // namespace dtbsm
