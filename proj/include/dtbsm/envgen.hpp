#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <vector>

#include "dtbsm/mdp.hpp"

namespace dtbsm {

/// Sliced-network admission control. Defaults describe three slices
/// (eMBB, mMTC, URLLC) sharing radio, computing and storage.
struct AdmissionConfig {
  std::size_t num_slices = 3;
  std::vector<std::uint32_t> resources{6, 6, 6};
  /// demand[k][r]: units of resource r held by one service of slice k.
  std::vector<std::vector<std::uint32_t>> demand{{2, 1, 1}, {1, 1, 2}, {1, 2, 1}};
  std::vector<double> arrival_rate{0.6, 0.8, 0.4};
  std::vector<double> service_rate{0.3, 0.5, 0.6};
  std::vector<std::uint32_t> queue_cap{1, 1, 1};
  std::vector<double> profit{3.0, 1.0, 2.0};
  std::vector<double> timeout_penalty{1.0, 0.5, 2.0};
  /// Rate at which each waiting request expires.
  std::vector<double> timeout_rate{0.2, 0.2, 0.5};
  /// Largest per-slice admission count in one decision epoch.
  std::uint32_t max_admit = 1;
  double gamma = 0.9;
  std::size_t state_cap = 20000;
};

/// Reads `key = value` lines (`#` or `;` starts a comment line). Vectors are
/// comma separated; demand rows are separated by `;`. Omitted keys keep their
/// defaults, but per-slice vectors must match num_slices. Throws Parse.
AdmissionConfig read_admission_config(std::istream& in);

/// Throws InvalidArgument for malformed fields and InfeasibleDemand when a
/// slice with a nonzero queue cannot fit even into an empty system.
void check_admission_config(const AdmissionConfig& cfg);

/**
 * Uniformized admission-control MDP.
 *
 * State: per-slice (queue length q_k, ongoing services n_k) with the
 * occupancy n respecting every resource capacity. States are numbered in
 * lexicographic order of (q_0, n_0, q_1, n_1, ...).
 *
 * Action: per-slice admission counts b_k in {0..min(max_admit, queue_cap_k)},
 * numbered lexicographically with slice 0 most significant. An action that
 * admits more than is queued or overflows a resource behaves exactly like
 * the no-admit action.
 *
 * One epoch: admit (q -> q - b, n -> n + b), then a single event of the
 * uniformized chain with rate Lambda = sum_k (lambda_k + maxocc_k mu_k +
 * queue_cap_k theta_k): an arrival (blocked at a full queue), a departure, a
 * timeout from the queue, or a self-loop for the remaining rate.
 *
 * Reward: sum_k profit_k b_k - sum_k penalty_k q'_k theta_k / Lambda, the
 * admission profit less the expected timeout loss of the epoch.
 */
TabularMdp admission_mdp(const AdmissionConfig& cfg);

/// Rewards uniform in [0, 1]; each row puts exponential weights on
/// max(1, round(sparsity * S)) distinct states chosen uniformly.
TabularMdp random_mdp(std::size_t num_states, std::size_t num_actions, double gamma, double sparsity,
                      std::uint64_t seed);

/// Digital-twin style copy of `mdp`: R' = R + U[-reward_noise, reward_noise]
/// and P' = (1 - eta) P + eta Q with eta ~ U[0, transition_noise] and Q a
/// random stochastic row, so TV(P, P') <= eta. Zero noise returns `mdp` unchanged.
TabularMdp perturb(const TabularMdp& mdp, double reward_noise, double transition_noise,
                   std::uint64_t seed);

}  // namespace dtbsm
