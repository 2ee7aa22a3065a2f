#pragma once

// Seeded transport instances whose masses are dyadic, so the same numbers are
// exact both as doubles and as rationals.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dtbsm/random.hpp"
#include "support/oracles.hpp"

namespace cases {

inline constexpr std::uint64_t kTransportSeed = 0x7A45B0C7ULL;

struct TransportCase {
  std::size_t n = 0;
  std::vector<double> p;
  std::vector<double> q;
  std::vector<double> cost;
};

/// Random masses in units of 1/1024; roughly one entry in four is forced to zero.
inline std::vector<double> dyadic_distribution(std::size_t n, dtbsm::Rng& rng) {
  std::vector<std::uint64_t> units(n, 0);
  std::vector<bool> open(n);
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    open[i] = rng.index(4) != 0;
    any = any || open[i];
  }
  if (!any) open[rng.index(n)] = true;
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < n; ++i)
    if (open[i]) support.push_back(i);
  for (int k = 0; k < 1024; ++k) ++units[support[rng.index(support.size())]];
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<double>(units[i]) / 1024.0;
  return p;
}

inline TransportCase transport_case(std::size_t index, std::size_t max_size = 5) {
  dtbsm::Rng rng(dtbsm::stream_seed(kTransportSeed, {index}));
  TransportCase c;
  c.n = 1 + rng.index(max_size);
  c.p = dyadic_distribution(c.n, rng);
  c.q = dyadic_distribution(c.n, rng);
  c.cost.resize(c.n * c.n);
  const bool integral = rng.index(3) == 0;
  for (auto& x : c.cost) x = integral ? static_cast<double>(rng.index(4)) : rng.uniform(0.0, 5.0);
  return c;
}

inline oracle::Rational exact_w1(const TransportCase& c) {
  std::vector<oracle::Rational> p(c.p.begin(), c.p.end());
  std::vector<oracle::Rational> q(c.q.begin(), c.q.end());
  std::vector<oracle::Rational> cost(c.cost.begin(), c.cost.end());
  return oracle::exact_w1(p, q, cost);
}

}  // namespace cases
