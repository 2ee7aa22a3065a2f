#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "dtbsm/envgen.hpp"
#include "dtbsm/error.hpp"
#include "dtbsm/metrics.hpp"
#include "dtbsm/transport.hpp"

using namespace dtbsm;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an exception");
  return ErrorCode::InvalidArgument;
}

AdmissionConfig one_slice(std::uint32_t capacity, std::uint32_t queue_cap, double lambda, double mu) {
  AdmissionConfig cfg;
  cfg.num_slices = 1;
  cfg.resources = {capacity};
  cfg.demand = {{1}};
  cfg.arrival_rate = {lambda};
  cfg.service_rate = {mu};
  cfg.queue_cap = {queue_cap};
  cfg.profit = {2.0};
  cfg.timeout_penalty = {0.0};
  cfg.timeout_rate = {0.0};
  return cfg;
}

}  // namespace

TEST_CASE("default admission MDP") {
  auto mdp = admission_mdp(AdmissionConfig{});
  CHECK(mdp.num_states() == 208);
  CHECK(mdp.num_actions() == 8);
  CHECK(mdp.gamma() == 0.9);
  CHECK(admission_mdp(AdmissionConfig{}) == mdp);
}

TEST_CASE("empty system is a single absorbing state") {
  auto cfg = one_slice(0, 0, 1.0, 1.0);
  auto mdp = admission_mdp(cfg);
  CHECK(mdp.num_states() == 1);
  CHECK(mdp.num_actions() == 1);
  CHECK(mdp.reward(0, 0) == 0.0);
  CHECK(mdp.transition(0, 0, 0) == 1.0);
}

TEST_CASE("one-slice birth-death chain matches hand uniformization") {
  // States (q, n): 0=(0,0) 1=(0,1) 2=(1,0) 3=(1,1). Lambda = lambda + mu = 2.
  auto mdp = admission_mdp(one_slice(1, 1, 1.0, 1.0));
  REQUIRE(mdp.num_states() == 4);
  REQUIRE(mdp.num_actions() == 2);
  const std::vector<std::vector<double>> wait{
      {0.5, 0.0, 0.5, 0.0},
      {0.5, 0.0, 0.0, 0.5},
      {0.0, 0.0, 1.0, 0.0},
      {0.0, 0.0, 0.5, 0.5},
  };
  // Admitting from (1,0) moves to (0,1) before the event.
  const std::vector<std::vector<double>> admit{wait[0], wait[1], wait[1], wait[3]};
  for (std::size_t s = 0; s < 4; ++s) {
    for (std::size_t t = 0; t < 4; ++t) {
      CHECK(std::abs(mdp.transition(s, 0, t) - wait[s][t]) <= 1e-12);
      CHECK(std::abs(mdp.transition(s, 1, t) - admit[s][t]) <= 1e-12);
    }
  }
  CHECK(mdp.reward(2, 1) == 2.0);
  for (std::size_t s : {0, 1, 3}) CHECK(mdp.reward(s, 1) == 0.0);
  for (std::size_t s = 0; s < 4; ++s) CHECK(mdp.reward(s, 0) == 0.0);
}

TEST_CASE("uniformized jump probabilities follow the rates") {
  // lambda=0.7, mu=0.4, theta=0.3, queue 2, capacity 2: Lambda = 0.7 + 2*0.4 + 2*0.3 = 2.1.
  auto cfg = one_slice(2, 2, 0.7, 0.4);
  cfg.timeout_rate = {0.3};
  cfg.timeout_penalty = {1.5};
  auto mdp = admission_mdp(cfg);
  REQUIRE(mdp.num_states() == 9);
  const double L = 2.1;
  auto index = [](int q, int n) { return static_cast<std::size_t>(3 * q + n); };
  for (int q = 0; q <= 2; ++q) {
    for (int n = 0; n <= 2; ++n) {
      const auto s = index(q, n);
      std::vector<double> expected(9, 0.0);
      const double arrival = 0.7 / L;
      const double departure = n * 0.4 / L;
      const double timeout = q * 0.3 / L;
      expected[index(std::min(q + 1, 2), n)] += arrival;
      if (n > 0) expected[index(q, n - 1)] += departure;
      if (q > 0) expected[index(q - 1, n)] += timeout;
      expected[s] += 1.0 - arrival - departure - timeout;
      for (std::size_t t = 0; t < 9; ++t) CHECK(std::abs(mdp.transition(s, 0, t) - expected[t]) <= 1e-12);
      CHECK(std::abs(mdp.reward(s, 0) + 1.5 * q * 0.3 / L) <= 1e-12);
    }
  }
}

TEST_CASE("admission config validation") {
  SUBCASE("mismatched lengths") {
    AdmissionConfig cfg;
    cfg.profit = {1.0};
    CHECK(code_of([&] { admission_mdp(cfg); }) == ErrorCode::InvalidArgument);
  }
  SUBCASE("rates must be positive") {
    AdmissionConfig cfg;
    cfg.service_rate[1] = 0.0;
    CHECK(code_of([&] { admission_mdp(cfg); }) == ErrorCode::InvalidArgument);
  }
  SUBCASE("demand above capacity") {
    AdmissionConfig cfg;
    cfg.demand[2][1] = 7;
    CHECK(code_of([&] { admission_mdp(cfg); }) == ErrorCode::InfeasibleDemand);
  }
  SUBCASE("state cap") {
    AdmissionConfig cfg;
    cfg.state_cap = 100;
    CHECK(code_of([&] { admission_mdp(cfg); }) == ErrorCode::StateSpaceTooLarge);
  }
  SUBCASE("gamma") {
    AdmissionConfig cfg;
    cfg.gamma = 1.0;
    CHECK(code_of([&] { admission_mdp(cfg); }) == ErrorCode::BadGamma);
  }
}

TEST_CASE("admission config file") {
  std::istringstream in(
      "# two slices\n"
      "num_slices = 2\n"
      "resources = 4, 4\n"
      "demand = 1,2; 2,1\n"
      "arrival_rate = 0.5, 0.5\n"
      "service_rate = 0.4, 0.6\n"
      "queue_cap = 2, 1\n"
      "; a comment\n"
      "profit = 1, 3\n"
      "timeout_penalty = 0.5, 0.5\n"
      "timeout_rate = 0.1, 0.1\n"
      "max_admit = 2\n"
      "gamma = 0.8\n");
  auto cfg = read_admission_config(in);
  CHECK(cfg.num_slices == 2);
  CHECK(cfg.demand == std::vector<std::vector<std::uint32_t>>{{1, 2}, {2, 1}});
  CHECK(cfg.max_admit == 2);
  CHECK(cfg.gamma == 0.8);
  auto mdp = admission_mdp(cfg);
  CHECK(mdp.num_actions() == 3 * 2);

  std::istringstream unknown("bogus = 1\n");
  CHECK(code_of([&] { read_admission_config(unknown); }) == ErrorCode::Parse);
  std::istringstream duplicate("gamma = 0.5\ngamma = 0.6\n");
  CHECK(code_of([&] { read_admission_config(duplicate); }) == ErrorCode::Parse);
  std::istringstream bad_number("resources = 1, x\n");
  CHECK(code_of([&] { read_admission_config(bad_number); }) == ErrorCode::Parse);
}

TEST_CASE("optimal admission favours the most profitable slice when one slot is left") {
  AdmissionConfig cfg;
  cfg.resources = {2, 2, 2};
  cfg.demand = {{1, 1, 1}, {1, 1, 1}, {1, 1, 1}};
  cfg.arrival_rate = {0.5, 0.5, 0.5};
  cfg.service_rate = {0.4, 0.4, 0.4};
  cfg.queue_cap = {3, 3, 3};
  cfg.profit = {5.0, 1.0, 3.0};
  cfg.timeout_penalty = {0.5, 0.5, 0.5};
  cfg.timeout_rate = {0.2, 0.2, 0.2};
  auto mdp = admission_mdp(cfg);
  CHECK(mdp.num_states() == 640);
  auto pi = greedy_policy(mdp, value_iteration(mdp));

  // Rebuild the lexicographic numbering over (q0, n0, q1, n1, q2, n2).
  std::size_t index = 0;
  std::size_t checked = 0;
  for (int q0 = 0; q0 <= 3; ++q0)
    for (int n0 = 0; n0 <= 2; ++n0)
      for (int q1 = 0; q1 <= 3; ++q1)
        for (int n1 = 0; n1 <= 2; ++n1)
          for (int q2 = 0; q2 <= 3; ++q2)
            for (int n2 = 0; n2 <= 2; ++n2) {
              if (n0 + n1 + n2 > 2) continue;
              if (n0 + n1 + n2 == 1 && q0 > 0 && q1 > 0 && q2 > 0) {
                CHECK(pi(index) == 4);  // admit slice 0 only
                ++checked;
              }
              ++index;
            }
  CHECK(index == 640);
  CHECK(checked == 3 * 27);
}

TEST_CASE("random_mdp") {
  SUBCASE("minimum support still gives stochastic rows") {
    auto mdp = random_mdp(10, 2, 0.9, 0.1, 1);
    for (std::size_t s = 0; s < 10; ++s) {
      for (std::size_t a = 0; a < 2; ++a) {
        auto row = mdp.row(s, a);
        CHECK(std::count_if(row.begin(), row.end(), [](double x) { return x > 0.0; }) == 1);
      }
    }
  }
  SUBCASE("deterministic per seed") {
    CHECK(random_mdp(7, 3, 0.5, 0.5, 99) == random_mdp(7, 3, 0.5, 0.5, 99));
    CHECK_FALSE(random_mdp(7, 3, 0.5, 0.5, 99) == random_mdp(7, 3, 0.5, 0.5, 100));
  }
  SUBCASE("rewards in the unit interval") {
    auto mdp = random_mdp(20, 4, 0.5, 1.0, 3);
    CHECK(mdp.min_reward() >= 0.0);
    CHECK(mdp.max_reward() < 1.0);
  }
  SUBCASE("a thousand seeds revalidate") {
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      const std::size_t S = 1 + seed % 12;
      auto mdp = random_mdp(S, 1 + seed % 4, 0.9, 0.1 + 0.9 * static_cast<double>(seed % 10) / 9.0, seed);
      auto again = validate_mdp(S, mdp.num_actions(), mdp.gamma(), mdp.rewards(), mdp.transitions());
      CHECK(again == mdp);
    }
  }
  SUBCASE("argument checks") {
    CHECK(code_of([] { random_mdp(0, 1, 0.9, 1.0, 0); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { random_mdp(3, 1, 0.9, 0.0, 0); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { random_mdp(3, 1, 1.5, 1.0, 0); }) == ErrorCode::BadGamma);
  }
}

TEST_CASE("perturb") {
  auto base = random_mdp(6, 3, 0.9, 0.6, 12);
  SUBCASE("zero noise is the identity") {
    CHECK(perturb(base, 0.0, 0.0, 5) == base);
  }
  SUBCASE("reward noise only") {
    auto twin = perturb(base, 0.2, 0.0, 6);
    CHECK(twin.transitions() == base.transitions());
    double worst = 0.0;
    for (std::size_t k = 0; k < base.rewards().size(); ++k)
      worst = std::max(worst, std::abs(twin.rewards()[k] - base.rewards()[k]));
    CHECK(worst <= 0.2);
    CHECK(worst > 0.0);
    auto dtv = dtv_metric(MdpPair::create(base, twin));
    for (std::size_t s = 0; s < 6; ++s) {
      double gap = 0.0;
      for (std::size_t a = 0; a < 3; ++a) gap = std::max(gap, std::abs(twin.reward(s, a) - base.reward(s, a)));
      CHECK(dtv.d_tv[s] == gap);
      CHECK(dtv.d_tv[s] <= 0.2);
    }
  }
  SUBCASE("transition noise bounds the TV distance of every row") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      for (double noise : {0.01, 0.1, 0.5, 1.0, 3.0}) {
        auto twin = perturb(base, 0.0, noise, seed);
        CHECK(twin.rewards() == base.rewards());
        for (std::size_t s = 0; s < 6; ++s)
          for (std::size_t a = 0; a < 3; ++a) CHECK(tv_distance(base.row(s, a), twin.row(s, a)) <= std::min(noise, 1.0) + 1e-9);
      }
    }
  }
  SUBCASE("deterministic per seed") {
    CHECK(perturb(base, 0.3, 0.3, 8) == perturb(base, 0.3, 0.3, 8));
    CHECK_FALSE(perturb(base, 0.3, 0.3, 8) == perturb(base, 0.3, 0.3, 9));
  }
  SUBCASE("negative noise") {
    CHECK(code_of([&] { perturb(base, -0.1, 0.0, 0); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([&] { perturb(base, 0.0, NAN, 0); }) == ErrorCode::InvalidArgument);
  }
}
