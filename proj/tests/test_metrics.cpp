#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dtbsm/envgen.hpp"
#include "dtbsm/error.hpp"
#include "dtbsm/metrics.hpp"
#include "support/corpus.hpp"
#include "support/oracles.hpp"
#include "support/transport_cases.hpp"

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

TabularMdp with_rewards(const TabularMdp& base, std::vector<double> rewards) {
  return validate_mdp(base.num_states(), base.num_actions(), base.gamma(), std::move(rewards), base.transitions());
}

/// MDP whose transition rows are dyadic, for exact rational comparisons.
TabularMdp dyadic_mdp(std::size_t S, std::size_t A, double gamma, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> rewards(S * A);
  for (auto& r : rewards) r = static_cast<double>(rng.index(64)) / 16.0;
  std::vector<double> transitions;
  for (std::size_t k = 0; k < S * A; ++k) {
    auto row = cases::dyadic_distribution(S, rng);
    transitions.insert(transitions.end(), row.begin(), row.end());
  }
  return validate_mdp(S, A, gamma, rewards, transitions);
}

double brute_rmax(const MdpPair& pair) {
  double m = 0.0;
  for (std::size_t i = 0; i < pair.num_states(); ++i)
    for (std::size_t j = 0; j < pair.num_states(); ++j)
      for (std::size_t a = 0; a < pair.num_actions(); ++a)
        m = std::max(m, std::abs(pair.real().reward(i, a) - pair.twin().reward(j, a)));
  return m;
}

std::vector<double> brute_dtv(const MdpPair& pair) {
  const double r_max = brute_rmax(pair);
  const double g = pair.gamma();
  std::vector<double> out(pair.num_states(), 0.0);
  for (std::size_t i = 0; i < pair.num_states(); ++i) {
    for (std::size_t a = 0; a < pair.num_actions(); ++a) {
      double l1 = 0.0;
      for (std::size_t t = 0; t < pair.num_states(); ++t)
        l1 += std::abs(pair.real().transition(i, a, t) - pair.twin().transition(i, a, t));
      const double value = std::abs(pair.real().reward(i, a) - pair.twin().reward(i, a)) + g * r_max / (1 - g) * 0.5 * l1;
      out[i] = std::max(out[i], value);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("pairs must agree on shape and discount") {
  auto a = random_mdp(3, 2, 0.9, 1.0, 1);
  CHECK(code_of([&] { MdpPair::create(a, random_mdp(4, 2, 0.9, 1.0, 2)); }) == ErrorCode::ShapeMismatch);
  CHECK(code_of([&] { MdpPair::create(a, random_mdp(3, 3, 0.9, 1.0, 2)); }) == ErrorCode::ShapeMismatch);
  CHECK(code_of([&] { MdpPair::create(a, random_mdp(3, 2, 0.8, 1.0, 2)); }) == ErrorCode::GammaMismatch);
}

TEST_CASE("compute_rmax") {
  auto base = random_mdp(4, 2, 0.9, 1.0, 10);
  SUBCASE("identical MDPs still compare distinct states") {
    auto pair = MdpPair::create(base, base);
    CHECK(compute_rmax(pair) == brute_rmax(pair));
    CHECK(compute_rmax(pair) > 0.0);
  }
  SUBCASE("constant rewards") {
    auto c = with_rewards(base, std::vector<double>(8, 0.3));
    CHECK(compute_rmax(MdpPair::create(c, c)) == 0.0);
  }
  SUBCASE("uniform reward shift") {
    auto real = with_rewards(base, std::vector<double>(8, 1.0));
    auto twin = with_rewards(base, std::vector<double>(8, 1.5));
    CHECK(compute_rmax(MdpPair::create(real, twin)) == 0.5);
  }
  SUBCASE("matches a brute-force scan on the corpus") {
    for (std::size_t k = 0; k < 200; ++k) {
      auto pair = corpus::pair(k);
      CHECK(compute_rmax(pair) == brute_rmax(pair));
    }
  }
}

TEST_CASE("dtbsm examples") {
  SUBCASE("constant rewards collapse to zero") {
    auto c = with_rewards(random_mdp(4, 2, 0.9, 1.0, 3), std::vector<double>(8, 2.0));
    auto m = dtbsm::dtbsm(MdpPair::create(c, c));
    CHECK(m.iterations == 1);
    CHECK(m.r_max == 0.0);
    CHECK(m.apriori_error == 0.0);
    for (double x : m.d) CHECK(x == 0.0);
  }
  SUBCASE("the first iterate is the reward gap") {
    for (std::size_t k = 0; k < 50; ++k) {
      auto pair = corpus::pair(k);
      auto m = dtbsm::dtbsm(pair, MetricStoppingRule::steps(1));
      for (std::size_t i = 0; i < pair.num_states(); ++i) {
        for (std::size_t j = 0; j < pair.num_states(); ++j) {
          double gap = 0.0;
          for (std::size_t a = 0; a < pair.num_actions(); ++a)
            gap = std::max(gap, std::abs(pair.real().reward(i, a) - pair.twin().reward(j, a)));
          CHECK(m(i, j) == gap);
        }
      }
    }
  }
  SUBCASE("second iterate against the rational transport oracle") {
    auto real = dyadic_mdp(3, 2, 0.9, 71);
    auto twin = dyadic_mdp(3, 2, 0.9, 72);
    auto pair = MdpPair::create(real, twin);
    auto d1 = dtbsm::dtbsm(pair, MetricStoppingRule::steps(1));
    auto d2 = dtbsm::dtbsm(pair, MetricStoppingRule::steps(2));
    std::vector<oracle::Rational> cost(d1.d.begin(), d1.d.end());
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        double best = 0.0;
        for (std::size_t a = 0; a < 2; ++a) {
          std::vector<oracle::Rational> p(real.row(i, a).begin(), real.row(i, a).end());
          std::vector<oracle::Rational> q(twin.row(j, a).begin(), twin.row(j, a).end());
          const double w = oracle::exact_w1(p, q, cost).convert_to<double>();
          best = std::max(best, std::abs(real.reward(i, a) - twin.reward(j, a)) + 0.9 * w);
        }
        CHECK(std::abs(d2(i, j) - best) <= 1e-12);
      }
    }
  }
  SUBCASE("tolerance rule stays inside the envelope of a longer run") {
    auto pair = MdpPair::create(random_mdp(3, 2, 0.9, 1.0, 99), random_mdp(3, 2, 0.9, 1.0, 100));
    auto m = dtbsm::dtbsm(pair, MetricStoppingRule::tolerance(1e-6));
    CHECK(m.apriori_error <= 1e-6);
    CHECK(m.iterations == iterations_for_error(0.9, m.r_max, 1e-6));
    auto longer = dtbsm::dtbsm(pair, MetricStoppingRule::steps(4 * m.iterations));
    for (std::size_t k = 0; k < m.d.size(); ++k) {
      CHECK(longer.d[k] >= m.d[k] - 1e-12);
      CHECK(longer.d[k] <= m.d[k] + m.apriori_error + 1e-12);
    }
  }
}

TEST_CASE("iteration count for a target error") {
  CHECK(iterations_for_error(0.5, 1.0, 1e-3) == 11);
  CHECK(iterations_for_error(0.9, 0.0, 1e-3) == 1);
  CHECK(iterations_for_error(0.9, 100.0, 1e6) == 1);
  for (double g : {0.3, 0.5, 0.9, 0.99}) {
    for (double delta : {1e-2, 1e-6, 1e-9}) {
      const auto n = iterations_for_error(g, 2.0, delta);
      CHECK(apriori_error(g, 2.0, n) <= delta);
      if (n > 1) CHECK(apriori_error(g, 2.0, n - 1) > delta);
    }
  }
  CHECK(code_of([] { iterations_for_error(0.9, 1.0, 0.0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("iterates are monotone and stay in the codomain") {
  for (std::size_t k = 0; k < 60; ++k) {
    auto pair = corpus::pair(k);
    DtbsmIteration it(pair, 1);
    const double cap = it.current().r_max / (1.0 - pair.gamma());
    std::vector<double> previous = it.current().d;
    for (int n = 0; n < 25; ++n) {
      it.step();
      for (std::size_t e = 0; e < previous.size(); ++e) {
        CHECK(it.current().d[e] >= previous[e] - 1e-12);
        CHECK(it.current().d[e] >= 0.0);
        CHECK(it.current().d[e] <= cap);
      }
      previous = it.current().d;
    }
  }
}

TEST_CASE("thread count does not change a single bit") {
  auto pair = MdpPair::create(random_mdp(24, 3, 0.9, 0.4, 5), random_mdp(24, 3, 0.9, 0.4, 6));
  DtbsmIteration serial(pair, 1);
  DtbsmIteration parallel(pair, 4);
  for (int n = 0; n < 6; ++n) {
    serial.step();
    parallel.step();
  }
  CHECK(serial.current().d == parallel.current().d);
}

TEST_CASE("dtv metric") {
  auto base = random_mdp(5, 3, 0.9, 0.6, 20);
  SUBCASE("identical pair") {
    auto m = dtv_metric(MdpPair::create(base, base));
    for (double x : m.d_tv) CHECK(x == 0.0);
  }
  SUBCASE("one reward changed") {
    auto rewards = base.rewards();
    rewards[2 * 3 + 1] += 0.25;
    auto m = dtv_metric(MdpPair::create(base, with_rewards(base, rewards)));
    for (std::size_t i = 0; i < 5; ++i) CHECK(m.d_tv[i] == doctest::Approx(i == 2 ? 0.25 : 0.0).epsilon(1e-14));
  }
  SUBCASE("matches the formula evaluated with naive loops") {
    for (std::size_t k = 0; k < 300; ++k) {
      auto pair = corpus::pair(k);
      auto m = dtv_metric(pair);
      auto expected = brute_dtv(pair);
      for (std::size_t i = 0; i < expected.size(); ++i) CHECK(std::abs(m.d_tv[i] - expected[i]) <= 1e-12);
    }
  }
  SUBCASE("dominates the diagonal reward gap") {
    for (std::size_t k = 0; k < 100; ++k) {
      auto pair = corpus::pair(k);
      auto m = dtv_metric(pair);
      for (std::size_t i = 0; i < pair.num_states(); ++i)
        for (std::size_t a = 0; a < pair.num_actions(); ++a)
          CHECK(m.d_tv[i] >= std::abs(pair.real().reward(i, a) - pair.twin().reward(i, a)));
    }
  }
}

TEST_CASE("transfer bounds") {
  auto base = random_mdp(5, 2, 0.9, 0.7, 31);
  auto same = MdpPair::create(base, base);
  SUBCASE("identical pair with the optimal policy") {
    auto pi = greedy_policy(base, value_iteration(base));
    auto r = theorem1_bounds(same, pi);
    CHECK(r.actual_regret <= 1e-8);
    CHECK(r.dt_suboptimality <= 1e-8);
    CHECK(r.max_dtv_diag == 0.0);
    CHECK(r.bound_tv <= 1e-6);
    REQUIRE(r.bound_bsm.has_value());
    CHECK(*r.bound_bsm <= 2.0 / (1 - 0.9) * r.bsm_apriori_error + 1e-6);
  }
  SUBCASE("identical pair with an arbitrary policy") {
    Policy pi({1, 0, 1, 1, 0});
    auto r = theorem1_bounds(same, pi);
    CHECK(r.actual_regret == r.dt_suboptimality);
    CHECK(r.bound_tv == doctest::Approx(19.0 * r.dt_suboptimality));
    CHECK(*r.bound_bsm == doctest::Approx(19.0 * r.dt_suboptimality + 20.0 * *r.max_dbar_diag));
    CHECK(*r.max_dbar_diag <= r.bsm_apriori_error + 1e-12);
  }
  SUBCASE("skipping the bisimulation metric") {
    auto r = theorem1_bounds(same, Policy({0, 0, 0, 0, 0}), BoundOptions{MetricStoppingRule::steps(3), true});
    CHECK_FALSE(r.bound_bsm.has_value());
    CHECK_FALSE(r.max_dbar_diag.has_value());
  }
  SUBCASE("rejects foreign policies") {
    CHECK(code_of([&] { theorem1_bounds(same, Policy({0, 2, 0, 0, 0})); }) == ErrorCode::ActionOutOfRange);
  }
  SUBCASE("regret, bisimulation bound and TV bound are ordered on the corpus") {
    for (std::size_t k = 0; k < 150; ++k) {
      auto pair = corpus::pair(k);
      auto pi = greedy_policy(pair.twin(), value_iteration(pair.twin()));
      auto r = theorem1_bounds(pair, pi);
      CAPTURE(k);
      CHECK(r.actual_regret <= *r.bound_bsm + 1e-6);
      CHECK(*r.bound_bsm <= r.bound_tv + 1e-6);
    }
  }
}

TEST_CASE("value gap checker") {
  SUBCASE("constant rewards") {
    auto c = with_rewards(random_mdp(4, 2, 0.9, 1.0, 3), std::vector<double>(8, 1.0));
    auto out = check_corollary1(MdpPair::create(c, c));
    CHECK(out.passed);
    CHECK(out.checked == 16);
  }
  SUBCASE("one MDP against itself") {
    auto m = random_mdp(6, 2, 0.9, 0.5, 12);
    auto out = check_corollary1(MdpPair::create(m, m));
    CHECK(out.passed);
    CHECK(out.worst_margin >= -1e-7);
  }
  SUBCASE("reports the worst location of a planted violation") {
    MetricTable t;
    t.size = 2;
    t.d = {0.0, 1.0, 1.0, 0.0};
    std::vector<double> vr{0.0, 0.0};
    std::vector<double> vt{0.0, 5.0};
    auto out = check_corollary1(t, vr, vt);
    CHECK_FALSE(out.passed);
    CHECK(out.violations == 2);
    CHECK(out.worst_margin == -5.0);
    CHECK(out.location == std::vector<std::size_t>{1, 1});
  }
  SUBCASE("corpus") {
    for (std::size_t k = 0; k < 100; ++k) CHECK(check_corollary1(corpus::pair(k)).passed);
  }
}

TEST_CASE("quadrilateral checker") {
  SUBCASE("all indices equal") {
    auto pair = corpus::pair(3);
    auto m = dtbsm::dtbsm(pair);
    for (std::size_t i = 0; i < m.size; ++i) CHECK(3 * m(i, i) >= m(i, i));
  }
  SUBCASE("first iterate, exhaustive") {
    for (std::size_t k = 0; k < 40; ++k) {
      auto m = dtbsm::dtbsm(corpus::pair(k), MetricStoppingRule::steps(1));
      CHECK(check_quadrilateral_exhaustive(m).passed);
    }
  }
  SUBCASE("seeded 5-state pair, exhaustive") {
    auto real = random_mdp(5, 2, 0.9, 0.6, 555);
    auto pair = MdpPair::create(real, perturb(real, 0.2, 0.3, 556));
    auto out = check_quadrilateral_exhaustive(dtbsm::dtbsm(pair));
    CHECK(out.passed);
    CHECK(out.checked == 625);
  }
  SUBCASE("sampling is deterministic and finds planted violations") {
    MetricTable t;
    t.size = 3;
    t.d = {0, 0, 9, 0, 0, 0, 0, 0, 0};
    auto a = check_quadrilateral(t, 500, 7);
    auto b = check_quadrilateral(t, 500, 7);
    CHECK_FALSE(a.passed);
    CHECK(a.violations == b.violations);
    CHECK(a.location == b.location);
    CHECK(a.checked == 1000);
  }
}

TEST_CASE("tv domination checker") {
  SUBCASE("identical pair") {
    auto m = random_mdp(4, 3, 0.5, 1.0, 8);
    auto out = check_lemma6(MdpPair::create(m, m));
    CHECK(out.passed);
  }
  SUBCASE("reward-only perturbation") {
    auto m = random_mdp(5, 2, 0.9, 0.8, 9);
    auto rewards = m.rewards();
    for (auto& r : rewards) r += 0.05;
    auto pair = MdpPair::create(m, with_rewards(m, rewards));
    auto metric = dtbsm::dtbsm(pair, MetricStoppingRule::tolerance(1e-10));
    CHECK(metric.max_diagonal() <= 0.05 / (1 - 0.9) + 1e-7);
    CHECK(check_lemma6(pair).passed);
  }
  SUBCASE("corpus") {
    for (std::size_t k = 0; k < 100; ++k) CHECK(check_lemma6(corpus::pair(k)).passed);
  }
}

TEST_CASE("convergence envelope checker") {
  for (std::size_t k = 0; k < 10; ++k) {
    auto out = check_convergence_envelope(corpus::pair(k));
    CHECK(out.passed);
    CHECK(out.checked > 0);
  }
}
