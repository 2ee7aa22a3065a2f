#include "dtbsm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "dtbsm/error.hpp"
#include "dtbsm/random.hpp"
#include "dtbsm/transport.hpp"

namespace dtbsm {

MdpPair MdpPair::create(TabularMdp real, TabularMdp twin) {
  if (real.num_states() != twin.num_states() || real.num_actions() != twin.num_actions()) {
    std::ostringstream msg;
    msg << "real MDP is " << real.num_states() << " states x " << real.num_actions()
        << " actions, twin is " << twin.num_states() << " x " << twin.num_actions();
    throw Error(ErrorCode::ShapeMismatch, msg.str());
  }
  if (real.gamma() != twin.gamma()) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "discount factors differ: real " << real.gamma() << ", twin " << twin.gamma();
    throw Error(ErrorCode::GammaMismatch, msg.str());
  }
  return MdpPair(std::move(real), std::move(twin));
}

double compute_rmax(const MdpPair& pair) {
  const auto S = pair.num_states();
  const auto A = pair.num_actions();
  double r_max = 0.0;
  for (std::size_t a = 0; a < A; ++a) {
    // The maximum over (i, j) of |x_i - y_j| is attained at the extremes.
    double real_lo = std::numeric_limits<double>::infinity();
    double real_hi = -real_lo;
    double twin_lo = real_lo;
    double twin_hi = -real_lo;
    for (std::size_t s = 0; s < S; ++s) {
      real_lo = std::min(real_lo, pair.real().reward(s, a));
      real_hi = std::max(real_hi, pair.real().reward(s, a));
      twin_lo = std::min(twin_lo, pair.twin().reward(s, a));
      twin_hi = std::max(twin_hi, pair.twin().reward(s, a));
    }
    r_max = std::max({r_max, std::abs(real_hi - twin_lo), std::abs(twin_hi - real_lo)});
  }
  return r_max;
}

double MetricTable::max_diagonal() const noexcept {
  double m = 0.0;
  for (std::size_t i = 0; i < size; ++i) m = std::max(m, (*this)(i, i));
  return m;
}

double apriori_error(double gamma, double r_max, std::size_t n) {
  return std::pow(gamma, static_cast<double>(n)) * r_max / (1.0 - gamma);
}

std::size_t iterations_for_error(double gamma, double r_max, double delta) {
  if (!(delta > 0.0)) throw Error(ErrorCode::InvalidArgument, "target error must be positive");
  if (r_max == 0.0) return 1;
  const double ratio = delta * (1.0 - gamma) / r_max;
  std::size_t n = 1;
  if (ratio < 1.0) n = static_cast<std::size_t>(std::ceil(std::log(ratio) / std::log(gamma)));
  n = std::max<std::size_t>(n, 1);
  while (apriori_error(gamma, r_max, n) > delta) ++n;
  return n;
}

DtbsmIteration::DtbsmIteration(const MdpPair& pair, unsigned threads)
    : pair_(pair), threads_(threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads) {
  const auto S = pair.num_states();
  table_.size = S;
  table_.d.assign(S * S, 0.0);
  table_.r_max = compute_rmax(pair);
  table_.iterations = 0;
  table_.apriori_error = apriori_error(pair.gamma(), table_.r_max, 0);
  cap_ = table_.r_max / (1.0 - pair.gamma());
}

void DtbsmIteration::sweep_rows(std::size_t begin, std::size_t end,
                                const std::vector<double>& previous,
                                std::vector<double>& next) const {
  const auto& real = pair_.real();
  const auto& twin = pair_.twin();
  const auto S = pair_.num_states();
  const auto A = pair_.num_actions();
  const double gamma = pair_.gamma();
  const bool first = table_.iterations == 0;
  TransportSolver solver;
  for (std::size_t i = begin; i < end; ++i) {
    for (std::size_t j = 0; j < S; ++j) {
      double best = 0.0;
      for (std::size_t a = 0; a < A; ++a) {
        double term = std::abs(real.reward(i, a) - twin.reward(j, a));
        if (!first) term += gamma * solver.value(real.row(i, a), twin.row(j, a), previous);
        best = std::max(best, term);
      }
      next[i * S + j] = std::min(best, cap_);
    }
  }
}

void DtbsmIteration::step() {
  const auto S = pair_.num_states();
  std::vector<double> next(S * S, 0.0);
  if (table_.r_max > 0.0) {
    const std::size_t workers = std::min<std::size_t>(threads_, S >= 16 ? S : 1);
    if (workers <= 1) {
      sweep_rows(0, S, table_.d, next);
    } else {
      std::vector<std::jthread> pool;
      const std::size_t chunk = (S + workers - 1) / workers;
      for (std::size_t begin = 0; begin < S; begin += chunk) {
        const std::size_t end = std::min(S, begin + chunk);
        pool.emplace_back([this, begin, end, &next] { sweep_rows(begin, end, table_.d, next); });
      }
    }
  }
  table_.d.swap(next);
  ++table_.iterations;
  table_.apriori_error = apriori_error(pair_.gamma(), table_.r_max, table_.iterations);
}

MetricTable dtbsm(const MdpPair& pair, MetricStoppingRule stop) {
  DtbsmIteration iteration(pair);
  const double r_max = iteration.current().r_max;
  if (r_max == 0.0) {
    // Codomain collapses to {0}; the zero table is already the fixed point.
    MetricTable zero = iteration.current();
    zero.iterations = stop.is_fixed() ? stop.step_count() : 1;
    zero.apriori_error = 0.0;
    return zero;
  }
  const std::size_t n =
      stop.is_fixed() ? stop.step_count() : iterations_for_error(pair.gamma(), r_max, stop.target());
  for (std::size_t k = 0; k < n; ++k) iteration.step();
  return iteration.current();
}

double DiagMetric::max() const noexcept {
  double m = 0.0;
  for (double x : d_tv) m = std::max(m, x);
  return m;
}

DiagMetric dtv_metric(const MdpPair& pair) {
  const auto S = pair.num_states();
  const auto A = pair.num_actions();
  DiagMetric out;
  out.r_max = compute_rmax(pair);
  out.d_tv.assign(S, 0.0);
  const double weight = pair.gamma() * out.r_max / (1.0 - pair.gamma());
  for (std::size_t i = 0; i < S; ++i) {
    double best = 0.0;
    for (std::size_t a = 0; a < A; ++a) {
      const double reward_gap = std::abs(pair.real().reward(i, a) - pair.twin().reward(i, a));
      const double tv = tv_distance(pair.real().row(i, a), pair.twin().row(i, a));
      best = std::max(best, reward_gap + weight * tv);
    }
    out.d_tv[i] = best;
  }
  return out;
}

BoundReport assemble_bound_report(double gamma, const DiagMetric& dtv, const MetricTable* metric,
                                  double dt_suboptimality, double actual_regret) {
  BoundReport report;
  report.dt_suboptimality = dt_suboptimality;
  report.actual_regret = actual_regret;
  report.r_max = dtv.r_max;
  report.max_dtv_diag = dtv.max();
  const double policy_term = (1.0 + gamma) / (1.0 - gamma) * dt_suboptimality;
  report.bound_tv = 2.0 / ((1.0 - gamma) * (1.0 - gamma)) * report.max_dtv_diag + policy_term;
  if (metric != nullptr) {
    report.bsm_iterations = metric->iterations;
    report.bsm_apriori_error = metric->apriori_error;
    report.max_dbar_diag = metric->max_diagonal() + metric->apriori_error;
    report.bound_bsm = 2.0 / (1.0 - gamma) * *report.max_dbar_diag + policy_term;
  }
  return report;
}

BoundReport theorem1_bounds(const MdpPair& pair, const Policy& pi, const BoundOptions& options) {
  check_policy(pair.real(), pi);
  const double dt_sub = suboptimality(pair.twin(), pi);
  const double regret = suboptimality(pair.real(), pi);
  const DiagMetric dtv = dtv_metric(pair);
  if (options.skip_bsm) return assemble_bound_report(pair.gamma(), dtv, nullptr, dt_sub, regret);
  const MetricTable metric = dtbsm(pair, options.stop);
  return assemble_bound_report(pair.gamma(), dtv, &metric, dt_sub, regret);
}

void CheckOutcome::record(double margin, double tolerance, std::vector<std::size_t> where) {
  ++checked;
  if (margin < -tolerance) {
    ++violations;
    passed = false;
  }
  if (margin < worst_margin) {
    worst_margin = margin;
    location = std::move(where);
  }
}

CheckOutcome check_corollary1(const MetricTable& metric, std::span<const double> v_real,
                              std::span<const double> v_twin, double tolerance) {
  CheckOutcome out;
  for (std::size_t i = 0; i < metric.size; ++i) {
    for (std::size_t j = 0; j < metric.size; ++j) {
      const double gap = std::abs(v_real[i] - v_twin[j]);
      out.record(metric(i, j) + metric.apriori_error - gap, tolerance, {i, j});
    }
  }
  return out;
}

CheckOutcome check_corollary1(const MdpPair& pair, MetricStoppingRule stop) {
  const MetricTable metric = dtbsm(pair, stop);
  const ValueVector v_real = value_iteration(pair.real());
  const ValueVector v_twin = value_iteration(pair.twin());
  return check_corollary1(metric, v_real.values, v_twin.values);
}

namespace {

void record_quadruple(CheckOutcome& out, const MetricTable& d, std::size_t i, std::size_t j,
                      std::size_t k, std::size_t l, double tolerance) {
  const double rhs = d(i, j) + d(k, j) + d(k, l);
  out.record(rhs - d(i, l), tolerance, {i, j, k, l});
}

}  // namespace

CheckOutcome check_quadrilateral(const MetricTable& metric, std::size_t samples, std::uint64_t seed,
                                 double tolerance) {
  CheckOutcome out;
  const auto S = metric.size;
  Rng rng(stream_seed(seed, {0x9ad}));
  for (std::size_t n = 0; n < samples; ++n) {
    const auto i = rng.index(S);
    const auto j = rng.index(S);
    const auto k = rng.index(S);
    const auto l = rng.index(S);
    record_quadruple(out, metric, i, j, k, l, tolerance);
    // Collapsed form with the middle pair identified: (i, j, j, k).
    record_quadruple(out, metric, i, j, j, k, tolerance);
  }
  return out;
}

CheckOutcome check_quadrilateral_exhaustive(const MetricTable& metric, double tolerance) {
  CheckOutcome out;
  const auto S = metric.size;
  for (std::size_t i = 0; i < S; ++i)
    for (std::size_t j = 0; j < S; ++j)
      for (std::size_t k = 0; k < S; ++k)
        for (std::size_t l = 0; l < S; ++l) record_quadruple(out, metric, i, j, k, l, tolerance);
  return out;
}

CheckOutcome check_lemma6(const MetricTable& metric, const DiagMetric& dtv, double gamma,
                          double tolerance) {
  CheckOutcome out;
  std::size_t argmax = 0;
  for (std::size_t i = 0; i < metric.size; ++i) {
    if (metric(i, i) > metric(argmax, argmax)) argmax = i;
  }
  out.record(dtv.max() / (1.0 - gamma) - metric.max_diagonal(), tolerance, {argmax});
  return out;
}

CheckOutcome check_lemma6(const MdpPair& pair, MetricStoppingRule stop) {
  return check_lemma6(dtbsm(pair, stop), dtv_metric(pair), pair.gamma());
}

CheckOutcome check_convergence_envelope(const MdpPair& pair, double final_error, double tolerance) {
  DtbsmIteration iteration(pair);
  const double r_max = iteration.current().r_max;
  const double cap = r_max / (1.0 - pair.gamma());
  std::size_t last = 1;
  if (r_max > 0.0) {
    last = iterations_for_error(pair.gamma(), r_max, final_error);
    if (apriori_error(pair.gamma(), r_max, last) >= final_error) ++last;
  }

  std::vector<std::vector<double>> history;
  history.push_back(iteration.current().d);
  for (std::size_t n = 0; n < last; ++n) {
    iteration.step();
    history.push_back(iteration.current().d);
  }

  CheckOutcome out;
  const auto& final_table = history.back();
  for (std::size_t n = 0; n <= last; ++n) {
    const double envelope = apriori_error(pair.gamma(), r_max, n);
    for (std::size_t k = 0; k < final_table.size(); ++k) {
      const double d = history[n][k];
      out.record(envelope - (final_table[k] - d), tolerance, {n, k});
      out.record(cap - d, tolerance, {n, k});
      if (n > 0) out.record(d - history[n - 1][k], tolerance, {n, k});
    }
  }
  return out;
}

}  // namespace dtbsm
