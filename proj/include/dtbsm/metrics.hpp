#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "dtbsm/mdp.hpp"

namespace dtbsm {

/// A real MDP and its digital twin over one state/action space and discount.
class MdpPair {
 public:
  /// Throws ShapeMismatch or GammaMismatch when the two MDPs are not aligned.
  static MdpPair create(TabularMdp real, TabularMdp twin);

  const TabularMdp& real() const noexcept { return real_; }
  const TabularMdp& twin() const noexcept { return twin_; }
  std::size_t num_states() const noexcept { return real_.num_states(); }
  std::size_t num_actions() const noexcept { return real_.num_actions(); }
  double gamma() const noexcept { return real_.gamma(); }

 private:
  MdpPair(TabularMdp real, TabularMdp twin) : real_(std::move(real)), twin_(std::move(twin)) {}
  TabularMdp real_;
  TabularMdp twin_;
};

/// R_max = max_{i,j,a} |R(s_i,a) - R'(s_j',a)|, over all pairs i, j.
double compute_rmax(const MdpPair& pair);

/// Cross-MDP cost table d_n(s_i, s_j'): rows index real states, columns twin states.
struct MetricTable {
  std::size_t size = 0;
  std::vector<double> d;  // row-major
  std::size_t iterations = 0;
  /// gamma^n R_max / (1 - gamma): certified bound on dbar - d_n.
  double apriori_error = 0.0;
  double r_max = 0.0;

  double operator()(std::size_t i, std::size_t j) const noexcept { return d[i * size + j]; }
  double max_diagonal() const noexcept;
};

class MetricStoppingRule {
 public:
  static MetricStoppingRule steps(std::size_t n) { return {true, n, 0.0}; }
  static MetricStoppingRule tolerance(double delta) { return {false, 0, delta}; }

  bool is_fixed() const noexcept { return fixed_; }
  std::size_t step_count() const noexcept { return steps_; }
  double target() const noexcept { return delta_; }

 private:
  MetricStoppingRule(bool fixed, std::size_t n, double delta)
      : fixed_(fixed), steps_(n), delta_(delta) {}
  bool fixed_;
  std::size_t steps_;
  double delta_;
};

inline constexpr double kDefaultMetricTolerance = 1e-9;

/// Smallest n with gamma^n R_max / (1 - gamma) <= delta (at least 1).
std::size_t iterations_for_error(double gamma, double r_max, double delta);

/// gamma^n R_max / (1 - gamma).
double apriori_error(double gamma, double r_max, std::size_t n);

/**
 * Step-by-step evaluation of
 *   d_n(i,j) = max_a { |R(i,a) - R'(j,a)| + gamma W1(P(.|i,a), P'(.|j,a); d_{n-1}) }
 * from d_0 = 0. Every (i,j,a) transport problem of one sweep reads only
 * d_{n-1}, so the sweep may be split across threads without changing a bit of
 * the result.
 */
class DtbsmIteration {
 public:
  explicit DtbsmIteration(const MdpPair& pair, unsigned threads = 0);

  /// Advances d_{n-1} -> d_n.
  void step();
  const MetricTable& current() const noexcept { return table_; }

 private:
  void sweep_rows(std::size_t begin, std::size_t end, const std::vector<double>& previous,
                  std::vector<double>& next) const;

  const MdpPair& pair_;
  unsigned threads_;
  MetricTable table_;
  double cap_;
};

/// Truncated DT-BSM. R_max = 0 short-circuits to the all-zero fixed point.
MetricTable dtbsm(const MdpPair& pair,
                  MetricStoppingRule stop = MetricStoppingRule::tolerance(kDefaultMetricTolerance));

/// Diagonal TV-based metric
///   d_TV(s_i, s_i') = max_a { |R - R'| + gamma R_max / (1 - gamma) TV(P(.|i,a), P'(.|i,a)) }.
struct DiagMetric {
  std::vector<double> d_tv;
  double r_max = 0.0;

  double max() const noexcept;
};

DiagMetric dtv_metric(const MdpPair& pair);

/// Every term of the two-tier transfer bound.
struct BoundReport {
  /// max_i d_n(i,i) + apriori_error: a certified upper bound on max_i dbar(i,i).
  std::optional<double> max_dbar_diag;
  double max_dtv_diag = 0.0;
  /// ||V_DT* - V_DT^pi||
  double dt_suboptimality = 0.0;
  std::optional<double> bound_bsm;
  double bound_tv = 0.0;
  /// ||V_real* - V_real^pi||
  double actual_regret = 0.0;

  // Audit trail for the truncated metric.
  std::size_t bsm_iterations = 0;
  double bsm_apriori_error = 0.0;
  double r_max = 0.0;
};

struct BoundOptions {
  MetricStoppingRule stop = MetricStoppingRule::tolerance(kDefaultMetricTolerance);
  bool skip_bsm = false;
};

BoundReport theorem1_bounds(const MdpPair& pair, const Policy& pi, const BoundOptions& options = {});

/// Assembles a report from precomputed pieces (used by sweeps that cache V*).
BoundReport assemble_bound_report(double gamma, const DiagMetric& dtv, const MetricTable* metric,
                                  double dt_suboptimality, double actual_regret);

/// Verdict of a property checker. A violation is an outcome, not an error.
struct CheckOutcome {
  bool passed = true;
  /// min over checked instances of (allowed - observed); negative means violated.
  double worst_margin = std::numeric_limits<double>::infinity();
  /// Indices where worst_margin was attained.
  std::vector<std::size_t> location;
  std::size_t checked = 0;
  std::size_t violations = 0;

  void record(double margin, double tolerance, std::vector<std::size_t> where);
};

/// |V_real*(s_i) - V_DT*(s_j')| <= d_n(i,j) + apriori_error for all i, j.
CheckOutcome check_corollary1(const MdpPair& pair,
                              MetricStoppingRule stop = MetricStoppingRule::tolerance(kDefaultMetricTolerance));
CheckOutcome check_corollary1(const MetricTable& metric, std::span<const double> v_real,
                              std::span<const double> v_twin, double tolerance = 1e-7);

/// d_n(i,l) <= d_n(i,j) + d_n(k,j) + d_n(k,l) on `samples` random quadruples,
/// plus the collapsed form d_n(i,k) <= d_n(i,j) + d_n(j,j) + d_n(j,k).
CheckOutcome check_quadrilateral(const MetricTable& metric, std::size_t samples, std::uint64_t seed,
                                 double tolerance = 1e-9);
/// Same inequality over all |S|^4 quadruples.
CheckOutcome check_quadrilateral_exhaustive(const MetricTable& metric, double tolerance = 1e-9);

/// max_i d_n(i,i) <= max_i d_TV(i,i) / (1 - gamma).
CheckOutcome check_lemma6(const MdpPair& pair,
                          MetricStoppingRule stop = MetricStoppingRule::tolerance(kDefaultMetricTolerance));
CheckOutcome check_lemma6(const MetricTable& metric, const DiagMetric& dtv, double gamma,
                          double tolerance = 1e-7);

/// Runs the recursion to N (gamma^N R_max / (1 - gamma) < final_error) and
/// checks d_N - d_n <= gamma^n R_max / (1 - gamma) pointwise for every n <= N,
/// together with monotonicity d_{n+1} >= d_n and the codomain cap.
CheckOutcome check_convergence_envelope(const MdpPair& pair, double final_error = 1e-9,
                                        double tolerance = 1e-9);

}  // namespace dtbsm
