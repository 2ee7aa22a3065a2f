#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dtbsm {

/// Square ground-cost table d(s_i, s_j') over one state space. The diagonal
/// need not vanish: costs compare states across two different MDPs.
class CostTable {
 public:
  /// Validates entries against [0, upper_bound]. A negative `upper_bound`
  /// means "use the largest entry".
  static CostTable create(std::size_t size, std::vector<double> costs, double upper_bound = -1.0);

  std::size_t size() const noexcept { return size_; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return costs_[i * size_ + j]; }
  std::span<const double> values() const noexcept { return costs_; }
  double upper_bound() const noexcept { return upper_bound_; }
  double max_entry() const noexcept;
  double max_diagonal() const noexcept;

 private:
  CostTable() = default;
  std::size_t size_ = 0;
  std::vector<double> costs_;
  double upper_bound_ = 0.0;
};

/// Optimal plan and dual potentials of the discrete 1-Wasserstein LP.
///
/// Dual convention: mu_i - nu_j <= d(i, j), objective sum_i mu_i p_i - nu_i q_i.
struct TransportSolution {
  std::size_t size = 0;
  std::vector<double> plan;  // row-major size x size
  std::vector<double> mu;
  std::vector<double> nu;
  double value = 0.0;

  double flow(std::size_t i, std::size_t j) const noexcept { return plan[i * size + j]; }
  double dual_objective(std::span<const double> p, std::span<const double> q) const noexcept;
};

/**
 * Reusable transportation-simplex workspace.
 *
 * Solves min sum lambda_ij d(i,j) subject to row sums p, column sums q and
 * lambda >= 0 on the complete bipartite network. Zero-mass supplies and
 * demands are dropped before pivoting and restored as zero rows/columns of the
 * plan afterwards; their dual potentials are then chosen to keep every
 * constraint mu_i - nu_j <= d(i,j) satisfied.
 *
 * No input validation happens here; wasserstein() is the checked entry point.
 * A solver instance is not thread-safe, but separate instances are independent.
 */
class TransportSolver {
 public:
  /// `cost` is row-major size x size with size == p.size() == q.size().
  TransportSolution solve(std::span<const double> p, std::span<const double> q,
                          std::span<const double> cost);

  /// Optimal objective only.
  double value(std::span<const double> p, std::span<const double> q,
               std::span<const double> cost);

  /// Pivots taken by the last solve (diagnostic).
  std::size_t last_pivots() const noexcept { return pivots_; }

 private:
  struct Cell {
    std::size_t row;
    std::size_t col;
    double flow;
  };

  void setup(std::span<const double> p, std::span<const double> q, std::span<const double> cost);
  void optimize();
  void compute_potentials();
  bool find_path(std::size_t from_row, std::size_t to_col);
  void link(std::size_t cell);
  void unlink(std::size_t cell);
  double reduced_cost(std::size_t r, std::size_t c) const noexcept {
    return cost_[r * cols_ + c] - u_[r] - v_[c];
  }

  std::size_t n_ = 0;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_index_;  // active row -> original index
  std::vector<std::size_t> col_index_;
  std::vector<double> supply_;
  std::vector<double> demand_;
  std::vector<double> cost_;  // active rows x active cols
  double tolerance_ = 0.0;

  std::vector<Cell> basis_;
  std::vector<std::vector<std::size_t>> adjacency_;  // node -> basis cells; cols offset by rows_
  std::vector<char> is_basic_;
  std::vector<double> u_;
  std::vector<double> v_;
  std::vector<char> known_;
  std::vector<std::size_t> stack_;
  std::vector<std::size_t> parent_cell_;
  std::vector<std::size_t> path_;
  std::size_t pivots_ = 0;
};

inline constexpr double kDistributionTolerance = 1e-9;

/// Throws NotADistribution unless `p` is nonnegative, finite and sums to one
/// within kDistributionTolerance.
void check_distribution(std::span<const double> p, const char* name = "distribution");

/// Exact W1(p, q; cost) with primal plan and dual potentials.
TransportSolution wasserstein(std::span<const double> p, std::span<const double> q,
                              const CostTable& cost);

/// 0.5 * sum_i |p_i - q_i|.
double tv_distance(std::span<const double> p, std::span<const double> q);

/// Cost of the plan that keeps the shared mass min(p_i, q_i) in place and
/// moves the remainder at worst-case cost:
/// TV * max_ij d(i,j) + (1 - TV) * max_i d(i,i). Always >= W1.
double tv_coupling_upper_bound(std::span<const double> p, std::span<const double> q,
                               const CostTable& cost);

}  // namespace dtbsm
