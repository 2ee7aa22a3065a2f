#include "dtbsm/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dtbsm/error.hpp"

namespace dtbsm {

CostTable CostTable::create(std::size_t size, std::vector<double> costs, double upper_bound) {
  if (costs.size() != size * size) {
    std::ostringstream msg;
    msg << "cost table has " << costs.size() << " entries, expected " << size << " x " << size;
    throw Error(ErrorCode::CostShapeMismatch, msg.str());
  }
  double largest = 0.0;
  for (std::size_t k = 0; k < costs.size(); ++k) {
    if (!std::isfinite(costs[k]) || costs[k] < 0.0) {
      std::ostringstream msg;
      msg << "cost entry (" << k / size << ", " << k % size << ") must be finite and nonnegative";
      throw Error(ErrorCode::InvalidArgument, msg.str());
    }
    largest = std::max(largest, costs[k]);
  }
  if (upper_bound < 0.0) {
    upper_bound = largest;
  } else if (largest > upper_bound) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "cost entry " << largest << " exceeds the admissible cap " << upper_bound;
    throw Error(ErrorCode::InvalidArgument, msg.str());
  }
  CostTable table;
  table.size_ = size;
  table.costs_ = std::move(costs);
  table.upper_bound_ = upper_bound;
  return table;
}

double CostTable::max_entry() const noexcept {
  return costs_.empty() ? 0.0 : *std::max_element(costs_.begin(), costs_.end());
}

double CostTable::max_diagonal() const noexcept {
  double m = 0.0;
  for (std::size_t i = 0; i < size_; ++i) m = std::max(m, (*this)(i, i));
  return m;
}

double TransportSolution::dual_objective(std::span<const double> p,
                                         std::span<const double> q) const noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < size; ++i) acc += mu[i] * p[i] - nu[i] * q[i];
  return acc;
}

void TransportSolver::setup(std::span<const double> p, std::span<const double> q,
                            std::span<const double> cost) {
  n_ = p.size();
  row_index_.clear();
  col_index_.clear();
  double row_total = 0.0;
  double col_total = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    if (p[i] > 0.0) {
      row_index_.push_back(i);
      row_total += p[i];
    }
    if (q[i] > 0.0) {
      col_index_.push_back(i);
      col_total += q[i];
    }
  }
  rows_ = row_index_.size();
  cols_ = col_index_.size();

  supply_.resize(rows_);
  demand_.resize(cols_);
  for (std::size_t r = 0; r < rows_; ++r) supply_[r] = p[row_index_[r]] / row_total;
  for (std::size_t c = 0; c < cols_; ++c) demand_[c] = q[col_index_[c]] / col_total;

  cost_.resize(rows_ * cols_);
  double largest = 0.0;
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) {
      const double d = cost[row_index_[r] * n_ + col_index_[c]];
      cost_[r * cols_ + c] = d;
      largest = std::max(largest, std::abs(d));
    }
  }
  tolerance_ = 1e-12 * (1.0 + largest);

  const std::size_t nodes = rows_ + cols_;
  basis_.clear();
  adjacency_.resize(nodes);
  for (auto& adj : adjacency_) adj.clear();
  is_basic_.assign(rows_ * cols_, 0);
  u_.assign(rows_, 0.0);
  v_.assign(cols_, 0.0);

  // Northwest-corner start: always exactly rows + cols - 1 cells forming a tree.
  std::vector<double>& left = u_;
  std::vector<double>& need = v_;
  left = supply_;
  need = demand_;
  std::size_t i = 0;
  std::size_t j = 0;
  for (;;) {
    const double x = std::max(0.0, std::min(left[i], need[j]));
    basis_.push_back({i, j, x});
    link(basis_.size() - 1);
    left[i] -= x;
    need[j] -= x;
    if (i + 1 == rows_ && j + 1 == cols_) break;
    if (i + 1 == rows_) {
      ++j;
    } else if (j + 1 == cols_ || left[i] <= need[j]) {
      ++i;
    } else {
      ++j;
    }
  }
}

void TransportSolver::link(std::size_t cell) {
  const auto& c = basis_[cell];
  adjacency_[c.row].push_back(cell);
  adjacency_[rows_ + c.col].push_back(cell);
  is_basic_[c.row * cols_ + c.col] = 1;
}

void TransportSolver::unlink(std::size_t cell) {
  const auto& c = basis_[cell];
  auto drop = [cell](std::vector<std::size_t>& adj) {
    adj.erase(std::find(adj.begin(), adj.end(), cell));
  };
  drop(adjacency_[c.row]);
  drop(adjacency_[rows_ + c.col]);
  is_basic_[c.row * cols_ + c.col] = 0;
}

void TransportSolver::compute_potentials() {
  // u_r + v_c = cost on every basic cell, anchored at v_0 = 0.
  known_.assign(rows_ + cols_, 0);
  stack_.clear();
  stack_.push_back(rows_);
  known_[rows_] = 1;
  v_[0] = 0.0;
  while (!stack_.empty()) {
    const std::size_t node = stack_.back();
    stack_.pop_back();
    for (std::size_t idx : adjacency_[node]) {
      const Cell& cell = basis_[idx];
      const std::size_t other = node < rows_ ? rows_ + cell.col : cell.row;
      if (known_[other]) continue;
      known_[other] = 1;
      const double d = cost_[cell.row * cols_ + cell.col];
      if (other < rows_) {
        u_[other] = d - v_[cell.col];
      } else {
        v_[other - rows_] = d - u_[cell.row];
      }
      stack_.push_back(other);
    }
  }
}

bool TransportSolver::find_path(std::size_t from_row, std::size_t to_col) {
  const std::size_t target = rows_ + to_col;
  known_.assign(rows_ + cols_, 0);
  parent_cell_.resize(rows_ + cols_);
  stack_.clear();
  stack_.push_back(from_row);
  known_[from_row] = 1;
  bool found = false;
  while (!stack_.empty() && !found) {
    const std::size_t node = stack_.back();
    stack_.pop_back();
    for (std::size_t idx : adjacency_[node]) {
      const Cell& cell = basis_[idx];
      const std::size_t other = node < rows_ ? rows_ + cell.col : cell.row;
      if (known_[other]) continue;
      known_[other] = 1;
      parent_cell_[other] = idx;
      if (other == target) {
        found = true;
        break;
      }
      stack_.push_back(other);
    }
  }
  if (!found) return false;
  // Walk back from the entering column; even positions lose flow.
  path_.clear();
  std::size_t node = target;
  while (node != from_row) {
    const std::size_t idx = parent_cell_[node];
    path_.push_back(idx);
    const Cell& cell = basis_[idx];
    node = node < rows_ ? rows_ + cell.col : cell.row;
  }
  return true;
}

void TransportSolver::optimize() {
  pivots_ = 0;
  const std::size_t pivot_limit = 200 * rows_ * cols_ + 1000;
  std::size_t degenerate_run = 0;
  for (;;) {
    compute_potentials();

    // Dantzig pricing; Bland's rule once degenerate pivots start repeating.
    const bool bland = degenerate_run > rows_ + cols_;
    std::size_t enter_r = 0;
    std::size_t enter_c = 0;
    double best = -tolerance_;
    bool have_entering = false;
    for (std::size_t r = 0; r < rows_ && !(bland && have_entering); ++r) {
      for (std::size_t c = 0; c < cols_; ++c) {
        if (is_basic_[r * cols_ + c]) continue;
        const double rc = reduced_cost(r, c);
        if (rc < best) {
          have_entering = true;
          enter_r = r;
          enter_c = c;
          if (bland) break;
          best = rc;
        }
      }
    }
    if (!have_entering) return;

    if (++pivots_ > pivot_limit) {
      throw Error(ErrorCode::InvariantViolation, "transportation simplex failed to converge");
    }
    if (!find_path(enter_r, enter_c)) {
      throw Error(ErrorCode::InvariantViolation, "transportation basis is not a spanning tree");
    }

    double theta = std::numeric_limits<double>::infinity();
    std::size_t leaving = path_[0];
    for (std::size_t k = 0; k < path_.size(); k += 2) {
      const Cell& cell = basis_[path_[k]];
      const bool smaller = cell.flow < theta;
      const bool tie_break =
          bland && cell.flow == theta &&
          cell.row * cols_ + cell.col < basis_[leaving].row * cols_ + basis_[leaving].col;
      if (smaller || tie_break) {
        theta = cell.flow;
        leaving = path_[k];
      }
    }
    theta = std::max(theta, 0.0);
    degenerate_run = theta == 0.0 ? degenerate_run + 1 : 0;

    for (std::size_t k = 0; k < path_.size(); ++k) {
      Cell& cell = basis_[path_[k]];
      cell.flow += (k % 2 == 0) ? -theta : theta;
    }
    unlink(leaving);
    basis_[leaving] = {enter_r, enter_c, theta};
    link(leaving);
  }
}

double TransportSolver::value(std::span<const double> p, std::span<const double> q,
                              std::span<const double> cost) {
  setup(p, q, cost);
  optimize();
  double total = 0.0;
  for (const Cell& cell : basis_) {
    total += std::max(cell.flow, 0.0) * cost_[cell.row * cols_ + cell.col];
  }
  return total;
}

TransportSolution TransportSolver::solve(std::span<const double> p, std::span<const double> q,
                                         std::span<const double> cost) {
  setup(p, q, cost);
  optimize();
  compute_potentials();

  TransportSolution out;
  out.size = n_;
  out.plan.assign(n_ * n_, 0.0);
  out.mu.assign(n_, 0.0);
  out.nu.assign(n_, 0.0);
  for (Cell& cell : basis_) {
    cell.flow = std::max(cell.flow, 0.0);
    out.plan[row_index_[cell.row] * n_ + col_index_[cell.col]] += cell.flow;
    out.value += cell.flow * cost_[cell.row * cols_ + cell.col];
  }

  std::vector<char> active_row(n_, 0);
  std::vector<char> active_col(n_, 0);
  for (std::size_t r = 0; r < rows_; ++r) {
    out.mu[row_index_[r]] = u_[r];
    active_row[row_index_[r]] = 1;
  }
  for (std::size_t c = 0; c < cols_; ++c) {
    out.nu[col_index_[c]] = -v_[c];
    active_col[col_index_[c]] = 1;
  }
  // Zero-mass columns: smallest nu keeping every active row feasible.
  for (std::size_t j = 0; j < n_; ++j) {
    if (active_col[j]) continue;
    double nu = -std::numeric_limits<double>::infinity();
    for (std::size_t i : row_index_) nu = std::max(nu, out.mu[i] - cost[i * n_ + j]);
    out.nu[j] = nu;
  }
  // Zero-mass rows: largest mu feasible against every column.
  for (std::size_t i = 0; i < n_; ++i) {
    if (active_row[i]) continue;
    double mu = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n_; ++j) mu = std::min(mu, cost[i * n_ + j] + out.nu[j]);
    out.mu[i] = mu;
  }
  return out;
}

void check_distribution(std::span<const double> p, const char* name) {
  if (p.empty()) {
    throw Error(ErrorCode::NotADistribution, std::string(name) + " is empty");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!std::isfinite(p[i]) || p[i] < 0.0) {
      std::ostringstream msg;
      msg << name << " has an invalid mass at index " << i;
      throw Error(ErrorCode::NotADistribution, msg.str());
    }
    sum += p[i];
  }
  if (std::abs(sum - 1.0) > kDistributionTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << name << " sums to " << sum;
    throw Error(ErrorCode::NotADistribution, msg.str());
  }
}

namespace {

void check_pair(std::span<const double> p, std::span<const double> q) {
  check_distribution(p, "p");
  check_distribution(q, "q");
  if (p.size() != q.size()) {
    throw Error(ErrorCode::NotADistribution, "p and q live on different supports");
  }
}

}  // namespace

TransportSolution wasserstein(std::span<const double> p, std::span<const double> q,
                              const CostTable& cost) {
  check_pair(p, q);
  if (cost.size() != p.size()) {
    std::ostringstream msg;
    msg << "cost table is " << cost.size() << " x " << cost.size() << " but distributions have "
        << p.size() << " entries";
    throw Error(ErrorCode::CostShapeMismatch, msg.str());
  }
  TransportSolver solver;
  return solver.solve(p, q, cost.values());
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
  check_pair(p, q);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
  return std::min(1.0, 0.5 * acc);
}

double tv_coupling_upper_bound(std::span<const double> p, std::span<const double> q,
                               const CostTable& cost) {
  const double tv = tv_distance(p, q);
  if (cost.size() != p.size()) {
    throw Error(ErrorCode::CostShapeMismatch, "cost table does not match the distributions");
  }
  return tv * cost.max_entry() + (1.0 - tv) * cost.max_diagonal();
}

}  // namespace dtbsm
