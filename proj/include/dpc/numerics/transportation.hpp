#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpc/numerics/linalg.hpp"

namespace dpc::numerics {

/// Balanced transportation problem: supply rows, demand columns, cost[i][j].
struct TransportProblem {
  Vector supply;
  Vector demand;
  Matrix cost;
};

struct TransportSolution {
  Matrix plan;  // supply.size() x demand.size()
  double cost = 0.0;
  std::size_t pivots = 0;
};

struct TransportOptions {
  std::size_t max_points = 500;
  double balance_tol = 1e-9;
};

namespace detail {

struct BasicCell {
  int row = 0;
  int col = 0;
  double flow = 0.0;
};

// Transportation simplex (MODI potentials) on a spanning-tree basis.
// Pricing is block search; after a run of degenerate pivots it falls back to
// Bland's rule (first improving cell, smallest-index leaving cell) until a
// pivot makes progress, which rules out cycling.
class TransportSimplex {
 public:
  TransportSimplex(std::vector<double> supply, std::vector<double> demand, std::vector<double> cost)
      : m_(static_cast<int>(supply.size())),
        n_(static_cast<int>(demand.size())),
        supply_(std::move(supply)),
        demand_(std::move(demand)),
        cost_(std::move(cost)) {
    cmax_ = 0.0;
    for (double c : cost_) cmax_ = std::max(cmax_, std::abs(c));
    eps_ = 1e-12 * std::max(1.0, cmax_) * std::sqrt(static_cast<double>(m_ + n_));
  }

  void run() {
    initial_basis();
    const int nodes = m_ + n_;
    potential_.assign(static_cast<std::size_t>(nodes), 0.0);
    parent_edge_.assign(static_cast<std::size_t>(nodes), -1);
    parent_node_.assign(static_cast<std::size_t>(nodes), -1);
    depth_.assign(static_cast<std::size_t>(nodes), 0);

    const std::size_t cells = static_cast<std::size_t>(m_) * static_cast<std::size_t>(n_);
    block_ = std::max<std::size_t>(16, static_cast<std::size_t>(std::sqrt(static_cast<double>(cells))));
    const std::size_t max_pivots = 200 * cells + 1000;
    std::size_t degenerate_run = 0;
    bool bland = false;

    for (pivots_ = 0; pivots_ < max_pivots; ++pivots_) {
      compute_potentials();
      const long entering = bland ? price_bland() : price_block();
      if (entering < 0) return;
      const double theta = pivot(static_cast<int>(entering / n_), static_cast<int>(entering % n_));
      if (theta <= 0.0) {
        if (++degenerate_run > static_cast<std::size_t>(m_ + n_)) bland = true;
      } else {
        degenerate_run = 0;
        bland = false;
      }
    }
    throw std::runtime_error("transport: pivot limit reached");
  }

  const std::vector<BasicCell>& basis() const { return basis_; }
  std::size_t pivots() const { return pivots_; }

 private:
  double cost(int i, int j) const {
    return cost_[static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(j)];
  }

  void add_basic(int i, int j, double flow) {
    const int e = static_cast<int>(basis_.size());
    basis_.push_back({i, j, flow});
    adj_[static_cast<std::size_t>(i)].push_back(e);
    adj_[static_cast<std::size_t>(m_ + j)].push_back(e);
  }

  // Least-cost rule; each allocation retires exactly one line except the last,
  // so the m + n - 1 cells form a spanning tree.
  void initial_basis() {
    adj_.assign(static_cast<std::size_t>(m_ + n_), {});
    basis_.clear();
    basis_.reserve(static_cast<std::size_t>(m_ + n_ - 1));
    std::vector<double> s = supply_;
    std::vector<double> d = demand_;
    std::vector<char> row_alive(static_cast<std::size_t>(m_), 1);
    std::vector<char> col_alive(static_cast<std::size_t>(n_), 1);
    int rows_left = m_;
    int cols_left = n_;

    std::vector<std::uint32_t> order(cost_.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return cost_[a] < cost_[b]; });

    for (std::uint32_t cell : order) {
      const int i = static_cast<int>(cell / static_cast<std::uint32_t>(n_));
      const int j = static_cast<int>(cell % static_cast<std::uint32_t>(n_));
      if (!row_alive[static_cast<std::size_t>(i)] || !col_alive[static_cast<std::size_t>(j)]) continue;
      double& si = s[static_cast<std::size_t>(i)];
      double& dj = d[static_cast<std::size_t>(j)];
      const double x = std::min(si, dj);
      add_basic(i, j, x);
      const bool row_first = si <= dj;
      si -= x;
      dj -= x;
      if (rows_left == 1 && cols_left == 1) {
        row_alive[static_cast<std::size_t>(i)] = 0;
        col_alive[static_cast<std::size_t>(j)] = 0;
        break;
      }
      if (rows_left == 1 || (cols_left > 1 && !row_first)) {
        col_alive[static_cast<std::size_t>(j)] = 0;
        dj = 0.0;
        --cols_left;
      } else {
        row_alive[static_cast<std::size_t>(i)] = 0;
        si = 0.0;
        --rows_left;
      }
    }
  }

  void compute_potentials() {
    std::vector<int> stack{0};
    std::fill(parent_edge_.begin(), parent_edge_.end(), -1);
    parent_node_[0] = -1;
    potential_[0] = 0.0;
    depth_[0] = 0;
    while (!stack.empty()) {
      const int node = stack.back();
      stack.pop_back();
      for (int e : adj_[static_cast<std::size_t>(node)]) {
        if (e == parent_edge_[static_cast<std::size_t>(node)]) continue;
        const BasicCell& b = basis_[static_cast<std::size_t>(e)];
        const int other = node < m_ ? m_ + b.col : b.row;
        parent_edge_[static_cast<std::size_t>(other)] = e;
        parent_node_[static_cast<std::size_t>(other)] = node;
        depth_[static_cast<std::size_t>(other)] = depth_[static_cast<std::size_t>(node)] + 1;
        // u_i + v_j = c_ij on basic cells
        potential_[static_cast<std::size_t>(other)] = cost(b.row, b.col) - potential_[static_cast<std::size_t>(node)];
        stack.push_back(other);
      }
    }
  }

  double reduced(int i, int j) const {
    return cost(i, j) - potential_[static_cast<std::size_t>(i)] - potential_[static_cast<std::size_t>(m_ + j)];
  }

  long price_block() {
    const std::size_t cells = static_cast<std::size_t>(m_) * static_cast<std::size_t>(n_);
    std::size_t scanned = 0;
    long best = -1;
    double best_rc = -eps_;
    std::size_t in_block = 0;
    while (scanned < cells) {
      const std::size_t k = next_;
      next_ = next_ + 1 == cells ? 0 : next_ + 1;
      ++scanned;
      const double rc = reduced(static_cast<int>(k / static_cast<std::size_t>(n_)),
                                static_cast<int>(k % static_cast<std::size_t>(n_)));
      if (rc < best_rc) {
        best_rc = rc;
        best = static_cast<long>(k);
      }
      if (++in_block == block_) {
        if (best >= 0) return best;
        in_block = 0;
      }
    }
    return best;
  }

  long price_bland() const {
    for (int i = 0; i < m_; ++i) {
      for (int j = 0; j < n_; ++j) {
        if (reduced(i, j) < -eps_) return static_cast<long>(i) * n_ + j;
      }
    }
    return -1;
  }

  long cell_index(int e) const {
    const BasicCell& b = basis_[static_cast<std::size_t>(e)];
    return static_cast<long>(b.row) * n_ + b.col;
  }

  void remove_adj(int node, int e) {
    auto& v = adj_[static_cast<std::size_t>(node)];
    v.erase(std::find(v.begin(), v.end(), e));
  }

  // Returns the step length theta.
  double pivot(int ei, int ej) {
    // Tree path from column node back to row node: j -> LCA -> i.
    int a = m_ + ej;
    int b = ei;
    std::vector<int> from_j;
    std::vector<int> from_i;
    while (depth_[static_cast<std::size_t>(a)] > depth_[static_cast<std::size_t>(b)]) {
      from_j.push_back(parent_edge_[static_cast<std::size_t>(a)]);
      a = parent_node_[static_cast<std::size_t>(a)];
    }
    while (depth_[static_cast<std::size_t>(b)] > depth_[static_cast<std::size_t>(a)]) {
      from_i.push_back(parent_edge_[static_cast<std::size_t>(b)]);
      b = parent_node_[static_cast<std::size_t>(b)];
    }
    while (a != b) {
      from_j.push_back(parent_edge_[static_cast<std::size_t>(a)]);
      a = parent_node_[static_cast<std::size_t>(a)];
      from_i.push_back(parent_edge_[static_cast<std::size_t>(b)]);
      b = parent_node_[static_cast<std::size_t>(b)];
    }
    std::vector<int> cycle = std::move(from_j);
    cycle.insert(cycle.end(), from_i.rbegin(), from_i.rend());

    // Even positions lose flow, odd positions gain.
    double theta = std::numeric_limits<double>::infinity();
    int leaving = -1;
    for (std::size_t t = 0; t < cycle.size(); t += 2) {
      const int e = cycle[t];
      const double f = basis_[static_cast<std::size_t>(e)].flow;
      if (leaving < 0 || f < theta || (f == theta && cell_index(e) < cell_index(leaving))) {
        theta = f;
        leaving = e;
      }
    }
    theta = std::max(theta, 0.0);
    for (std::size_t t = 0; t < cycle.size(); ++t) {
      BasicCell& cell = basis_[static_cast<std::size_t>(cycle[t])];
      cell.flow += (t % 2 == 0) ? -theta : theta;
      if (cell.flow < 0.0) cell.flow = 0.0;
    }

    BasicCell& out = basis_[static_cast<std::size_t>(leaving)];
    remove_adj(out.row, leaving);
    remove_adj(m_ + out.col, leaving);
    out = {ei, ej, theta};
    adj_[static_cast<std::size_t>(ei)].push_back(leaving);
    adj_[static_cast<std::size_t>(m_ + ej)].push_back(leaving);
    return theta;
  }

  int m_;
  int n_;
  std::vector<double> supply_;
  std::vector<double> demand_;
  std::vector<double> cost_;
  double cmax_ = 0.0;
  double eps_ = 0.0;

  std::vector<BasicCell> basis_;
  std::vector<std::vector<int>> adj_;
  std::vector<double> potential_;
  std::vector<int> parent_edge_;
  std::vector<int> parent_node_;
  std::vector<int> depth_;
  std::size_t block_ = 16;
  std::size_t next_ = 0;
  std::size_t pivots_ = 0;
};

}  // namespace detail

/**
 * Exact solver for the balanced transportation LP
 *   min sum_ij plan_ij cost_ij,  row sums = supply, column sums = demand, plan >= 0.
 *
 * Throws InputError on negative/non-finite masses or unbalanced totals, and
 * SizeError when either side exceeds opt.max_points.
 */
inline TransportSolution solve_transport_exact(const TransportProblem& tp, const TransportOptions& opt = {}) {
  const auto m = tp.supply.size();
  const auto n = tp.demand.size();
  if (tp.cost.rows() != m || tp.cost.cols() != n) throw InputError("transport: cost must be supply x demand");
  require_finite(tp.supply, "transport supply");
  require_finite(tp.demand, "transport demand");
  require_finite(tp.cost, "transport cost");
  if ((m > 0 && tp.supply.minCoeff() < 0.0) || (n > 0 && tp.demand.minCoeff() < 0.0)) {
    throw InputError("transport: masses must be nonnegative");
  }
  const double s_total = tp.supply.sum();
  const double d_total = tp.demand.sum();
  if (std::abs(s_total - d_total) > opt.balance_tol) {
    throw InputError("transport: unbalanced masses (supply " + std::to_string(s_total) + ", demand " +
                     std::to_string(d_total) + ")");
  }
  if (static_cast<std::size_t>(m) > opt.max_points || static_cast<std::size_t>(n) > opt.max_points) {
    throw SizeError("transport: problem of size " + std::to_string(m) + "x" + std::to_string(n) +
                    " exceeds the exact-solver cap of " + std::to_string(opt.max_points) +
                    " points per side; subsample the clouds first");
  }

  TransportSolution out;
  out.plan = Matrix::Zero(m, n);

  std::vector<Eigen::Index> rows;
  std::vector<Eigen::Index> cols;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (tp.supply(i) > 0.0) rows.push_back(i);
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (tp.demand(j) > 0.0) cols.push_back(j);
  }
  if (rows.empty() || cols.empty()) return out;

  std::vector<double> supply(rows.size());
  std::vector<double> demand(cols.size());
  std::vector<double> cost(rows.size() * cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) supply[i] = tp.supply(rows[i]);
  // Absorb the admissible imbalance into the demand side.
  const double scale = s_total / d_total;
  for (std::size_t j = 0; j < cols.size(); ++j) demand[j] = tp.demand(cols[j]) * scale;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) cost[i * cols.size() + j] = tp.cost(rows[i], cols[j]);
  }

  detail::TransportSimplex simplex(std::move(supply), std::move(demand), std::move(cost));
  simplex.run();
  for (const auto& b : simplex.basis()) {
    const auto i = rows[static_cast<std::size_t>(b.row)];
    const auto j = cols[static_cast<std::size_t>(b.col)];
    out.plan(i, j) += b.flow;
  }
  out.cost = (out.plan.array() * tp.cost.array()).sum();
  out.pivots = simplex.pivots();
  return out;
}

/// Squared Euclidean cost matrix between two planar point sets.
template <typename PointRange>
Matrix squared_distance_matrix(const PointRange& a, const PointRange& b) {
  Matrix c(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (a[i] - b[j]).squaredNorm();
    }
  }
  return c;
}

}  // namespace dpc::numerics
