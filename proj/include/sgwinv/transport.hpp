#pragma once

// Exact discrete optimal transport (transportation LP) by the primal network
// simplex on a strongly feasible spanning tree, plus an opt-in entropic
// (Sinkhorn) approximation.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace sgwinv {

struct TransportResult {
  double cost = 0.0;
  Eigen::MatrixXd plan;       // supply x demand
  Eigen::VectorXd potential_supply;  // alpha
  Eigen::VectorXd potential_demand;  // beta
  double dual_objective = 0.0;
  double max_marginal_error = 0.0;   // primal feasibility
  double max_dual_violation = 0.0;   // max(alpha_i + beta_j - c_ij, 0)
  long pivots = 0;
};

namespace detail {

/// Network simplex on the complete bipartite graph supply -> demand with an
/// artificial root. Node ids: supply [0, m), demand [m, m + n), root m + n.
/// Arc e < m n is (e / n) -> m + e % n; arc m n + u is the artificial arc of node u.
class TransportSimplex {
public:
  TransportSimplex(const Eigen::VectorXd& supply, const Eigen::VectorXd& demand, const Eigen::MatrixXd& cost)
      : m_(static_cast<int>(supply.size())), n_(static_cast<int>(demand.size())) {
    cost_.resize(static_cast<std::size_t>(cost.size()));
    for (int i = 0; i < m_; ++i) {
      for (int j = 0; j < n_; ++j) cost_[static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(j)] = cost(i, j);
    }
    const int nodes = m_ + n_ + 1;
    root_ = m_ + n_;
    num_real_arcs_ = static_cast<long>(m_) * n_;
    const double max_cost = cost.size() > 0 ? cost.cwiseAbs().maxCoeff() : 0.0;
    art_cost_ = (max_cost + 1.0) * (m_ + n_ + 1);
    eps_ = 1e-12 * std::max(1.0, max_cost);

    flow_.assign(static_cast<std::size_t>(num_real_arcs_ + m_ + n_), 0.0);
    parent_.assign(static_cast<std::size_t>(nodes), -1);
    pred_arc_.assign(static_cast<std::size_t>(nodes), -1);
    pred_up_.assign(static_cast<std::size_t>(nodes), 0);
    depth_.assign(static_cast<std::size_t>(nodes), 0);
    pi_.assign(static_cast<std::size_t>(nodes), 0.0);
    first_child_.assign(static_cast<std::size_t>(nodes), -1);
    next_sibling_.assign(static_cast<std::size_t>(nodes), -1);
    prev_sibling_.assign(static_cast<std::size_t>(nodes), -1);

    // Strongly feasible initial tree: supply nodes point up to the root,
    // demand nodes hang down from it.
    for (int u = 0; u < m_ + n_; ++u) {
      const long arc = num_real_arcs_ + u;
      parent_[idx(u)] = root_;
      pred_arc_[idx(u)] = arc;
      depth_[idx(u)] = 1;
      if (u < m_) {
        pred_up_[idx(u)] = 1;
        flow_[static_cast<std::size_t>(arc)] = supply(u);
        pi_[idx(u)] = -art_cost_;
      } else {
        pred_up_[idx(u)] = 0;
        flow_[static_cast<std::size_t>(arc)] = demand(u - m_);
        pi_[idx(u)] = art_cost_;
      }
      attach(u, root_);
    }
    block_ = std::max<long>(static_cast<long>(std::sqrt(static_cast<double>(num_real_arcs_))), 10);
  }

  void run(long max_pivots) {
    while (pivots_ < max_pivots) {
      const long entering = find_entering();
      if (entering < 0) return;
      pivot(entering);
      ++pivots_;
    }
    throw NumericalError("network simplex exceeded its pivot budget");
  }

  double flow(int i, int j) const { return flow_[static_cast<std::size_t>(static_cast<long>(i) * n_ + j)]; }
  double artificial_flow(int u) const { return flow_[static_cast<std::size_t>(num_real_arcs_ + u)]; }
  double potential(int u) const { return pi_[idx(u)]; }
  long pivots() const { return pivots_; }

private:
  static std::size_t idx(int u) { return static_cast<std::size_t>(u); }

  int source(long arc) const {
    if (arc < num_real_arcs_) return static_cast<int>(arc / n_);
    const int u = static_cast<int>(arc - num_real_arcs_);
    return u < m_ ? u : root_;
  }
  int target(long arc) const {
    if (arc < num_real_arcs_) return m_ + static_cast<int>(arc % n_);
    const int u = static_cast<int>(arc - num_real_arcs_);
    return u < m_ ? root_ : u;
  }
  double arc_cost(long arc) const {
    if (arc < num_real_arcs_) return cost_[static_cast<std::size_t>(arc)];
    return art_cost_;
  }
  double reduced_cost(long arc) const {
    return arc_cost(arc) + pi_[idx(source(arc))] - pi_[idx(target(arc))];
  }

  /// Block search over real arcs: best candidate within the first block that has one.
  long find_entering() {
    long best = -1;
    double best_rc = -eps_;
    long counter = 0;
    for (long k = 0; k < num_real_arcs_; ++k) {
      const long arc = (next_arc_ + k) % num_real_arcs_;
      // Tree arcs have zero reduced cost and are never selected.
      const double rc = reduced_cost(arc);
      if (rc < best_rc) {
        best_rc = rc;
        best = arc;
      }
      if (++counter == block_) {
        if (best >= 0) {
          next_arc_ = (arc + 1) % num_real_arcs_;
          return best;
        }
        counter = 0;
      }
    }
    if (best >= 0) next_arc_ = (best + 1) % num_real_arcs_;
    return best;
  }

  void attach(int u, int p) {
    prev_sibling_[idx(u)] = -1;
    next_sibling_[idx(u)] = first_child_[idx(p)];
    if (first_child_[idx(p)] >= 0) prev_sibling_[idx(first_child_[idx(p)])] = u;
    first_child_[idx(p)] = u;
  }

  void detach(int u, int p) {
    const int prev = prev_sibling_[idx(u)], next = next_sibling_[idx(u)];
    if (prev >= 0) next_sibling_[idx(prev)] = next; else first_child_[idx(p)] = next;
    if (next >= 0) prev_sibling_[idx(next)] = prev;
    prev_sibling_[idx(u)] = next_sibling_[idx(u)] = -1;
  }

  void pivot(long in_arc) {
    const int first = source(in_arc), second = target(in_arc);
    // Join node of the cycle.
    int a = first, b = second;
    while (a != b) {
      if (depth_[idx(a)] > depth_[idx(b)]) a = parent_[idx(a)];
      else if (depth_[idx(b)] > depth_[idx(a)]) b = parent_[idx(b)];
      else { a = parent_[idx(a)]; b = parent_[idx(b)]; }
    }
    const int join = a;

    // Flow is pushed first -> second along the entering arc, then second up
    // to join and join down to first. Ties: last blocking arc on the second
    // path wins, keeping the tree strongly feasible.
    const double inf = std::numeric_limits<double>::infinity();
    double delta = inf;
    int u_out = -1;
    bool out_on_first = false;
    for (int u = first; u != join; u = parent_[idx(u)]) {
      const double d = pred_up_[idx(u)] ? flow_[static_cast<std::size_t>(pred_arc_[idx(u)])] : inf;
      if (d < delta) { delta = d; u_out = u; out_on_first = true; }
    }
    for (int u = second; u != join; u = parent_[idx(u)]) {
      const double d = pred_up_[idx(u)] ? inf : flow_[static_cast<std::size_t>(pred_arc_[idx(u)])];
      if (d < inf && d <= delta) { delta = d; u_out = u; out_on_first = false; }
    }
    if (u_out < 0) throw NumericalError("transport problem is unbounded");

    if (delta > 0.0) {
      flow_[static_cast<std::size_t>(in_arc)] += delta;
      for (int u = first; u != join; u = parent_[idx(u)]) {
        auto& f = flow_[static_cast<std::size_t>(pred_arc_[idx(u)])];
        f = pred_up_[idx(u)] ? f - delta : f + delta;
      }
      for (int u = second; u != join; u = parent_[idx(u)]) {
        auto& f = flow_[static_cast<std::size_t>(pred_arc_[idx(u)])];
        f = pred_up_[idx(u)] ? f + delta : f - delta;
      }
    }

    // Re-hang the subtree cut off by the leaving arc under the entering arc,
    // reversing the parent path from the entering endpoint to u_out.
    const int u_in = out_on_first ? first : second;
    const int v_in = out_on_first ? second : first;
    int u = u_in, new_parent = v_in;
    long new_arc = in_arc;
    while (true) {
      const int old_parent = parent_[idx(u)];
      const long old_arc = pred_arc_[idx(u)];
      detach(u, old_parent);
      parent_[idx(u)] = new_parent;
      pred_arc_[idx(u)] = new_arc;
      pred_up_[idx(u)] = source(new_arc) == u ? 1 : 0;
      attach(u, new_parent);
      if (u == u_out) break;
      new_parent = u;
      new_arc = old_arc;
      u = old_parent;
    }

    // Depths and potentials of the moved subtree.
    stack_.clear();
    stack_.push_back(u_in);
    while (!stack_.empty()) {
      const int w = stack_.back();
      stack_.pop_back();
      const int p = parent_[idx(w)];
      const double c = arc_cost(pred_arc_[idx(w)]);
      depth_[idx(w)] = depth_[idx(p)] + 1;
      pi_[idx(w)] = pred_up_[idx(w)] ? pi_[idx(p)] - c : pi_[idx(p)] + c;
      for (int ch = first_child_[idx(w)]; ch >= 0; ch = next_sibling_[idx(ch)]) stack_.push_back(ch);
    }
  }

  int m_, n_, root_;
  long num_real_arcs_;
  std::vector<double> cost_;
  double art_cost_, eps_;
  std::vector<double> flow_;
  std::vector<int> parent_;
  std::vector<long> pred_arc_;
  std::vector<char> pred_up_;
  std::vector<int> depth_;
  std::vector<double> pi_;
  std::vector<int> first_child_, next_sibling_, prev_sibling_;
  std::vector<int> stack_;
  long block_ = 10;
  long next_arc_ = 0;
  long pivots_ = 0;
};

}  // namespace detail

/// Exact min-cost transport between `supply` and `demand` (equal totals)
/// under the given cost matrix. Also returns dual potentials and the
/// primal/dual feasibility diagnostics used to certify optimality.
inline TransportResult solve_transport(const Eigen::VectorXd& supply, const Eigen::VectorXd& demand,
                                       const Eigen::MatrixXd& cost) {
  if (cost.rows() != supply.size() || cost.cols() != demand.size()) {
    throw ConfigError("transport: cost matrix does not match marginals");
  }
  if ((supply.array() < 0.0).any() || (demand.array() < 0.0).any()) {
    throw ConfigError("transport: marginals must be nonnegative");
  }
  const double total = supply.sum();
  if (std::abs(total - demand.sum()) > 1e-9 * std::max(1.0, total)) {
    throw ConfigError("transport: marginals have different total mass");
  }
  const int m = static_cast<int>(supply.size()), n = static_cast<int>(demand.size());
  TransportResult res;
  res.plan = Eigen::MatrixXd::Zero(m, n);
  res.potential_supply = Eigen::VectorXd::Zero(m);
  res.potential_demand = Eigen::VectorXd::Zero(n);
  if (m == 0 || n == 0) return res;

  // Balance exactly so artificial arcs can drain to zero.
  Eigen::VectorXd demand_balanced = demand;
  demand_balanced(n - 1) += supply.sum() - demand.sum();
  demand_balanced(n - 1) = std::max(demand_balanced(n - 1), 0.0);

  detail::TransportSimplex simplex(supply, demand_balanced, cost);
  simplex.run(200L * (static_cast<long>(m) + n) * (static_cast<long>(m) + n) + 1000000L);
  res.pivots = simplex.pivots();

  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) res.plan(i, j) = simplex.flow(i, j);
  }
  res.cost = (res.plan.array() * cost.array()).sum();
  // Tree arcs have zero reduced cost c + pi_i - pi_j, so alpha = -pi_i, beta = pi_j.
  for (int i = 0; i < m; ++i) res.potential_supply(i) = -simplex.potential(i);
  for (int j = 0; j < n; ++j) res.potential_demand(j) = simplex.potential(m + j);
  // Shift the potentials so they are comparable in magnitude to the costs.
  const double shift = res.potential_supply.minCoeff();
  res.potential_supply.array() -= shift;
  res.potential_demand.array() += shift;
  res.dual_objective = supply.dot(res.potential_supply) + demand.dot(res.potential_demand);

  res.max_marginal_error = std::max((res.plan.rowwise().sum() - supply).cwiseAbs().maxCoeff(),
                                    (res.plan.colwise().sum().transpose() - demand).cwiseAbs().maxCoeff());
  double violation = 0.0;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      violation = std::max(violation, res.potential_supply(i) + res.potential_demand(j) - cost(i, j));
    }
  }
  res.max_dual_violation = violation;
  return res;
}

/// Entropic OT (Sinkhorn) with regularisation `epsilon` (same units as cost),
/// computed in the log domain. Approximate; returns the transport cost of the
/// regularised plan.
inline double sinkhorn_cost(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::MatrixXd& cost,
                            double epsilon, int max_iters = 10000, double tol = 1e-9) {
  if (!(epsilon > 0.0)) throw ConfigError("sinkhorn epsilon must be positive");
  const Eigen::Index m = a.size(), n = b.size();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(m), g = Eigen::VectorXd::Zero(n);
  const Eigen::ArrayXd log_a = a.array().log(), log_b = b.array().log();
  auto lse = [](const Eigen::ArrayXd& v) {
    const double mx = v.maxCoeff();
    return mx + std::log((v - mx).exp().sum());
  };
  for (int it = 0; it < max_iters; ++it) {
    for (Eigen::Index i = 0; i < m; ++i) {
      f(i) = epsilon * log_a(i) - epsilon * lse((g.array() - cost.row(i).transpose().array()) / epsilon);
    }
    double err = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double gj = epsilon * log_b(j) - epsilon * lse((f.array() - cost.col(j).array()) / epsilon);
      err = std::max(err, std::abs(gj - g(j)));
      g(j) = gj;
    }
    if (err < tol) break;
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      total += std::exp((f(i) + g(j) - cost(i, j)) / epsilon) * cost(i, j);
    }
  }
  return total;
}

}  // namespace sgwinv
