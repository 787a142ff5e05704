#pragma once

#include <Eigen/Dense>
#include <vector>

namespace ftm {

// Pairwise ground costs between two point clouds. entries(i, j) is the squared
// euclidean distance between row i of the first cloud and row j of the second,
// plus alpha * |label_i - label_j| when labels participate.
struct CostMatrix {
  Eigen::MatrixXd entries;
  double alpha = 0.0;
};

// Either a one-to-one assignment (equal sizes) or a dense coupling with
// uniform marginals 1/m0 and 1/m1. total_cost is the plan's inner product
// with the cost matrix it was solved against.
struct TransportPlan {
  enum class Kind { assignment, coupling };
  Kind kind = Kind::assignment;
  std::vector<int> assignment;  // assignment kind: row i pairs with column assignment[i]
  Eigen::MatrixXd coupling;     // coupling kind only
  Eigen::VectorXd row_marginal;
  Eigen::VectorXd col_marginal;
  double total_cost = 0.0;
};

CostMatrix build_cost_matrix(const Eigen::MatrixXd& xs0, const Eigen::MatrixXd& xs1,
                             const Eigen::VectorXd* labels0 = nullptr,
                             const Eigen::VectorXd* labels1 = nullptr,
                             double alpha = 0.0);

// Exact minimum-cost perfect matching on a square cost matrix, shortest
// augmenting path solver. total_cost = sum_i cost(i, pi(i)) / m. Among
// equal-cost optima the lexicographically smallest permutation is returned.
TransportPlan solve_assignment(const CostMatrix& cost);

// Exact optimal coupling for uniform marginals on a rectangular cost matrix,
// network simplex on the bipartite transport graph. Row sums are 1/m0 and
// column sums 1/m1 exactly.
TransportPlan solve_kantorovich(const CostMatrix& cost);

// Coupling between two score lists (n0 <= n1) that keeps every shared score
// value in place with weight 1/n1 and spreads the rest so the marginals stay
// uniform. total_cost is the realized mean absolute score gap, bounded by
// 1 - (#shared values)/n1 for scores in [0,1].
TransportPlan construct_common_point_coupling(const std::vector<double>& scores0,
                                              const std::vector<double>& scores1);

// Recompute a plan's objective against a cost matrix (used to cross-check
// total_cost).
double plan_inner_cost(const TransportPlan& plan, const CostMatrix& cost);

}  // namespace ftm
