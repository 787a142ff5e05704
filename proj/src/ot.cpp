#include "ftm/ot.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace ftm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Jonker-Volgenant shortest augmenting path solver for the dense square LAP.
// Column reduction and reduction transfer seed the duals, then every row that
// is still free gets augmented along a cheapest alternating path. Duals are
// returned so the caller can reason about the tight-edge graph.
void jv_solve(const Eigen::MatrixXd& c, std::vector<int>& rowsol, std::vector<int>& colsol,
              std::vector<double>& u, std::vector<double>& v) {
  const int n = static_cast<int>(c.rows());
  rowsol.assign(n, -1);
  colsol.assign(n, -1);
  u.assign(n, 0.0);
  v.assign(n, 0.0);

  std::vector<int> matches(n, 0);
  for (int j = n - 1; j >= 0; --j) {
    double minv = c(0, j);
    int imin = 0;
    for (int i = 1; i < n; ++i)
      if (c(i, j) < minv) {
        minv = c(i, j);
        imin = i;
      }
    v[j] = minv;
    if (++matches[imin] == 1) {
      rowsol[imin] = j;
      colsol[j] = imin;
    }
  }

  std::vector<int> free_rows;
  free_rows.reserve(n);
  for (int i = 0; i < n; ++i) {
    if (matches[i] == 0) {
      free_rows.push_back(i);
    } else if (matches[i] == 1 && n > 1) {
      const int j1 = rowsol[i];
      double minv = kInf;
      for (int j = 0; j < n; ++j)
        if (j != j1) minv = std::min(minv, c(i, j) - v[j]);
      if (std::isfinite(minv)) v[j1] -= minv;
    }
  }

  std::vector<double> d(n);
  std::vector<int> pred(n), collist(n);
  for (const int f : free_rows) {
    int endofpath = -1;
    int last = -1;
    double minv = 0.0;
    for (int j = 0; j < n; ++j) {
      d[j] = c(f, j) - v[j];
      pred[j] = f;
      collist[j] = j;
    }
    int low = 0, up = 0;
    bool done = false;
    while (!done) {
      if (up == low) {
        last = low - 1;
        minv = d[collist[up++]];
        for (int k = up; k < n; ++k) {
          const int j = collist[k];
          const double h = d[j];
          if (h <= minv) {
            if (h < minv) {
              up = low;
              minv = h;
            }
            collist[k] = collist[up];
            collist[up++] = j;
          }
        }
        for (int k = low; k < up; ++k) {
          if (colsol[collist[k]] < 0) {
            endofpath = collist[k];
            done = true;
            break;
          }
        }
      }
      if (!done) {
        const int j1 = collist[low++];
        const int i = colsol[j1];
        const double h = c(i, j1) - v[j1] - minv;
        for (int k = up; k < n; ++k) {
          const int j = collist[k];
          const double v2 = c(i, j) - v[j] - h;
          if (v2 < d[j]) {
            pred[j] = i;
            if (v2 == minv) {
              if (colsol[j] < 0) {
                endofpath = j;
                done = true;
                break;
              }
              collist[k] = collist[up];
              collist[up++] = j;
            }
            d[j] = v2;
          }
        }
      }
    }
    for (int k = 0; k <= last; ++k) {
      const int j1 = collist[k];
      v[j1] += d[j1] - minv;
    }
    int i;
    do {
      i = pred[endofpath];
      colsol[endofpath] = i;
      std::swap(rowsol[i], endofpath);
    } while (i != f);
  }
  for (int i = 0; i < n; ++i) u[i] = c(i, rowsol[i]) - v[rowsol[i]];
}

// Complementary slackness: optimal assignments are exactly the perfect
// matchings of the zero-reduced-cost graph under optimal duals. Fix rows in
// order to their smallest admissible column; each candidate is validated by
// rerouting the displaced row with one alternating path search, so the
// matching stays perfect throughout.
void lexicographic_refine(const Eigen::MatrixXd& c, std::vector<int>& rowsol,
                          std::vector<int>& colsol, const std::vector<double>& u,
                          const std::vector<double>& v) {
  const int n = static_cast<int>(c.rows());
  const double eps = 1e-10 * std::max(1.0, c.cwiseAbs().maxCoeff());

  std::vector<std::vector<int>> tight(n);
  bool any_choice = false;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j)
      if (c(i, j) - u[i] - v[j] <= eps) tight[i].push_back(j);
    if (tight[i].size() > 1) any_choice = true;
  }
  if (!any_choice) return;

  std::vector<char> locked_col(n, 0), used_col(n, 0);
  std::function<bool(int)> try_row = [&](int r) -> bool {
    for (int j : tight[r]) {
      if (locked_col[j] || used_col[j]) continue;
      used_col[j] = 1;
      if (colsol[j] < 0 || try_row(colsol[j])) {
        colsol[j] = r;
        rowsol[r] = j;
        return true;
      }
    }
    return false;
  };

  for (int i = 0; i < n; ++i) {
    const int cur = rowsol[i];
    for (int j : tight[i]) {
      if (j >= cur) break;
      if (locked_col[j]) continue;
      const int displaced = colsol[j];
      colsol[cur] = -1;
      rowsol[i] = j;
      colsol[j] = i;
      bool ok = true;
      if (displaced >= 0) {
        std::fill(used_col.begin(), used_col.end(), 0);
        used_col[j] = 1;
        rowsol[displaced] = -1;
        if (!try_row(displaced)) {
          ok = false;
          rowsol[displaced] = j;
          colsol[j] = displaced;
          rowsol[i] = cur;
          colsol[cur] = i;
        }
      }
      if (ok) break;
    }
    locked_col[rowsol[i]] = 1;
  }
}

// Network simplex specialized to the dense bipartite transportation problem
// with uniform marginals. Supplies are scaled to integers (each of the m0
// rows ships m1 units, each of the m1 columns receives m0), so basic flows
// stay exactly integral and the marginals divide back without drift. Entering
// arcs use Dantzig pricing; after a run of degenerate pivots the rule falls
// back to Bland's (lowest flat index in and out), which rules out cycling.
class TransportSimplex {
 public:
  explicit TransportSimplex(const Eigen::MatrixXd& c)
      : c_(c),
        R_(static_cast<int>(c.rows())),
        C_(static_cast<int>(c.cols())),
        N_(R_ + C_) {}

  void solve() {
    northwest_init();
    rebuild_tree();
    const double eps = 1e-13 * std::max(1.0, c_.cwiseAbs().maxCoeff());
    long long stall = 0;
    const long long stall_limit = 4LL * N_;
    bool bland = false;
    while (true) {
      const auto [ei, ej] = bland ? first_negative(eps) : most_negative(eps);
      if (ei < 0) break;
      const long long delta = pivot(ei, ej, bland);
      if (delta > 0)
        stall = 0;
      else if (++stall > stall_limit)
        bland = true;
      rebuild_tree();
    }
  }

  Eigen::MatrixXd coupling() const {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(R_, C_);
    const double denom = static_cast<double>(R_) * C_;
    for (const Arc& a : arcs_) g(a.i, a.j) += static_cast<double>(a.flow) / denom;
    return g;
  }

  double total_cost() const {
    const double denom = static_cast<double>(R_) * C_;
    double t = 0.0;
    for (const Arc& a : arcs_) t += static_cast<double>(a.flow) * c_(a.i, a.j);
    return t / denom;
  }

 private:
  struct Arc {
    int i, j;
    long long flow;
  };

  void northwest_init() {
    std::vector<long long> a(R_, C_), b(C_, R_);
    int i = 0, j = 0;
    while (static_cast<int>(arcs_.size()) < N_ - 1) {
      const long long t = std::min(a[i], b[j]);
      arcs_.push_back({i, j, t});
      a[i] -= t;
      b[j] -= t;
      if (a[i] == 0 && i < R_ - 1)
        ++i;
      else
        ++j;
    }
  }

  // parents, depths and duals from a BFS over the current basis tree
  void rebuild_tree() {
    adj_.assign(N_, {});
    for (int k = 0; k < static_cast<int>(arcs_.size()); ++k) {
      adj_[arcs_[k].i].push_back(k);
      adj_[R_ + arcs_[k].j].push_back(k);
    }
    parent_.assign(N_, -1);
    parent_arc_.assign(N_, -1);
    depth_.assign(N_, 0);
    u_.assign(R_, 0.0);
    v_.assign(C_, 0.0);
    std::vector<int> queue = {0};
    std::vector<char> seen(N_, 0);
    seen[0] = 1;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const int node = queue[q];
      for (const int k : adj_[node]) {
        const Arc& a = arcs_[k];
        const int other = (node == a.i) ? R_ + a.j : a.i;
        if (seen[other]) continue;
        seen[other] = 1;
        parent_[other] = node;
        parent_arc_[other] = k;
        depth_[other] = depth_[node] + 1;
        if (other >= R_)
          v_[other - R_] = c_(a.i, a.j) - u_[a.i];
        else
          u_[other] = c_(a.i, a.j) - v_[a.j];
        queue.push_back(other);
      }
    }
  }

  std::pair<int, int> most_negative(double eps) const {
    double best = -eps;
    int bi = -1, bj = -1;
    for (int i = 0; i < R_; ++i)
      for (int j = 0; j < C_; ++j) {
        const double r = c_(i, j) - u_[i] - v_[j];
        if (r < best) {
          best = r;
          bi = i;
          bj = j;
        }
      }
    return {bi, bj};
  }

  std::pair<int, int> first_negative(double eps) const {
    for (int i = 0; i < R_; ++i)
      for (int j = 0; j < C_; ++j)
        if (c_(i, j) - u_[i] - v_[j] < -eps) return {i, j};
    return {-1, -1};
  }

  // Add arc (ei, ej), push the largest feasible flow around the unique tree
  // cycle, drop the blocking arc. Cells along the cycle alternate sign
  // starting from -1 next to the entering cell on both sides of the walk to
  // the lowest common ancestor.
  long long pivot(int ei, int ej, bool bland) {
    struct Step {
      int arc;
      int sign;
    };
    std::vector<Step> cycle;
    int x = ei, y = R_ + ej;
    int sx = -1, sy = -1;
    while (x != y) {
      if (depth_[x] >= depth_[y]) {
        cycle.push_back({parent_arc_[x], sx});
        sx = -sx;
        x = parent_[x];
      } else {
        cycle.push_back({parent_arc_[y], sy});
        sy = -sy;
        y = parent_[y];
      }
    }

    long long delta = std::numeric_limits<long long>::max();
    int leave = -1;
    auto arc_index = [&](int k) { return arcs_[k].i * C_ + arcs_[k].j; };
    for (const Step& s : cycle) {
      if (s.sign != -1) continue;
      const long long f = arcs_[s.arc].flow;
      if (f < delta || (f == delta && bland && leave >= 0 && arc_index(s.arc) < arc_index(leave))) {
        delta = f;
        leave = s.arc;
      }
    }

    for (const Step& s : cycle) arcs_[s.arc].flow += s.sign * delta;
    arcs_[leave] = {ei, ej, delta};
    return delta;
  }

  const Eigen::MatrixXd& c_;
  const int R_, C_, N_;
  std::vector<Arc> arcs_;
  std::vector<std::vector<int>> adj_;
  std::vector<int> parent_, parent_arc_, depth_;
  std::vector<double> u_, v_;
};

}  // namespace

CostMatrix build_cost_matrix(const Eigen::MatrixXd& xs0, const Eigen::MatrixXd& xs1,
                             const Eigen::VectorXd* labels0, const Eigen::VectorXd* labels1,
                             double alpha) {
  if (xs0.rows() < 1 || xs1.rows() < 1)
    throw std::invalid_argument("build_cost_matrix: empty point set");
  if (xs0.cols() != xs1.cols())
    throw std::invalid_argument("build_cost_matrix: feature dimensions differ");
  if (alpha < 0.0) throw std::invalid_argument("build_cost_matrix: alpha must be >= 0");
  if (alpha > 0.0) {
    if (labels0 == nullptr || labels1 == nullptr)
      throw std::invalid_argument("build_cost_matrix: alpha > 0 requires labels");
    if (labels0->size() != xs0.rows() || labels1->size() != xs1.rows())
      throw std::invalid_argument("build_cost_matrix: label lengths differ from point counts");
  }

  CostMatrix out;
  out.alpha = alpha;
  out.entries.noalias() = -2.0 * xs0 * xs1.transpose();
  out.entries.colwise() += xs0.rowwise().squaredNorm();
  out.entries.rowwise() += xs1.rowwise().squaredNorm().transpose();
  out.entries = out.entries.cwiseMax(0.0);
  if (alpha > 0.0) {
    for (int i = 0; i < xs0.rows(); ++i)
      for (int j = 0; j < xs1.rows(); ++j)
        out.entries(i, j) += alpha * std::abs((*labels0)(i) - (*labels1)(j));
  }
  return out;
}

TransportPlan solve_assignment(const CostMatrix& cost) {
  const auto& c = cost.entries;
  const int m = static_cast<int>(c.rows());
  if (m == 0) throw std::invalid_argument("solve_assignment: empty cost matrix");
  if (c.rows() != c.cols())
    throw std::invalid_argument("solve_assignment: cost matrix must be square");

  TransportPlan plan;
  plan.kind = TransportPlan::Kind::assignment;
  std::vector<int> rowsol, colsol;
  std::vector<double> u, v;
  if (m == 1) {
    rowsol = {0};
  } else {
    jv_solve(c, rowsol, colsol, u, v);
    lexicographic_refine(c, rowsol, colsol, u, v);
  }
  plan.assignment = rowsol;
  double total = 0.0;
  for (int i = 0; i < m; ++i) total += c(i, rowsol[i]);
  plan.total_cost = total / m;
  plan.row_marginal = Eigen::VectorXd::Constant(m, 1.0 / m);
  plan.col_marginal = Eigen::VectorXd::Constant(m, 1.0 / m);
  return plan;
}

TransportPlan solve_kantorovich(const CostMatrix& cost) {
  const auto& c = cost.entries;
  if (c.rows() < 1 || c.cols() < 1)
    throw std::invalid_argument("solve_kantorovich: empty cost matrix");

  TransportSimplex simplex(c);
  simplex.solve();

  TransportPlan plan;
  plan.kind = TransportPlan::Kind::coupling;
  plan.coupling = simplex.coupling();
  plan.total_cost = simplex.total_cost();
  plan.row_marginal = Eigen::VectorXd::Constant(c.rows(), 1.0 / c.rows());
  plan.col_marginal = Eigen::VectorXd::Constant(c.cols(), 1.0 / c.cols());
  return plan;
}

TransportPlan construct_common_point_coupling(const std::vector<double>& scores0,
                                              const std::vector<double>& scores1) {
  const int n0 = static_cast<int>(scores0.size());
  const int n1 = static_cast<int>(scores1.size());
  if (n0 < 1) throw std::invalid_argument("construct_common_point_coupling: empty list");
  if (n0 > n1)
    throw std::invalid_argument("construct_common_point_coupling: needs n0 <= n1, swap the arguments");

  auto sorted_order = [](const std::vector<double>& s) {
    std::vector<int> idx(s.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      return s[a] != s[b] ? s[a] < s[b] : a < b;
    });
    return idx;
  };
  const std::vector<int> order0 = sorted_order(scores0);
  const std::vector<int> order1 = sorted_order(scores1);

  // multiset intersection on exact score equality: each point pairs at most once
  std::vector<char> shared0(n0, 0), shared1(n1, 0);
  std::vector<std::pair<int, int>> shared_pairs;
  for (int a = 0, b = 0; a < n0 && b < n1;) {
    const double sa = scores0[order0[a]];
    const double sb = scores1[order1[b]];
    if (sa == sb) {
      shared_pairs.emplace_back(order0[a], order1[b]);
      shared0[order0[a]] = 1;
      shared1[order1[b]] = 1;
      ++a;
      ++b;
    } else if (sa < sb) {
      ++a;
    } else {
      ++b;
    }
  }

  // Integer mass units scaled by n0*n1: every row ships n1 units, every
  // column receives n0. Shared pairs keep n0 units in place; the leftover
  // (n1 - n0 per shared row, n1 per unshared row) fills the unshared columns
  // northwest-corner style over the score-sorted orderings.
  Eigen::MatrixXd coupling = Eigen::MatrixXd::Zero(n0, n1);
  const double denom = static_cast<double>(n0) * n1;
  double realized = 0.0;
  for (const auto& [i, j] : shared_pairs) coupling(i, j) = static_cast<double>(n0) / denom;

  std::vector<std::pair<int, long long>> rows;  // (original row, remaining units)
  for (const int i : order0)
    if (shared0[i]) rows.emplace_back(i, static_cast<long long>(n1 - n0));
  for (const int i : order0)
    if (!shared0[i]) rows.emplace_back(i, static_cast<long long>(n1));
  std::vector<std::pair<int, long long>> cols;
  for (const int j : order1)
    if (!shared1[j]) cols.emplace_back(j, static_cast<long long>(n0));

  std::size_t r = 0, q = 0;
  while (r < rows.size() && q < cols.size()) {
    auto& [ri, rleft] = rows[r];
    auto& [cj, cleft] = cols[q];
    const long long t = std::min(rleft, cleft);
    if (t > 0) {
      coupling(ri, cj) += static_cast<double>(t) / denom;
      realized += static_cast<double>(t) / denom * std::abs(scores0[ri] - scores1[cj]);
      rleft -= t;
      cleft -= t;
    }
    if (rleft == 0)
      ++r;
    else
      ++q;
  }

  TransportPlan plan;
  plan.kind = TransportPlan::Kind::coupling;
  plan.coupling = std::move(coupling);
  plan.total_cost = realized;
  plan.row_marginal = Eigen::VectorXd::Constant(n0, 1.0 / n0);
  plan.col_marginal = Eigen::VectorXd::Constant(n1, 1.0 / n1);
  return plan;
}

double plan_inner_cost(const TransportPlan& plan, const CostMatrix& cost) {
  if (plan.kind == TransportPlan::Kind::assignment) {
    double t = 0.0;
    for (int i = 0; i < static_cast<int>(plan.assignment.size()); ++i)
      t += cost.entries(i, plan.assignment[i]);
    return t / static_cast<double>(plan.assignment.size());
  }
  return (plan.coupling.array() * cost.entries.array()).sum();
}

}  // namespace ftm
