#include "ftm/matching.hpp"

#include "ftm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ftm {

namespace {

std::vector<int> rank_order(const std::vector<double>& s) {
  std::vector<int> idx(s.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](int a, int b) { return s[a] != s[b] ? s[a] < s[b] : a < b; });
  return idx;
}

std::vector<double> to_vector(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

MatchResult quantile_match(const std::vector<double>& scores0,
                           const std::vector<double>& scores1) {
  if (scores0.empty()) throw std::invalid_argument("quantile_match: empty score list");
  if (scores0.size() != scores1.size())
    throw std::invalid_argument("quantile_match: sizes differ, use stochastic_fair_match");

  const std::vector<int> order0 = rank_order(scores0);
  const std::vector<int> order1 = rank_order(scores1);

  MatchResult result;
  result.pairs.reserve(scores0.size());
  double total = 0.0;
  for (std::size_t k = 0; k < scores0.size(); ++k) {
    const double gap = std::abs(scores0[order0[k]] - scores1[order1[k]]);
    result.pairs.push_back({order0[k], order1[k], gap});
    total += gap;
  }
  result.mdp = total / static_cast<double>(scores0.size());
  return result;
}

MatchResult fair_matching_function(const Scorer& scorer, const Eigen::MatrixXd& batch0,
                                   const Eigen::MatrixXd& batch1) {
  if (batch0.rows() != batch1.rows())
    throw std::invalid_argument("fair_matching_function: batch sizes differ");
  const Eigen::VectorXd scores0 =
      scorer(batch0, Eigen::VectorXi::Zero(batch0.rows()));
  const Eigen::VectorXd scores1 =
      scorer(batch1, Eigen::VectorXi::Ones(batch1.rows()));

  // evaluate both source directions and keep the cheaper; with equal batch
  // sizes the rank pairing is shared, so ties resolve to source group 0
  MatchResult from0 = quantile_match(to_vector(scores0), to_vector(scores1));
  from0.source_group = 0;
  MatchResult from1 = quantile_match(to_vector(scores1), to_vector(scores0));
  from1.source_group = 1;
  MatchResult result = (from1.mdp < from0.mdp) ? std::move(from1) : std::move(from0);

  const Eigen::MatrixXd& src = result.source_group == 0 ? batch0 : batch1;
  const Eigen::MatrixXd& dst = result.source_group == 0 ? batch1 : batch0;
  double cost = 0.0;
  for (const MatchedPair& p : result.pairs)
    cost += (src.row(p.source) - dst.row(p.target)).squaredNorm();
  result.transport_cost = cost / static_cast<double>(result.pairs.size());
  return result;
}

double estimate_transport_cost(const Scorer& scorer, const Dataset& data, int m,
                               int num_batches, std::uint64_t seed) {
  if (m < 1 || num_batches < 1)
    throw std::invalid_argument("estimate_transport_cost: m and num_batches must be positive");
  std::vector<int> group0, group1;
  for (int i = 0; i < data.rows(); ++i)
    (data.sensitive(i) == 0 ? group0 : group1).push_back(i);
  if (group0.empty() || group1.empty())
    throw std::invalid_argument("estimate_transport_cost: needs both groups present");

  auto gather = [&](const std::vector<int>& group, std::mt19937_64& g) {
    const std::vector<int> pick =
        static_cast<int>(group.size()) >= m
            ? sample_without_replacement(static_cast<int>(group.size()), m, g)
            : sample_with_replacement(static_cast<int>(group.size()), m, g);
    Eigen::MatrixXd batch(m, data.dim());
    for (int k = 0; k < m; ++k) batch.row(k) = data.features.row(group[pick[k]]);
    return batch;
  };

  double total = 0.0;
  for (int b = 0; b < num_batches; ++b) {
    auto g = make_rng(seed, "cost-batch", static_cast<std::uint64_t>(b));
    const Eigen::MatrixXd batch0 = gather(group0, g);
    const Eigen::MatrixXd batch1 = gather(group1, g);
    total += fair_matching_function(scorer, batch0, batch1).transport_cost;
  }
  return total / num_batches;
}

TransportPlan stochastic_fair_match(const std::vector<double>& scores0,
                                    const std::vector<double>& scores1) {
  const int n0 = static_cast<int>(scores0.size());
  const int n1 = static_cast<int>(scores1.size());
  if (n0 < 1 || n1 < 1) throw std::invalid_argument("stochastic_fair_match: empty score list");

  const std::vector<int> order0 = rank_order(scores0);
  const std::vector<int> order1 = rank_order(scores1);

  // monotone coupling over the sorted scores in integer units of 1/(n0*n1);
  // it is optimal for the absolute gap because the cost is one-dimensional
  // and convex in the difference
  TransportPlan plan;
  plan.kind = TransportPlan::Kind::coupling;
  plan.coupling = Eigen::MatrixXd::Zero(n0, n1);
  const double denom = static_cast<double>(n0) * n1;
  double realized = 0.0;
  int a = 0, b = 0;
  long long left0 = n1, left1 = n0;
  while (a < n0 && b < n1) {
    const long long t = std::min(left0, left1);
    const int i = order0[a];
    const int j = order1[b];
    plan.coupling(i, j) += static_cast<double>(t) / denom;
    realized += static_cast<double>(t) / denom * std::abs(scores0[i] - scores1[j]);
    left0 -= t;
    left1 -= t;
    if (left0 == 0) {
      ++a;
      left0 = n1;
    }
    if (left1 == 0) {
      ++b;
      left1 = n0;
    }
  }
  plan.total_cost = realized;
  plan.row_marginal = Eigen::VectorXd::Constant(n0, 1.0 / n0);
  plan.col_marginal = Eigen::VectorXd::Constant(n1, 1.0 / n1);
  return plan;
}

}  // namespace ftm
