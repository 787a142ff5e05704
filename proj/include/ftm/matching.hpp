#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

#include "ftm/data.hpp"
#include "ftm/ot.hpp"

namespace ftm {

// Batched score function: given feature rows and the sensitive bit per row,
// return one score in [0,1] per row. Trained models and closed-form models
// both expose this shape.
using Scorer =
    std::function<Eigen::VectorXd(const Eigen::MatrixXd& xs, const Eigen::VectorXi& s)>;

struct MatchedPair {
  int source = 0;  // index into the source group's list
  int target = 0;  // index into the other group's list
  double score_gap = 0.0;
};

struct MatchResult {
  int source_group = 0;
  std::vector<MatchedPair> pairs;
  double mdp = 0.0;             // mean absolute score gap over the matching
  double transport_cost = 0.0;  // mean squared input distance (0 when inputs are unknown)
};

// Rank k pairs with rank k between two equal-size score lists; ties sort by
// original index. The resulting mean gap equals the one-dimensional
// Wasserstein distance between the two score samples.
MatchResult quantile_match(const std::vector<double>& scores0,
                           const std::vector<double>& scores1);

// Score both batches with their own group bit, quantile-match the scores in
// both source directions and keep the cheaper one (ties prefer group 0).
// transport_cost is the mean squared input distance over the matched pairs.
MatchResult fair_matching_function(const Scorer& scorer, const Eigen::MatrixXd& batch0,
                                   const Eigen::MatrixXd& batch1);

// Mean matched input cost over num_batches seeded mini-batches of size m per
// group (sampled without replacement when the group is large enough, with
// replacement otherwise). Per-batch RNG streams derive from (seed, batch).
double estimate_transport_cost(const Scorer& scorer, const Dataset& data, int m,
                               int num_batches, std::uint64_t seed);

// Optimal coupling between score lists of unequal sizes under the absolute
// gap cost. Sorting makes the monotone coupling optimal here, so this solves
// the same problem as solve_kantorovich on the |gap| matrix, in n log n.
TransportPlan stochastic_fair_match(const std::vector<double>& scores0,
                                    const std::vector<double>& scores1);

}  // namespace ftm
