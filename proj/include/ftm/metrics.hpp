#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ftm/data.hpp"
#include "ftm/matching.hpp"
#include "json.hpp"

namespace ftm {

// One evaluation of a model on one dataset. Optional fields stay empty until
// the corresponding quantity was actually computed; JSON writes them as null.
struct FairnessReport {
  double accuracy = 0.0;
  double dp = 0.0;       // thresholded positive-rate gap
  double dp_bar = 0.0;   // mean score gap
  double wdp = 0.0;      // 1-Wasserstein between group score distributions
  double tvdp = 0.0;     // total variation over a fixed binning
  double ksdp = 0.0;     // Kolmogorov-Smirnov sup gap
  double tpr_gap = 0.0;
  double fpr_gap = 0.0;
  double eo = 0.0;       // (tpr_gap + fpr_gap) / 2
  std::optional<double> mdp;
  std::optional<double> transport_cost;
  std::optional<double> consistency;
  double tau = 0.5;

  nlohmann::json to_json() const;
  static std::string csv_header();
  std::string csv_row(double lambda) const;
};

using Mask = std::vector<std::uint8_t>;

std::pair<std::vector<double>, std::vector<double>> split_scores(const Eigen::VectorXd& scores,
                                                                 const Eigen::VectorXi& groups);

double dp_gap(const std::vector<double>& scores0, const std::vector<double>& scores1, double tau);
double dp_bar_gap(const std::vector<double>& scores0, const std::vector<double>& scores1);

// Exact 1-Wasserstein between the two empirical score distributions, by
// merging the quantile breakpoints of both samples. Handles unequal sizes.
double wasserstein_dp(const std::vector<double>& scores0, const std::vector<double>& scores1);

// Total variation over uniform bins on [0,1]; scores outside the range clamp
// into the end bins.
double tv_dp(const std::vector<double>& scores0, const std::vector<double>& scores1,
             int num_bins = 100);

double ks_dp(const std::vector<double>& scores0, const std::vector<double>& scores1);

// dp_bar restricted to the rows selected by the mask; throws when the mask
// leaves either group empty (the restricted gap is undefined there).
double subset_dp_bar(const Eigen::VectorXd& scores, const Eigen::VectorXi& groups,
                     const Mask& mask);

// Masks {i : v . x_i >= 0} for num_subsets random directions v ~ U[-1,1]^d
// (zero bias). Degenerate draws (zero vector, or a mask missing one group)
// are resampled from the same stream.
std::vector<Mask> random_hyperplane_subsets(const Dataset& data, int num_subsets,
                                            std::uint64_t seed);

struct EoGaps {
  double tpr_gap = 0.0;
  double fpr_gap = 0.0;
  double eo = 0.0;
};

EoGaps eo_gaps(const Eigen::VectorXd& scores, const Eigen::VectorXi& labels,
               const Eigen::VectorXi& groups, double tau);

// Fraction of rows whose thresholded prediction survives flipping the
// sensitive bit.
double consistency(const Scorer& scorer, const Dataset& data, double tau);

// Spearman's rho with average ranks for ties.
double spearman_rank_corr(const std::vector<double>& a, const std::vector<double>& b);

// Per-group 2x2 tables of (baseline prediction, adjusted prediction).
// undesirable counts group-1 rows pushed 0 -> 1 plus group-0 rows pushed
// 1 -> 0 by the adjusted model.
struct FlipCounts {
  std::array<std::array<long long, 2>, 2> group0{};
  std::array<std::array<long long, 2>, 2> group1{};
  long long undesirable = 0;
};

FlipCounts flip_confusion(const Eigen::VectorXd& baseline_scores,
                          const Eigen::VectorXd& adjusted_scores, const Eigen::VectorXi& groups,
                          double tau);

// Full report for one model on one dataset: accuracy, the distributional
// gaps, equalized odds, realized matching mdp and consistency.
FairnessReport evaluate_model(const Scorer& scorer, const Dataset& data, double tau = 0.5);

}  // namespace ftm
