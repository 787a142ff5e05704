#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>

#include "ftm/data.hpp"
#include "ftm/matching.hpp"

namespace ftm {

struct AffineMap {
  Eigen::MatrixXd linear;
  Eigen::VectorXd offset;

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const { return linear * x + offset; }
};

struct GaussianPair {
  Eigen::VectorXd mu0, mu1;
  Eigen::MatrixXd sigma0, sigma1;
};

// Symmetric PSD square root via eigendecomposition; eigenvalues clamp at
// 1e-12 and genuinely negative spectra are rejected.
Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& m);

// Closed-form quadratic-cost transport map sending N(mu0, sigma0) onto
// N(mu1, sigma1).
AffineMap gaussian_ot_map(const GaussianPair& pair);

Eigen::MatrixXd sample_gaussian(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma, int n,
                                std::mt19937_64& g);

// x = mu_s + A x + eps, eps ~ N(0, sigma_s^2 diag(noise)); the model is the
// same linear system for both groups, only the mean and noise scale switch.
struct LinearScm {
  Eigen::MatrixXd a;
  Eigen::VectorXd mu0, mu1;
  Eigen::VectorXd noise;  // diagonal of D, strictly positive
  double scale0 = 1.0;    // sigma_0
  double scale1 = 1.0;    // sigma_1
};

// The do-operator answer: where x would have landed had the group bit been
// flipped, holding the exogenous noise fixed.
Eigen::VectorXd scm_counterfactual(const Eigen::VectorXd& x, int s, const LinearScm& scm);

// The per-group observational distributions the SCM induces.
GaussianPair scm_implied_gaussians(const LinearScm& scm);

// The two closed-form step models on [0,1] x {0,1}. Both score groups
// identically in distribution, so every marginal gap measure vanishes, yet
// the swapped model reverses its decision across groups: its fair matcher
// must ship each point half a unit, while the shared model's matcher is the
// identity.
struct StepModelPair {
  Scorer swapped;
  Scorer shared;
  std::function<double(double, int)> swapped_matcher;
  std::function<double(double, int)> shared_matcher;
  double swapped_cost = 0.25;
  double shared_cost = 0.0;
};

StepModelPair make_step_models();

struct SyntheticConfig {
  int n = 1000;
  int d = 5;
  double group_shift = 1.0;      // distance between the group means
  double group1_fraction = 0.5;  // share of rows with s = 1
  double label_scale = 2.0;      // steepness of the logistic label rule
  double label_bias0 = 0.0;      // per-group offsets of the label logit
  double label_bias1 = 0.0;
  std::uint64_t seed = 0;
};

// Two unit-covariance Gaussian clouds separated by group_shift along a
// seeded random direction; labels are Bernoulli with a logistic probability
// along that same direction, centered between the groups.
Dataset make_synthetic_classification(const SyntheticConfig& config);

// 2n one-dimensional rows: both groups sit on the midpoint grid
// (i + 0.5)/n with label 1[x >= 1/2]. Deterministic, no sampling noise.
Dataset make_grid_dataset(int n);

}  // namespace ftm
