#include "ftm/synthetic.hpp"

#include "ftm/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace ftm {

namespace {

constexpr double kEigenFloor = 1e-12;

// eigendecomposition with symmetry and positivity checks shared by the
// square root and its inverse
Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> checked_eigen(const Eigen::MatrixXd& m,
                                                             const char* where) {
  if (m.rows() != m.cols()) throw std::invalid_argument(std::string(where) + ": not square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw std::invalid_argument(std::string(where) + ": not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success)
    throw std::runtime_error(std::string(where) + ": eigendecomposition failed");
  if (es.eigenvalues().minCoeff() < -1e-9 * scale)
    throw std::invalid_argument(std::string(where) + ": negative eigenvalue, not SPD");
  return es;
}

double step_sign(double t) { return t >= 0.0 ? 1.0 : -1.0; }  // sign(0) = +1, keeps f total

}  // namespace

Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& m) {
  const auto es = checked_eigen(m, "spd_sqrt");
  const Eigen::VectorXd roots =
      es.eigenvalues().cwiseMax(kEigenFloor).cwiseSqrt();
  return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}

AffineMap gaussian_ot_map(const GaussianPair& pair) {
  if (pair.mu0.size() != pair.mu1.size() || pair.sigma0.rows() != pair.sigma1.rows() ||
      pair.sigma0.rows() != pair.mu0.size())
    throw std::invalid_argument("gaussian_ot_map: dimension mismatch");
  const auto es = checked_eigen(pair.sigma0, "gaussian_ot_map");
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(kEigenFloor);
  const Eigen::MatrixXd q = es.eigenvectors();
  const Eigen::MatrixXd root = q * lam.cwiseSqrt().asDiagonal() * q.transpose();
  const Eigen::MatrixXd root_inv = q * lam.cwiseSqrt().cwiseInverse().asDiagonal() * q.transpose();

  const Eigen::MatrixXd inner = spd_sqrt(root * pair.sigma1 * root);
  AffineMap map;
  map.linear = root_inv * inner * root_inv;
  map.offset = pair.mu1 - map.linear * pair.mu0;
  return map;
}

Eigen::MatrixXd sample_gaussian(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma, int n,
                                std::mt19937_64& g) {
  const Eigen::MatrixXd root = spd_sqrt(sigma);
  Eigen::MatrixXd out(n, mu.size());
  Eigen::VectorXd z(mu.size());
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < mu.size(); ++c) z(c) = next_gaussian(g);
    out.row(i) = (mu + root * z).transpose();
  }
  return out;
}

Eigen::VectorXd scm_counterfactual(const Eigen::VectorXd& x, int s, const LinearScm& scm) {
  const int d = static_cast<int>(scm.a.rows());
  if (x.size() != d) throw std::invalid_argument("scm_counterfactual: dimension mismatch");
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(eye - scm.a);
  if (!lu.isInvertible())
    throw std::invalid_argument("scm_counterfactual: I - A is singular");
  const Eigen::MatrixXd b = lu.inverse();
  const Eigen::VectorXd base_here = b * (s == 0 ? scm.mu0 : scm.mu1);
  const Eigen::VectorXd base_there = b * (s == 0 ? scm.mu1 : scm.mu0);
  const double ratio = s == 0 ? scm.scale1 / scm.scale0 : scm.scale0 / scm.scale1;
  return base_there + ratio * (x - base_here);
}

GaussianPair scm_implied_gaussians(const LinearScm& scm) {
  const int d = static_cast<int>(scm.a.rows());
  if (scm.noise.size() != d || scm.mu0.size() != d || scm.mu1.size() != d)
    throw std::invalid_argument("scm_implied_gaussians: dimension mismatch");
  if (scm.noise.minCoeff() <= 0.0)
    throw std::invalid_argument("scm_implied_gaussians: noise diagonal must be positive");
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(eye - scm.a);
  if (!lu.isInvertible())
    throw std::invalid_argument("scm_implied_gaussians: I - A is singular");
  const Eigen::MatrixXd b = lu.inverse();
  const Eigen::MatrixXd shape = b * scm.noise.asDiagonal() * b.transpose();
  GaussianPair pair;
  pair.mu0 = b * scm.mu0;
  pair.mu1 = b * scm.mu1;
  pair.sigma0 = scm.scale0 * scm.scale0 * shape;
  pair.sigma1 = scm.scale1 * scm.scale1 * shape;
  return pair;
}

StepModelPair make_step_models() {
  StepModelPair pair;
  pair.swapped = [](const Eigen::MatrixXd& xs, const Eigen::VectorXi& s) {
    Eigen::VectorXd out(xs.rows());
    for (int i = 0; i < xs.rows(); ++i) {
      const double flip = 1.0 - 2.0 * (s(i) == 1 ? 1.0 : 0.0);
      out(i) = (step_sign(2.0 * xs(i, 0) - 1.0) * flip + 1.0) / 2.0;
    }
    return out;
  };
  pair.shared = [](const Eigen::MatrixXd& xs, const Eigen::VectorXi&) {
    Eigen::VectorXd out(xs.rows());
    for (int i = 0; i < xs.rows(); ++i) out(i) = (step_sign(2.0 * xs(i, 0) - 1.0) + 1.0) / 2.0;
    return out;
  };
  // shifting half a unit across the decision boundary preserves the score
  // for either source group, and keeps the image inside [0,1]
  pair.swapped_matcher = [](double x, int) { return x - step_sign(2.0 * x - 1.0) / 2.0; };
  pair.shared_matcher = [](double x, int) { return x; };
  return pair;
}

Dataset make_synthetic_classification(const SyntheticConfig& config) {
  if (config.n < 2) throw std::invalid_argument("make_synthetic_classification: n too small");
  if (config.d < 1) throw std::invalid_argument("make_synthetic_classification: d too small");
  if (config.group1_fraction <= 0.0 || config.group1_fraction >= 1.0)
    throw std::invalid_argument("make_synthetic_classification: group fraction must be in (0,1)");

  const int n1 = std::max(
      1, std::min(config.n - 1,
                  static_cast<int>(std::llround(config.group1_fraction * config.n))));
  const int n0 = config.n - n1;

  auto dir_rng = make_rng(config.seed, "direction");
  Eigen::VectorXd w(config.d);
  for (int c = 0; c < config.d; ++c) w(c) = next_gaussian(dir_rng);
  w.normalize();

  const Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(config.d);
  const Eigen::VectorXd mu1 = config.group_shift * w;
  const Eigen::VectorXd mid = 0.5 * (mu0 + mu1);

  Dataset data;
  data.features.resize(config.n, config.d);
  data.labels.resize(config.n);
  data.sensitive.resize(config.n);
  data.provenance = "synthetic";
  data.feature_names.reserve(config.d);
  for (int c = 0; c < config.d; ++c) data.feature_names.push_back("x" + std::to_string(c));

  auto feat_rng = make_rng(config.seed, "features");
  auto label_rng = make_rng(config.seed, "labels");
  for (int i = 0; i < config.n; ++i) {
    const int s = i < n0 ? 0 : 1;
    Eigen::VectorXd x(config.d);
    for (int c = 0; c < config.d; ++c) x(c) = next_gaussian(feat_rng);
    x += s == 0 ? mu0 : mu1;
    const double bias = s == 0 ? config.label_bias0 : config.label_bias1;
    const double logit = config.label_scale * w.dot(x - mid) + bias;
    const double p = 1.0 / (1.0 + std::exp(-logit));
    data.features.row(i) = x.transpose();
    data.sensitive(i) = s;
    data.labels(i) = next_double(label_rng) < p ? 1 : 0;
  }
  return data;
}

Dataset make_grid_dataset(int n) {
  if (n < 1) throw std::invalid_argument("make_grid_dataset: n must be positive");
  Dataset data;
  data.features.resize(2 * n, 1);
  data.labels.resize(2 * n);
  data.sensitive.resize(2 * n);
  data.provenance = "grid";
  data.feature_names = {"x"};
  for (int s = 0; s < 2; ++s)
    for (int i = 0; i < n; ++i) {
      const int row = s * n + i;
      const double x = (i + 0.5) / n;
      data.features(row, 0) = x;
      data.labels(row) = x >= 0.5 ? 1 : 0;
      data.sensitive(row) = s;
    }
  return data;
}

}  // namespace ftm
