#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "ftm/matching.hpp"
#include "json.hpp"

namespace ftm {

// One affine layer; weight is (out x in), applied as x W^T + b.
struct DenseLayer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

// The classifier: two ReLU hidden layers whose width equals the input
// dimension, then a sigmoid head. When include_sensitive is set the group
// bit is appended to the features before the first layer.
struct ModelParams {
  std::vector<DenseLayer> layers;
  bool include_sensitive = true;

  int feature_dim() const;  // raw feature count, excluding the appended bit
  int input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers[0].weight.cols()); }
};

ModelParams init_mlp(int feature_dim, bool include_sensitive, std::uint64_t seed);

// Everything backward needs from a forward pass.
struct ForwardCache {
  Eigen::MatrixXd input;   // rows with the group bit already appended
  Eigen::MatrixXd z1, a1;  // first hidden pre/post activation
  Eigen::MatrixXd z2, a2;  // second hidden pre/post activation
  Eigen::VectorXd logits;
  Eigen::VectorXd scores;  // sigmoid(logits), kept strictly inside (0,1)
};

ForwardCache forward(const ModelParams& params, const Eigen::MatrixXd& xs,
                     const Eigen::VectorXi& s);

struct Gradients {
  std::vector<DenseLayer> layers;  // same shapes as the parameters
};

// Chain rule from per-row score gradients down to every parameter. No
// normalization happens here; callers bake 1/n or lambda/m into score_grads.
Gradients backward(const ModelParams& params, const ForwardCache& cache,
                   const Eigen::VectorXd& score_grads);

struct AdamState {
  std::vector<DenseLayer> m, v;
  long long step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState make_adam(const ModelParams& params, double lr);
void adam_step(ModelParams& params, const Gradients& grads, AdamState& state);

// Binary cross-entropy with the score clamped to [1e-7, 1 - 1e-7].
double cross_entropy(double score, int label);
double cross_entropy_grad(double score, int label);

nlohmann::json params_to_json(const ModelParams& params);
ModelParams params_from_json(const nlohmann::json& j);
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

// Adapter to the audit-facing score interface; copies the parameters.
Scorer as_scorer(ModelParams params);

}  // namespace ftm
