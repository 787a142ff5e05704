#include "ftm/model.hpp"

#include "ftm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace ftm {

namespace {

constexpr double kScoreFloor = 1e-12;  // keeps sigmoid output strictly interior
constexpr double kCeClamp = 1e-7;

double sigmoid(double t) {
  const double p = t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
  return std::clamp(p, kScoreFloor, 1.0 - kScoreFloor);
}

Eigen::MatrixXd append_sensitive(const Eigen::MatrixXd& xs, const Eigen::VectorXi& s) {
  Eigen::MatrixXd out(xs.rows(), xs.cols() + 1);
  out.leftCols(xs.cols()) = xs;
  for (int i = 0; i < xs.rows(); ++i) out(i, xs.cols()) = static_cast<double>(s(i));
  return out;
}

std::vector<DenseLayer> zero_like(const ModelParams& params) {
  std::vector<DenseLayer> out;
  out.reserve(params.layers.size());
  for (const DenseLayer& l : params.layers)
    out.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                   Eigen::VectorXd::Zero(l.bias.size())});
  return out;
}

}  // namespace

int ModelParams::feature_dim() const {
  return input_dim() - (include_sensitive ? 1 : 0);
}

ModelParams init_mlp(int feature_dim, bool include_sensitive, std::uint64_t seed) {
  if (feature_dim < 1) throw std::invalid_argument("init_mlp: feature_dim must be positive");
  const int d = feature_dim + (include_sensitive ? 1 : 0);
  const int widths[4] = {d, d, d, 1};

  ModelParams params;
  params.include_sensitive = include_sensitive;
  for (int layer = 0; layer < 3; ++layer) {
    auto g = make_rng(seed, "init", static_cast<std::uint64_t>(layer));
    const int fan_in = widths[layer];
    const int fan_out = widths[layer + 1];
    const double limit = std::sqrt(6.0 / fan_in);
    DenseLayer l;
    l.weight.resize(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) l.weight(r, c) = next_uniform(g, -limit, limit);
    l.bias = Eigen::VectorXd::Zero(fan_out);
    params.layers.push_back(std::move(l));
  }
  return params;
}

ForwardCache forward(const ModelParams& params, const Eigen::MatrixXd& xs,
                     const Eigen::VectorXi& s) {
  if (params.layers.size() != 3) throw std::invalid_argument("forward: expected three layers");
  if (params.include_sensitive && xs.rows() != s.size())
    throw std::invalid_argument("forward: sensitive bits do not match rows");

  ForwardCache cache;
  cache.input = params.include_sensitive ? append_sensitive(xs, s) : xs;
  if (cache.input.cols() != params.layers[0].weight.cols())
    throw std::invalid_argument("forward: feature width does not match the model");

  const auto& [w1, b1] = params.layers[0];
  const auto& [w2, b2] = params.layers[1];
  const auto& [w3, b3] = params.layers[2];

  cache.z1 = (cache.input * w1.transpose()).rowwise() + b1.transpose();
  cache.a1 = cache.z1.cwiseMax(0.0);
  cache.z2 = (cache.a1 * w2.transpose()).rowwise() + b2.transpose();
  cache.a2 = cache.z2.cwiseMax(0.0);
  cache.logits = cache.a2 * w3.transpose().col(0);
  cache.logits.array() += b3(0);
  cache.scores.resize(cache.logits.size());
  for (int i = 0; i < cache.logits.size(); ++i) cache.scores(i) = sigmoid(cache.logits(i));
  return cache;
}

Gradients backward(const ModelParams& params, const ForwardCache& cache,
                   const Eigen::VectorXd& score_grads) {
  if (score_grads.size() != cache.scores.size())
    throw std::invalid_argument("backward: gradient length does not match the batch");

  // dL/dlogit through the sigmoid
  Eigen::VectorXd dlogit(score_grads.size());
  for (int i = 0; i < score_grads.size(); ++i) {
    const double p = cache.scores(i);
    dlogit(i) = score_grads(i) * p * (1.0 - p);
  }

  const auto& [w1, b1] = params.layers[0];
  const auto& [w2, b2] = params.layers[1];
  const auto& [w3, b3] = params.layers[2];
  (void)b1;
  (void)b2;
  (void)b3;

  Gradients grads;
  grads.layers = zero_like(params);

  grads.layers[2].weight.row(0) = dlogit.transpose() * cache.a2;
  grads.layers[2].bias(0) = dlogit.sum();

  // ReLU passes gradient only where the pre-activation was positive
  Eigen::MatrixXd da2 = dlogit * w3.row(0);
  Eigen::MatrixXd dz2 = (cache.z2.array() > 0.0).select(da2, 0.0);
  grads.layers[1].weight = dz2.transpose() * cache.a1;
  grads.layers[1].bias = dz2.colwise().sum();

  Eigen::MatrixXd da1 = dz2 * w2;
  Eigen::MatrixXd dz1 = (cache.z1.array() > 0.0).select(da1, 0.0);
  grads.layers[0].weight = dz1.transpose() * cache.input;
  grads.layers[0].bias = dz1.colwise().sum();
  return grads;
}

AdamState make_adam(const ModelParams& params, double lr) {
  AdamState state;
  state.m = zero_like(params);
  state.v = zero_like(params);
  state.lr = lr;
  return state;
}

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state) {
  if (grads.layers.size() != params.layers.size())
    throw std::invalid_argument("adam_step: gradient shape mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.array().square().matrix();
    p.array() -=
        state.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + state.eps);
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    update(params.layers[l].weight, grads.layers[l].weight, state.m[l].weight,
           state.v[l].weight);
    update(params.layers[l].bias, grads.layers[l].bias, state.m[l].bias, state.v[l].bias);
  }
}

double cross_entropy(double score, int label) {
  const double p = std::clamp(score, kCeClamp, 1.0 - kCeClamp);
  return label == 1 ? -std::log(p) : -std::log(1.0 - p);
}

double cross_entropy_grad(double score, int label) {
  const double p = std::clamp(score, kCeClamp, 1.0 - kCeClamp);
  if (score < kCeClamp || score > 1.0 - kCeClamp) return 0.0;  // clamped region is flat
  return label == 1 ? -1.0 / p : 1.0 / (1.0 - p);
}

nlohmann::json params_to_json(const ModelParams& params) {
  nlohmann::json j;
  j["format"] = "ftm-model";
  j["version"] = 1;
  j["include_sensitive"] = params.include_sensitive;
  j["layers"] = nlohmann::json::array();
  for (const DenseLayer& l : params.layers) {
    nlohmann::json jl;
    jl["rows"] = l.weight.rows();
    jl["cols"] = l.weight.cols();
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weight.size()));
    for (int r = 0; r < l.weight.rows(); ++r)
      for (int c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
    jl["weight"] = w;
    jl["bias"] = std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size());
    j["layers"].push_back(std::move(jl));
  }
  return j;
}

ModelParams params_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "ftm-model")
    throw std::runtime_error("checkpoint: not a model file");
  if (j.value("version", 0) != 1)
    throw std::runtime_error("checkpoint: unsupported version");
  ModelParams params;
  params.include_sensitive = j.at("include_sensitive").get<bool>();
  for (const auto& jl : j.at("layers")) {
    const int rows = jl.at("rows").get<int>();
    const int cols = jl.at("cols").get<int>();
    const auto w = jl.at("weight").get<std::vector<double>>();
    const auto b = jl.at("bias").get<std::vector<double>>();
    if (static_cast<int>(w.size()) != rows * cols || static_cast<int>(b.size()) != rows)
      throw std::runtime_error("checkpoint: layer shape does not match its data");
    DenseLayer l;
    l.weight.resize(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) l.weight(r, c) = w[static_cast<std::size_t>(r) * cols + c];
    l.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
    params.layers.push_back(std::move(l));
  }
  return params;
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out << params_to_json(params).dump(2) << '\n';
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot read " + path);
  nlohmann::json j;
  in >> j;
  return params_from_json(j);
}

Scorer as_scorer(ModelParams params) {
  return [params = std::move(params)](const Eigen::MatrixXd& xs, const Eigen::VectorXi& s) {
    return forward(params, xs, s).scores;
  };
}

}  // namespace ftm
