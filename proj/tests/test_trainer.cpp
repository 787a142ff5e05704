#include "doctest.h"

#include "ftm/matching.hpp"
#include "ftm/ot.hpp"
#include "ftm/rng.hpp"
#include "ftm/synthetic.hpp"
#include "ftm/trainer.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <vector>

using namespace ftm;

namespace {

// two rows per group, blocks by group
Dataset four_point_dataset() {
  Dataset d;
  d.features.resize(4, 2);
  d.features << 0.2, 0.9, 0.8, 0.1, 0.4, 0.6, 0.9, 0.8;
  d.labels.resize(4);
  d.labels << 0, 1, 0, 1;
  d.sensitive.resize(4);
  d.sensitive << 0, 0, 1, 1;
  return d;
}

std::vector<double*> param_refs(ModelParams& p) {
  std::vector<double*> out;
  for (DenseLayer& l : p.layers) {
    for (int r = 0; r < l.weight.rows(); ++r)
      for (int c = 0; c < l.weight.cols(); ++c) out.push_back(&l.weight(r, c));
    for (int i = 0; i < l.bias.size(); ++i) out.push_back(&l.bias(i));
  }
  return out;
}

std::vector<double> flat_grads(const Gradients& g) {
  std::vector<double> out;
  for (const DenseLayer& l : g.layers) {
    for (int r = 0; r < l.weight.rows(); ++r)
      for (int c = 0; c < l.weight.cols(); ++c) out.push_back(l.weight(r, c));
    for (int i = 0; i < l.bias.size(); ++i) out.push_back(l.bias(i));
  }
  return out;
}

void add_into(Gradients& acc, const Gradients& g) {
  for (std::size_t l = 0; l < acc.layers.size(); ++l) {
    acc.layers[l].weight += g.layers[l].weight;
    acc.layers[l].bias += g.layers[l].bias;
  }
}

bool params_equal(const ModelParams& a, const ModelParams& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    if (a.layers[l].weight != b.layers[l].weight) return false;
    if (a.layers[l].bias != b.layers[l].bias) return false;
  }
  return true;
}

SyntheticConfig small_synth(std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.n = 400;
  cfg.d = 3;
  cfg.group_shift = 1.5;
  cfg.label_scale = 2.5;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("one epoch step equals the hand-assembled gradient update") {
  const Dataset data = four_point_dataset();
  TrainConfig cfg;
  cfg.method = Method::ftm;
  cfg.lambda = 0.7;
  cfg.epochs = 1;
  cfg.loss_batch_size = 4;
  cfg.match_batch_size = 2;
  cfg.seed = 31;

  ModelParams params = init_mlp(data.dim(), true, cfg.seed);

  // replicate the loss shuffle and the match draws the epoch will make
  std::vector<int> order(4);
  std::iota(order.begin(), order.end(), 0);
  auto loss_rng = make_rng(cfg.seed, "loss", 0);
  shuffle_in_place(order, loss_rng);

  Eigen::MatrixXd xs(4, 2);
  Eigen::VectorXi ys(4), ss(4);
  for (int k = 0; k < 4; ++k) {
    xs.row(k) = data.features.row(order[k]);
    ys(k) = data.labels(order[k]);
    ss(k) = data.sensitive(order[k]);
  }

  auto match_rng = make_rng(cfg.seed, "match", 0);
  const std::vector<int> pick0 = sample_without_replacement(2, 2, match_rng);
  const std::vector<int> pick1 = sample_without_replacement(2, 2, match_rng);
  Eigen::MatrixXd b0(2, 2), b1(2, 2);
  for (int k = 0; k < 2; ++k) {
    b0.row(k) = data.features.row(pick0[k]);      // group 0 rows are 0,1
    b1.row(k) = data.features.row(2 + pick1[k]);  // group 1 rows are 2,3
  }

  const CostMatrix cost = build_cost_matrix(b0, b1);
  const std::vector<int> assign = solve_assignment(cost).assignment;

  // analytic gradient of the full objective with the assignment frozen
  const ForwardCache loss_cache = forward(params, xs, ss);
  Eigen::VectorXd upstream(4);
  for (int k = 0; k < 4; ++k)
    upstream(k) = cross_entropy_grad(loss_cache.scores(k), ys(k)) / 4.0;
  Gradients manual = backward(params, loss_cache, upstream);

  const ForwardCache c0 = forward(params, b0, Eigen::VectorXi::Zero(2));
  const ForwardCache c1 = forward(params, b1, Eigen::VectorXi::Ones(2));
  Eigen::VectorXd up0 = Eigen::VectorXd::Zero(2), up1 = Eigen::VectorXd::Zero(2);
  for (int i = 0; i < 2; ++i) {
    const double gap = c0.scores(i) - c1.scores(assign[i]);
    const double pull = cfg.lambda / 2.0 * (gap > 0 ? 1.0 : (gap < 0 ? -1.0 : 0.0));
    up0(i) += pull;
    up1(assign[i]) -= pull;
  }
  add_into(manual, backward(params, c0, up0));
  add_into(manual, backward(params, c1, up1));

  // finite differences of the same frozen-assignment objective
  {
    ModelParams probe = params;
    auto refs = param_refs(probe);
    const auto objective = [&]() {
      const ForwardCache lc = forward(probe, xs, ss);
      double val = 0.0;
      for (int k = 0; k < 4; ++k) val += cross_entropy(lc.scores(k), ys(k)) / 4.0;
      const ForwardCache f0 = forward(probe, b0, Eigen::VectorXi::Zero(2));
      const ForwardCache f1 = forward(probe, b1, Eigen::VectorXi::Ones(2));
      for (int i = 0; i < 2; ++i)
        val += cfg.lambda / 2.0 * std::abs(f0.scores(i) - f1.scores(assign[i]));
      return val;
    };
    const auto analytic = flat_grads(manual);
    REQUIRE(analytic.size() == refs.size());
    const double eps = 1e-5;
    for (std::size_t k = 0; k < refs.size(); ++k) {
      const double saved = *refs[k];
      *refs[k] = saved + eps;
      const double hi = objective();
      *refs[k] = saved - eps;
      const double lo = objective();
      *refs[k] = saved;
      const double fd = (hi - lo) / (2.0 * eps);
      const double scale = std::max({std::abs(fd), std::abs(analytic[k]), 1e-8});
      CHECK(std::abs(fd - analytic[k]) / scale <= 1e-4);
    }
  }

  // the epoch applies exactly this gradient through Adam
  ModelParams manual_params = params;
  AdamState manual_opt = make_adam(manual_params, cfg.lr);
  adam_step(manual_params, manual, manual_opt);

  ModelParams epoch_params = params;
  AdamState epoch_opt = make_adam(epoch_params, cfg.lr);
  const EpochStats stats = run_epoch(epoch_params, epoch_opt, data, cfg, 0);
  CHECK(params_equal(epoch_params, manual_params));

  double expected_penalty = 0.0;
  for (int i = 0; i < 2; ++i)
    expected_penalty += std::abs(c0.scores(i) - c1.scores(assign[i])) / 2.0;
  CHECK(stats.mean_penalty == doctest::Approx(expected_penalty).epsilon(1e-12));
}

TEST_CASE("reg penalty gradient matches finite differences") {
  const Dataset data = four_point_dataset();
  TrainConfig cfg;
  cfg.method = Method::reg;
  cfg.lambda = 1.3;
  cfg.loss_batch_size = 4;
  cfg.seed = 32;

  ModelParams params = init_mlp(data.dim(), true, cfg.seed);

  std::vector<int> order(4);
  std::iota(order.begin(), order.end(), 0);
  auto loss_rng = make_rng(cfg.seed, "loss", 0);
  shuffle_in_place(order, loss_rng);
  Eigen::MatrixXd xs(4, 2);
  Eigen::VectorXi ys(4), ss(4);
  for (int k = 0; k < 4; ++k) {
    xs.row(k) = data.features.row(order[k]);
    ys(k) = data.labels(order[k]);
    ss(k) = data.sensitive(order[k]);
  }

  const ForwardCache cache = forward(params, xs, ss);
  Eigen::VectorXd upstream(4);
  for (int k = 0; k < 4; ++k)
    upstream(k) = cross_entropy_grad(cache.scores(k), ys(k)) / 4.0;
  double sum0 = 0.0, sum1 = 0.0;
  for (int k = 0; k < 4; ++k) (ss(k) == 0 ? sum0 : sum1) += cache.scores(k);
  const double gap = sum0 / 2.0 - sum1 / 2.0;
  for (int k = 0; k < 4; ++k)
    upstream(k) += (ss(k) == 0 ? 1.0 : -1.0) * 2.0 * cfg.lambda * gap / 2.0;
  const Gradients manual = backward(params, cache, upstream);

  ModelParams probe = params;
  auto refs = param_refs(probe);
  const auto objective = [&]() {
    const ForwardCache c = forward(probe, xs, ss);
    double val = 0.0, s0 = 0.0, s1 = 0.0;
    for (int k = 0; k < 4; ++k) {
      val += cross_entropy(c.scores(k), ys(k)) / 4.0;
      (ss(k) == 0 ? s0 : s1) += c.scores(k);
    }
    const double g = s0 / 2.0 - s1 / 2.0;
    return val + cfg.lambda * g * g;
  };
  const auto analytic = flat_grads(manual);
  const double eps = 1e-5;
  for (std::size_t k = 0; k < refs.size(); ++k) {
    const double saved = *refs[k];
    *refs[k] = saved + eps;
    const double hi = objective();
    *refs[k] = saved - eps;
    const double lo = objective();
    *refs[k] = saved;
    const double fd = (hi - lo) / (2.0 * eps);
    const double scale = std::max({std::abs(fd), std::abs(analytic[k]), 1e-8});
    CHECK(std::abs(fd - analytic[k]) / scale <= 1e-4);
  }

  ModelParams manual_params = params;
  AdamState manual_opt = make_adam(manual_params, cfg.lr);
  adam_step(manual_params, manual, manual_opt);
  ModelParams epoch_params = params;
  AdamState epoch_opt = make_adam(epoch_params, cfg.lr);
  run_epoch(epoch_params, epoch_opt, data, cfg, 0);
  CHECK(params_equal(epoch_params, manual_params));
}

TEST_CASE("lambda zero reproduces the plain run exactly") {
  const Dataset data = make_synthetic_classification(small_synth(33));
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.loss_batch_size = 128;
  cfg.match_batch_size = 16;
  cfg.seed = 33;

  cfg.method = Method::ftm;
  cfg.lambda = 0.0;
  const TrainResult ftm_run = train(data, cfg);
  cfg.method = Method::unfair;
  const TrainResult plain_run = train(data, cfg);
  CHECK(params_equal(ftm_run.params, plain_run.params));

  cfg.method = Method::reg;
  cfg.lambda = 0.0;
  const TrainResult reg_run = train(data, cfg);
  CHECK(params_equal(reg_run.params, plain_run.params));
}

TEST_CASE("training is deterministic for a fixed config") {
  const Dataset data = make_synthetic_classification(small_synth(34));
  TrainConfig cfg;
  cfg.method = Method::ftm;
  cfg.lambda = 1.0;
  cfg.epochs = 2;
  cfg.loss_batch_size = 128;
  cfg.match_batch_size = 16;
  cfg.seed = 34;
  const TrainResult a = train(data, cfg);
  const TrainResult b = train(data, cfg);
  CHECK(params_equal(a.params, b.params));
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t e = 0; e < a.log.size(); ++e) {
    CHECK(a.log[e].mean_loss == b.log[e].mean_loss);
    CHECK(a.log[e].mean_penalty == b.log[e].mean_penalty);
  }
}

TEST_CASE("plain training separates a separable toy problem") {
  // two clearly separated blobs, labels follow the blob
  auto g = make_rng(35, "blobs");
  const int n = 120;
  Dataset data;
  data.features.resize(n, 2);
  data.labels.resize(n);
  data.sensitive.resize(n);
  for (int i = 0; i < n; ++i) {
    const int y = i % 2;
    data.labels(i) = y;
    data.sensitive(i) = (i / 2) % 2;
    data.features(i, 0) = next_gaussian(g) * 0.3 + (y == 1 ? 2.0 : -2.0);
    data.features(i, 1) = next_gaussian(g) * 0.3;
  }
  TrainConfig cfg;
  cfg.method = Method::unfair;
  cfg.epochs = 300;
  cfg.loss_batch_size = 120;
  cfg.lr = 0.02;
  cfg.lr_decay = 1.0;
  cfg.seed = 35;
  const TrainResult run = train(data, cfg);
  const Eigen::VectorXd scores = forward(run.params, data.features, data.sensitive).scores;
  int correct = 0;
  for (int i = 0; i < n; ++i)
    if ((scores(i) >= 0.5 ? 1 : 0) == data.labels(i)) ++correct;
  CHECK(static_cast<double>(correct) / n >= 0.99);
}

TEST_CASE("the matched-gap penalty shrinks over training") {
  int improved = 0;
  for (std::uint64_t seed : {41, 42, 43}) {
    const Dataset data = make_synthetic_classification(small_synth(seed));
    TrainConfig cfg;
    cfg.method = Method::ftm;
    cfg.lambda = 2.0;
    cfg.epochs = 12;
    cfg.loss_batch_size = 128;
    cfg.match_batch_size = 32;
    cfg.seed = seed;
    const TrainResult run = train(data, cfg);
    if (run.log.back().mean_penalty < run.log.front().mean_penalty) ++improved;
  }
  CHECK(improved >= 2);
}

TEST_CASE("reg pressure reduces the mean score gap") {
  const Dataset data = make_synthetic_classification(small_synth(36));
  TrainConfig cfg;
  cfg.method = Method::reg;
  cfg.epochs = 12;
  cfg.loss_batch_size = 128;
  cfg.seed = 36;
  cfg.lambda = 0.0;
  const TrainResult loose = train(data, cfg);
  cfg.lambda = 5.0;
  const TrainResult tight = train(data, cfg);
  CHECK(tight.log.back().train_dp_bar < loose.log.back().train_dp_bar);
}

TEST_CASE("label-aware matching pairs more equal labels") {
  // features and labels pull in opposite directions: nearest neighbours
  // disagree on the label, the label-aware cost re-pairs across the gap
  Dataset data;
  data.features.resize(4, 1);
  data.features << 0.0, 1.0, 0.1, 0.9;
  data.labels.resize(4);
  data.labels << 0, 1, 1, 0;
  data.sensitive.resize(4);
  data.sensitive << 0, 0, 1, 1;

  TrainConfig cfg;
  cfg.method = Method::ftm;
  cfg.lambda = 1.0;
  cfg.epochs = 1;
  cfg.loss_batch_size = 4;
  cfg.match_batch_size = 2;
  cfg.seed = 37;

  cfg.alpha = 0.0;
  const TrainResult marginal = train(data, cfg);
  cfg.alpha = 100.0;
  const TrainResult joint = train(data, cfg);
  CHECK(marginal.log[0].equal_label_match == 0.0);
  CHECK(joint.log[0].equal_label_match == 1.0);

  // on a label-skewed population the realized fraction sits at the cap set
  // by the batch label counts, and never below the label-blind pairing
  SyntheticConfig synth = small_synth(37);
  synth.label_bias0 = -1.5;
  synth.label_bias1 = 1.5;
  const Dataset skew = make_synthetic_classification(synth);
  cfg.epochs = 2;
  cfg.loss_batch_size = 128;
  cfg.match_batch_size = 32;
  cfg.alpha = 0.0;
  const TrainResult marg_skew = train(skew, cfg);
  cfg.alpha = 100.0;
  const TrainResult joint_skew = train(skew, cfg);
  double marg_frac = 0.0, joint_frac = 0.0;
  for (const EpochStats& e : marg_skew.log) marg_frac += e.equal_label_match;
  for (const EpochStats& e : joint_skew.log) joint_frac += e.equal_label_match;
  CHECK(joint_frac >= marg_frac);
  CHECK(joint_frac / joint_skew.log.size() > 0.15);
}

TEST_CASE("fixed directions agree on the penalty value at the first step") {
  const Dataset data = make_synthetic_classification(small_synth(38));
  TrainConfig cfg;
  cfg.method = Method::ftm;
  cfg.lambda = 1.0;
  cfg.epochs = 1;
  cfg.loss_batch_size = 400;  // one step
  cfg.match_batch_size = 24;
  cfg.resample_matches_per_step = false;
  cfg.seed = 38;

  cfg.direction = MatchDirection::fixed0;
  ModelParams p0 = init_mlp(data.dim(), true, cfg.seed);
  AdamState o0 = make_adam(p0, cfg.lr);
  const EpochStats s0 = run_epoch(p0, o0, data, cfg, 0);

  cfg.direction = MatchDirection::fixed1;
  ModelParams p1 = init_mlp(data.dim(), true, cfg.seed);
  AdamState o1 = make_adam(p1, cfg.lr);
  const EpochStats s1 = run_epoch(p1, o1, data, cfg, 0);

  // same batch, same optimal matching cost: the realized mean gap agrees
  // whichever side the sum runs over
  CHECK(s0.mean_penalty == doctest::Approx(s1.mean_penalty).epsilon(1e-9));
}

TEST_CASE("per-epoch match batches are reused across steps") {
  const Dataset data = make_synthetic_classification(small_synth(39));
  TrainConfig cfg;
  cfg.method = Method::ftm;
  cfg.lambda = 1.0;
  cfg.epochs = 1;
  cfg.loss_batch_size = 100;  // four steps
  cfg.match_batch_size = 16;
  cfg.seed = 39;

  cfg.resample_matches_per_step = true;
  const TrainResult fresh = train(data, cfg);
  cfg.resample_matches_per_step = false;
  const TrainResult reused = train(data, cfg);
  // both modes must run; reuse changes the trajectory
  CHECK(!params_equal(fresh.params, reused.params));
}

TEST_CASE("invalid configs and single-group data are rejected") {
  const Dataset data = four_point_dataset();
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS(train(data, cfg));
  cfg.epochs = 1;
  cfg.lambda = -1.0;
  CHECK_THROWS(train(data, cfg));
  cfg.lambda = 1.0;
  cfg.match_batch_size = 0;
  CHECK_THROWS(train(data, cfg));

  Dataset lonely = data;
  lonely.sensitive.setZero();
  TrainConfig match_cfg;
  match_cfg.method = Method::ftm;
  match_cfg.lambda = 1.0;
  match_cfg.epochs = 1;
  CHECK_THROWS(train(lonely, match_cfg));
  // plain training has no matching step and accepts one group
  match_cfg.method = Method::unfair;
  CHECK_NOTHROW(train(lonely, match_cfg));
}

TEST_CASE("sweep output is order-stable and thread-count independent") {
  const Dataset data = make_synthetic_classification(small_synth(40));
  const auto [train_split, test_split] = split_dataset(data, 0.75, 40);

  TrainConfig base;
  base.method = Method::ftm;
  base.epochs = 2;
  base.loss_batch_size = 128;
  base.match_batch_size = 16;
  base.seed = 40;
  const std::vector<double> grid{0.0, 1.0, 4.0};

  const auto serial = sweep(train_split, test_split, base, grid, 1);
  const auto threaded = sweep(train_split, test_split, base, grid, 3);
  REQUIRE(serial.size() == 3);
  REQUIRE(threaded.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(serial[k].lambda == grid[k]);
    CHECK(serial[k].report.accuracy == threaded[k].report.accuracy);
    CHECK(serial[k].report.wdp == threaded[k].report.wdp);
    CHECK(serial[k].report.dp_bar == threaded[k].report.dp_bar);
  }
  CHECK_THROWS(sweep(train_split, test_split, base, {}, 1));
}

TEST_CASE("train log serializes one json object per epoch") {
  std::vector<EpochStats> log(2);
  log[0].epoch = 0;
  log[0].mean_loss = 0.62;
  log[0].mean_penalty = 0.11;
  log[0].lr = 0.001;
  log[1].epoch = 1;
  log[1].mean_loss = 0.58;
  log[1].mean_penalty = 0.09;
  log[1].lr = 0.00095;
  const std::string path = "train_log_test.jsonl";
  write_train_log(log, path);
  std::ifstream in(path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    const nlohmann::json j = nlohmann::json::parse(line);
    CHECK(j.at("epoch").get<int>() == lines);
    CHECK(j.contains("loss"));
    CHECK(j.contains("penalty"));
    CHECK(j.contains("train_dp_bar"));
    CHECK(j.contains("lr"));
    ++lines;
  }
  CHECK(lines == 2);
  std::remove(path.c_str());
}

}  // TEST_SUITE
