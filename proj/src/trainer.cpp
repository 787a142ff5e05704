#include "ftm/trainer.hpp"

#include "ftm/matching.hpp"
#include "ftm/ot.hpp"
#include "ftm/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <utility>

namespace ftm {

namespace {

void add_into(Gradients& acc, const Gradients& g) {
  for (std::size_t l = 0; l < acc.layers.size(); ++l) {
    acc.layers[l].weight += g.layers[l].weight;
    acc.layers[l].bias += g.layers[l].bias;
  }
}

double sign_of(double t) { return t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0); }

struct GroupIndex {
  std::vector<int> rows0, rows1;
};

GroupIndex index_groups(const Dataset& data) {
  GroupIndex idx;
  for (int i = 0; i < data.rows(); ++i)
    (data.sensitive(i) == 0 ? idx.rows0 : idx.rows1).push_back(i);
  return idx;
}

struct MatchBatch {
  Eigen::MatrixXd xs0, xs1;
  Eigen::VectorXi ys0, ys1;
};

MatchBatch gather_match_batch(const Dataset& data, const GroupIndex& idx, int m,
                              std::mt19937_64& g) {
  auto gather = [&](const std::vector<int>& rows, Eigen::MatrixXd& xs, Eigen::VectorXi& ys) {
    const int n = static_cast<int>(rows.size());
    const std::vector<int> pick = n >= m ? sample_without_replacement(n, m, g)
                                         : sample_with_replacement(n, m, g);
    xs.resize(m, data.dim());
    ys.resize(m);
    for (int k = 0; k < m; ++k) {
      xs.row(k) = data.features.row(rows[pick[k]]);
      ys(k) = data.labels(rows[pick[k]]);
    }
  };
  MatchBatch batch;
  gather(idx.rows0, batch.xs0, batch.ys0);
  gather(idx.rows1, batch.xs1, batch.ys1);
  return batch;
}

// Matched-gap penalty and its score gradients for one step. The assignment
// is recomputed from the current scores' inputs but treated as a constant
// under differentiation; only the two score evaluations carry gradient.
struct PenaltyResult {
  double value = 0.0;          // mean |score gap|, before lambda
  double equal_labels = 0.0;   // fraction of pairs with matching labels
};

PenaltyResult apply_match_penalty(const ModelParams& params, const MatchBatch& batch,
                                  const TrainConfig& config, int source,
                                  Gradients& grads) {
  const int m = static_cast<int>(batch.xs0.rows());
  CostMatrix cost;
  if (config.alpha > 0.0) {
    const Eigen::VectorXd y0 = batch.ys0.cast<double>();
    const Eigen::VectorXd y1 = batch.ys1.cast<double>();
    cost = build_cost_matrix(batch.xs0, batch.xs1, &y0, &y1, config.alpha);
  } else {
    cost = build_cost_matrix(batch.xs0, batch.xs1);
  }

  // pairs[i] = the group-1 row matched to group-0 row i
  std::vector<int> pairs(m);
  if (source == 0) {
    const TransportPlan plan = solve_assignment(cost);
    pairs = plan.assignment;
  } else {
    CostMatrix flipped;
    flipped.alpha = cost.alpha;
    flipped.entries = cost.entries.transpose();
    const TransportPlan plan = solve_assignment(flipped);
    for (int j = 0; j < m; ++j) pairs[plan.assignment[j]] = j;
  }

  const ForwardCache cache0 = forward(params, batch.xs0, Eigen::VectorXi::Zero(m));
  const ForwardCache cache1 = forward(params, batch.xs1, Eigen::VectorXi::Ones(m));

  Eigen::VectorXd up0 = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd up1 = Eigen::VectorXd::Zero(m);
  PenaltyResult result;
  for (int i = 0; i < m; ++i) {
    const int j = pairs[i];
    const double gap = cache0.scores(i) - cache1.scores(j);
    result.value += std::abs(gap);
    if (batch.ys0(i) == batch.ys1(j)) result.equal_labels += 1.0;
    const double pull = config.lambda / m * sign_of(gap);
    up0(i) += pull;
    up1(j) -= pull;
  }
  result.value /= m;
  result.equal_labels /= m;

  add_into(grads, backward(params, cache0, up0));
  add_into(grads, backward(params, cache1, up1));
  return result;
}

}  // namespace

EpochStats run_epoch(ModelParams& params, AdamState& opt, const Dataset& data,
                     const TrainConfig& config, int epoch) {
  const int n = data.rows();
  if (n < 1) throw std::invalid_argument("run_epoch: empty dataset");
  const GroupIndex idx = index_groups(data);
  const bool matching = config.method == Method::ftm && config.lambda > 0.0;
  if (matching && (idx.rows0.empty() || idx.rows1.empty()))
    throw std::invalid_argument("run_epoch: matching needs both groups");

  const int batch = std::min(config.loss_batch_size, n);
  const int steps = std::max(1, n / batch);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto loss_rng = make_rng(config.seed, "loss", static_cast<std::uint64_t>(epoch));
  shuffle_in_place(order, loss_rng);

  MatchBatch epoch_batch;
  if (matching && !config.resample_matches_per_step) {
    auto g = make_rng(config.seed, "match", static_cast<std::uint64_t>(epoch) << 32);
    epoch_batch = gather_match_batch(data, idx, config.match_batch_size, g);
  }

  EpochStats stats;
  stats.epoch = epoch;
  stats.lr = opt.lr;
  for (int step = 0; step < steps; ++step) {
    const int take = batch;
    Eigen::MatrixXd xs(take, data.dim());
    Eigen::VectorXi ys(take), ss(take);
    for (int k = 0; k < take; ++k) {
      const int row = order[step * batch + k];
      xs.row(k) = data.features.row(row);
      ys(k) = data.labels(row);
      ss(k) = data.sensitive(row);
    }

    const ForwardCache cache = forward(params, xs, ss);
    Eigen::VectorXd upstream(take);
    double loss = 0.0;
    for (int k = 0; k < take; ++k) {
      loss += cross_entropy(cache.scores(k), ys(k));
      upstream(k) = cross_entropy_grad(cache.scores(k), ys(k)) / take;
    }
    stats.mean_loss += loss / take;

    if (config.method == Method::reg && config.lambda > 0.0) {
      // lambda * (mean score gap in this batch)^2, skipped when a group is
      // missing from the batch
      double sum0 = 0.0, sum1 = 0.0;
      int c0 = 0, c1 = 0;
      for (int k = 0; k < take; ++k) {
        if (ss(k) == 0) {
          sum0 += cache.scores(k);
          ++c0;
        } else {
          sum1 += cache.scores(k);
          ++c1;
        }
      }
      if (c0 > 0 && c1 > 0) {
        const double gap = sum0 / c0 - sum1 / c1;
        stats.mean_penalty += gap * gap;
        const double common = 2.0 * config.lambda * gap;
        for (int k = 0; k < take; ++k)
          upstream(k) += ss(k) == 0 ? common / c0 : -common / c1;
      }
    }

    Gradients grads = backward(params, cache, upstream);

    if (matching) {
      MatchBatch mb;
      if (config.resample_matches_per_step) {
        auto g = make_rng(config.seed, "match",
                          (static_cast<std::uint64_t>(epoch) << 32) |
                              static_cast<std::uint64_t>(step));
        mb = gather_match_batch(data, idx, config.match_batch_size, g);
      } else {
        mb = epoch_batch;
      }
      int source = 0;
      if (config.direction == MatchDirection::fixed1)
        source = 1;
      else if (config.direction == MatchDirection::alternate)
        source = (epoch * steps + step) % 2;
      const PenaltyResult pr = apply_match_penalty(params, mb, config, source, grads);
      stats.mean_penalty += pr.value;
      stats.equal_label_match += pr.equal_labels;
    }

    adam_step(params, grads, opt);
  }

  stats.mean_loss /= steps;
  stats.mean_penalty /= steps;
  stats.equal_label_match /= steps;

  if (!idx.rows0.empty() && !idx.rows1.empty()) {
    const Eigen::VectorXd scores = forward(params, data.features, data.sensitive).scores;
    const auto [s0, s1] = split_scores(scores, data.sensitive);
    stats.train_dp_bar = dp_bar_gap(s0, s1);
  }
  return stats;
}

TrainResult train(const Dataset& data, const TrainConfig& config) {
  if (config.epochs < 1) throw std::invalid_argument("train: epochs must be positive");
  if (config.lambda < 0.0) throw std::invalid_argument("train: lambda must be nonnegative");
  if (config.match_batch_size < 1 || config.loss_batch_size < 1)
    throw std::invalid_argument("train: batch sizes must be positive");

  TrainResult result;
  result.params = init_mlp(data.dim(), config.include_sensitive, config.seed);
  AdamState opt = make_adam(result.params, config.lr);
  result.log.reserve(config.epochs);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    opt.lr = config.lr * std::pow(config.lr_decay, epoch);
    result.log.push_back(run_epoch(result.params, opt, data, config, epoch));
  }
  return result;
}

std::vector<SweepPoint> sweep(const Dataset& train_data, const Dataset& test_data,
                              const TrainConfig& base, const std::vector<double>& lambdas,
                              int jobs) {
  if (lambdas.empty()) throw std::invalid_argument("sweep: empty lambda grid");
  std::vector<SweepPoint> points(lambdas.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t k = next.fetch_add(1); k < lambdas.size(); k = next.fetch_add(1)) {
      TrainConfig cfg = base;
      cfg.lambda = lambdas[k];
      cfg.seed = derive_seed(base.seed, "sweep", k);
      TrainResult run = train(train_data, cfg);
      points[k].lambda = lambdas[k];
      points[k].report = evaluate_model(as_scorer(run.params), test_data);
      points[k].params = std::move(run.params);
    }
  };

  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(lambdas.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  return points;
}

void write_train_log(const std::vector<EpochStats>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_train_log: cannot write " + path);
  for (const EpochStats& e : log) {
    nlohmann::json j;
    j["epoch"] = e.epoch;
    j["loss"] = e.mean_loss;
    j["penalty"] = e.mean_penalty;
    j["equal_label_match"] = e.equal_label_match;
    j["train_dp_bar"] = e.train_dp_bar;
    j["lr"] = e.lr;
    out << j.dump() << '\n';
  }
}

}  // namespace ftm
