#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ftm/data.hpp"
#include "ftm/metrics.hpp"
#include "ftm/model.hpp"

namespace ftm {

enum class Method { ftm, reg, unfair };

enum class MatchDirection { fixed0, fixed1, alternate };

struct TrainConfig {
  Method method = Method::ftm;
  double lambda = 1.0;  // penalty weight; 0 reduces every method to plain ERM
  double alpha = 0.0;   // label weight in the match cost; 0 keeps it marginal
  int epochs = 200;
  int loss_batch_size = 256;  // n'
  int match_batch_size = 64;  // m, per group
  MatchDirection direction = MatchDirection::alternate;
  bool resample_matches_per_step = true;  // false reuses one pair of match batches per epoch
  double lr = 0.001;
  double lr_decay = 0.95;  // multiplied onto lr once per epoch
  bool include_sensitive = true;
  std::uint64_t seed = 0;
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;         // cross-entropy, averaged over steps
  double mean_penalty = 0.0;      // matched gap (ftm) or squared mean gap (reg), pre-lambda
  double equal_label_match = 0.0; // fraction of matched pairs sharing a label
  double train_dp_bar = 0.0;      // full-split mean score gap after the epoch
  double lr = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochStats> log;
};

// One pass over the data: loss batches partition a fresh shuffle (remainder
// dropped), match batches draw m rows per group. Exposed so tests can pin
// down a single step.
EpochStats run_epoch(ModelParams& params, AdamState& opt, const Dataset& data,
                     const TrainConfig& config, int epoch);

// Full run: seeded init, lr decay per epoch, per-epoch stats. Needs both
// groups present. Deterministic for a fixed config.
TrainResult train(const Dataset& data, const TrainConfig& config);

struct SweepPoint {
  double lambda = 0.0;
  ModelParams params;
  FairnessReport report;
};

// One model per lambda, trained on the train split and evaluated on the
// test split, returned in grid order. Each point runs on its own RNG stream
// so results do not depend on the number of worker threads.
std::vector<SweepPoint> sweep(const Dataset& train_data, const Dataset& test_data,
                              const TrainConfig& base, const std::vector<double>& lambdas,
                              int jobs);

// One JSON object per epoch, one line each.
void write_train_log(const std::vector<EpochStats>& log, const std::string& path);

}  // namespace ftm
