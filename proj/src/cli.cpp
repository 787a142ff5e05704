#include "ftm/cli.hpp"

#include "ftm/matching.hpp"
#include "ftm/metrics.hpp"
#include "ftm/model.hpp"
#include "ftm/rng.hpp"
#include "ftm/synthetic.hpp"
#include "ftm/trainer.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ftm {

namespace {

// ---------------------------------------------------------------------------
// Dataset presets. Each schema targets the dataset's usual CSV export with a
// header row and unpadded cells; the batch size is the one the experiments
// train with. The realized one-hot width depends on the categories present
// in the file, so it is reported at load time rather than promised here.

struct PresetDef {
  const char* name;
  int batch_size;
  const char* schema;
};

const PresetDef kPresets[] = {
    {"adult", 1024, R"json({
      "label": {"column": "income", "positive_any": [">50K", ">50K."]},
      "sensitive": {"column": "sex", "positive": "Male"},
      "features": [
        {"column": "age", "kind": "continuous"},
        {"column": "education-num", "kind": "continuous"},
        {"column": "capital-gain", "kind": "continuous"},
        {"column": "capital-loss", "kind": "continuous"},
        {"column": "hours-per-week", "kind": "continuous"},
        {"column": "workclass", "kind": "categorical"},
        {"column": "education", "kind": "categorical"},
        {"column": "marital-status", "kind": "categorical"},
        {"column": "occupation", "kind": "categorical"},
        {"column": "relationship", "kind": "categorical"},
        {"column": "race", "kind": "categorical"},
        {"column": "native-country", "kind": "categorical"}
      ],
      "missing": ["", "?", "NA"]
    })json"},
    {"german", 200, R"json({
      "label": {"column": "credit", "positive": "1"},
      "sensitive": {"column": "personal_status", "positive_any": ["A91", "A93", "A94"]},
      "features": [
        {"column": "month", "kind": "continuous"},
        {"column": "credit_amount", "kind": "continuous"},
        {"column": "investment_as_income_percentage", "kind": "continuous"},
        {"column": "residence_since", "kind": "continuous"},
        {"column": "age", "kind": "continuous"},
        {"column": "number_of_credits", "kind": "continuous"},
        {"column": "people_liable_for", "kind": "continuous"},
        {"column": "status", "kind": "categorical"},
        {"column": "credit_history", "kind": "categorical"},
        {"column": "purpose", "kind": "categorical"},
        {"column": "savings", "kind": "categorical"},
        {"column": "employment", "kind": "categorical"},
        {"column": "other_debtors", "kind": "categorical"},
        {"column": "property", "kind": "categorical"},
        {"column": "installment_plans", "kind": "categorical"},
        {"column": "housing", "kind": "categorical"},
        {"column": "skill_level", "kind": "categorical"},
        {"column": "telephone", "kind": "categorical"},
        {"column": "foreign_worker", "kind": "categorical"}
      ],
      "missing": ["", "?", "NA"]
    })json"},
    {"dutch", 1024, R"json({
      "label": {"column": "occupation", "positive": "2_1"},
      "sensitive": {"column": "sex", "positive": "1"},
      "features": [
        {"column": "age", "kind": "categorical"},
        {"column": "household_position", "kind": "categorical"},
        {"column": "household_size", "kind": "categorical"},
        {"column": "prev_residence_place", "kind": "categorical"},
        {"column": "citizenship", "kind": "categorical"},
        {"column": "country_birth", "kind": "categorical"},
        {"column": "edu_level", "kind": "categorical"},
        {"column": "economic_status", "kind": "categorical"},
        {"column": "cur_eco_activity", "kind": "categorical"},
        {"column": "Marital_status", "kind": "categorical"}
      ],
      "missing": ["", "?", "NA"]
    })json"},
    {"bank", 512, R"json({
      "label": {"column": "y", "positive": "yes"},
      "sensitive": {"column": "age", "positive_at_least": 25},
      "delimiter": ";",
      "features": [
        {"column": "duration", "kind": "continuous"},
        {"column": "campaign", "kind": "continuous"},
        {"column": "pdays", "kind": "continuous"},
        {"column": "previous", "kind": "continuous"},
        {"column": "job", "kind": "categorical"},
        {"column": "marital", "kind": "categorical"},
        {"column": "education", "kind": "categorical"},
        {"column": "default", "kind": "categorical"},
        {"column": "housing", "kind": "categorical"},
        {"column": "loan", "kind": "categorical"},
        {"column": "contact", "kind": "categorical"},
        {"column": "month", "kind": "categorical"},
        {"column": "day_of_week", "kind": "categorical"},
        {"column": "poutcome", "kind": "categorical"}
      ],
      "missing": ["", "?", "NA"]
    })json"},
};

const PresetDef* find_preset(const std::string& name) {
  for (const PresetDef& p : kPresets)
    if (name == p.name) return &p;
  return nullptr;
}

// ---------------------------------------------------------------------------
// One parsed invocation.

struct RunSpec {
  std::string command;

  std::string dataset;  // synthetic | grid | csv | preset name
  std::string csv_path, schema_path;
  int grid_n = 64;
  SyntheticConfig synth;
  double train_fraction = 0.8;
  double minority_frac = -1.0;  // < 0 leaves the training split alone

  TrainConfig train;
  bool batch_size_given = false;
  std::vector<double> lambdas;
  int jobs = 1;

  std::string checkpoint, unfair_checkpoint, builtin;
  int match_size = 1024;
  int num_batches = 100;
  int num_subsets = 1000;

  double tau = 0.5;
  std::uint64_t seed = 0;
  std::string out_dir;
};

// ---------------------------------------------------------------------------
// Output plumbing. Data files carry no timestamps so reruns are
// byte-identical; the clock goes into meta.json only.

std::filesystem::path resolve_out_dir(const RunSpec& spec) {
  if (!spec.out_dir.empty()) return spec.out_dir;
  const char* root = std::getenv("FTM_OUT_ROOT");
  return std::filesystem::path(root ? root : ".") / ("ftm-" + spec.command);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

void write_meta(const std::filesystem::path& dir, const RunSpec& spec,
                const std::vector<std::string>& args) {
  nlohmann::json j;
  j["command"] = spec.command;
  j["args"] = args;
  char stamp[32];
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
  j["created_at"] = stamp;
  write_json(dir / "meta.json", j);
}

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Dataset resolution.

DataSchema schema_for(const RunSpec& spec) {
  if (!spec.schema_path.empty()) return DataSchema::load(spec.schema_path);
  const PresetDef* preset = find_preset(spec.dataset);
  if (!preset) throw std::invalid_argument("--dataset csv needs --schema");
  return DataSchema::from_json(nlohmann::json::parse(preset->schema));
}

Dataset generated_dataset(const RunSpec& spec) {
  if (spec.dataset == "grid") return make_grid_dataset(spec.grid_n);
  SyntheticConfig cfg = spec.synth;
  cfg.seed = spec.seed;
  return make_synthetic_classification(cfg);
}

bool uses_csv(const RunSpec& spec) {
  return spec.dataset == "csv" || find_preset(spec.dataset) != nullptr;
}

void check_source_flags(const RunSpec& spec) {
  if (spec.dataset != "synthetic" && spec.dataset != "grid" && !uses_csv(spec))
    throw std::invalid_argument("unknown dataset '" + spec.dataset + "'");
  if (uses_csv(spec)) {
    if (spec.csv_path.empty())
      throw std::invalid_argument("--dataset " + spec.dataset + " needs --csv");
  } else if (!spec.csv_path.empty() || !spec.schema_path.empty()) {
    throw std::invalid_argument("--csv/--schema only apply to csv-backed datasets");
  }
}

// Whole dataset, preprocessed in one piece. Used by audit and subsets.
Dataset resolve_full(const RunSpec& spec) {
  check_source_flags(spec);
  if (!uses_csv(spec)) return generated_dataset(spec);
  const DataSchema schema = schema_for(spec);
  const RawTable raw = load_csv(spec.csv_path, schema);
  return Preprocessor::fit(raw, schema).transform(raw);
}

struct SplitSource {
  Dataset train, test;
};

// Train/test split. CSV sources split the raw rows first and fit the scaler
// on the training side only; generated sources split the finished matrix.
SplitSource resolve_split(const RunSpec& spec) {
  check_source_flags(spec);
  SplitSource out;
  if (uses_csv(spec)) {
    const DataSchema schema = schema_for(spec);
    const RawTable raw = load_csv(spec.csv_path, schema);
    const auto [raw_train, raw_test] = split_raw(raw, spec.train_fraction, spec.seed);
    const Preprocessor prep = Preprocessor::fit(raw_train, schema);
    out.train = prep.transform(raw_train);
    out.test = prep.transform(raw_test);
  } else {
    const Dataset all = generated_dataset(spec);
    std::tie(out.train, out.test) = split_dataset(all, spec.train_fraction, spec.seed);
  }
  if (spec.minority_frac >= 0.0)
    out.train = make_imbalanced(out.train, spec.minority_frac, spec.seed);
  return out;
}

// ---------------------------------------------------------------------------
// Model resolution for audit and subsets.

Scorer resolve_scorer(const RunSpec& spec, const Dataset& data, std::string* description) {
  if (spec.checkpoint.empty() == spec.builtin.empty())
    throw std::invalid_argument("pass exactly one of --checkpoint or --builtin");
  if (!spec.checkpoint.empty()) {
    *description = spec.checkpoint;
    return as_scorer(load_checkpoint(spec.checkpoint));
  }
  if (data.dim() != 1)
    throw std::invalid_argument("--builtin models score a single feature column");
  const StepModelPair models = make_step_models();
  *description = "builtin:" + spec.builtin;
  if (spec.builtin == "swapped-step") return models.swapped;
  if (spec.builtin == "shared-step") return models.shared;
  throw std::invalid_argument("unknown builtin '" + spec.builtin + "'");
}

std::vector<double> to_vector(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

nlohmann::json dataset_info(const Dataset& data) {
  return {{"rows", data.rows()}, {"dim", data.dim()}, {"provenance", data.provenance}};
}

nlohmann::json spec_info(const RunSpec& spec) {
  nlohmann::json j;
  j["command"] = spec.command;
  j["dataset"] = spec.dataset;
  j["seed"] = spec.seed;
  j["tau"] = spec.tau;
  return j;
}

// ---------------------------------------------------------------------------
// Commands.

int cmd_train(const RunSpec& spec, const std::vector<std::string>& args) {
  const SplitSource data = resolve_split(spec);
  TrainConfig cfg = spec.train;
  cfg.seed = spec.seed;
  if (!spec.batch_size_given) {
    const PresetDef* preset = find_preset(spec.dataset);
    if (preset) cfg.loss_batch_size = preset->batch_size;
  }

  TrainResult run = train(data.train, cfg);
  const Scorer scorer = as_scorer(run.params);
  FairnessReport report = evaluate_model(scorer, data.test, spec.tau);
  report.transport_cost = estimate_transport_cost(scorer, data.test, cfg.match_batch_size,
                                                  spec.num_batches, spec.seed);

  const std::filesystem::path dir = resolve_out_dir(spec);
  std::filesystem::create_directories(dir);
  save_checkpoint(run.params, (dir / "checkpoint.json").string());
  write_json(dir / "report.json", report.to_json());
  write_train_log(run.log, (dir / "train_log.jsonl").string());
  write_meta(dir, spec, args);

  std::cout << "train: accuracy " << report.accuracy << ", dp_bar " << report.dp_bar
            << ", wdp " << report.wdp << "\n"
            << "wrote " << (dir / "report.json").string() << "\n";
  return 0;
}

int cmd_sweep(const RunSpec& spec, const std::vector<std::string>& args) {
  const SplitSource data = resolve_split(spec);
  TrainConfig base = spec.train;
  base.seed = spec.seed;
  if (!spec.batch_size_given) {
    const PresetDef* preset = find_preset(spec.dataset);
    if (preset) base.loss_batch_size = preset->batch_size;
  }

  std::vector<double> grid = spec.lambdas;
  std::sort(grid.begin(), grid.end());
  std::vector<SweepPoint> points = sweep(data.train, data.test, base, grid, spec.jobs);

  const std::filesystem::path dir = resolve_out_dir(spec);
  std::filesystem::create_directories(dir);
  std::ostringstream csv;
  csv << FairnessReport::csv_header() << "\n";
  for (std::size_t k = 0; k < points.size(); ++k) {
    const Scorer scorer = as_scorer(points[k].params);
    points[k].report.transport_cost =
        estimate_transport_cost(scorer, data.test, base.match_batch_size, spec.num_batches,
                                derive_seed(spec.seed, "sweep-cost", k));
    csv << points[k].report.csv_row(points[k].lambda) << "\n";

    char tag[16];
    std::snprintf(tag, sizeof tag, "%03zu", k);
    save_checkpoint(points[k].params, (dir / ("checkpoint_" + std::string(tag) + ".json")).string());
    write_json(dir / ("report_" + std::string(tag) + ".json"), points[k].report.to_json());
  }
  write_text(dir / "sweep.csv", csv.str());
  write_meta(dir, spec, args);

  std::cout << "sweep: " << points.size() << " points\n"
            << "wrote " << (dir / "sweep.csv").string() << "\n";
  return 0;
}

int cmd_audit(const RunSpec& spec, const std::vector<std::string>& args) {
  const Dataset data = resolve_full(spec);
  std::string model_name;
  const Scorer scorer = resolve_scorer(spec, data, &model_name);

  FairnessReport report = evaluate_model(scorer, data, spec.tau);
  report.transport_cost = estimate_transport_cost(scorer, data, spec.match_size,
                                                  spec.num_batches, spec.seed);

  nlohmann::json j;
  j["spec"] = spec_info(spec);
  j["spec"]["model"] = model_name;
  j["spec"]["m"] = spec.match_size;
  j["spec"]["num_batches"] = spec.num_batches;
  j["dataset"] = dataset_info(data);
  j["report"] = report.to_json();
  j["baseline"] = nullptr;

  if (!spec.unfair_checkpoint.empty()) {
    const Scorer base_scorer = as_scorer(load_checkpoint(spec.unfair_checkpoint));
    const Eigen::VectorXd scores = scorer(data.features, data.sensitive);
    const Eigen::VectorXd base_scores = base_scorer(data.features, data.sensitive);
    const FlipCounts flips = flip_confusion(base_scores, scores, data.sensitive, spec.tau);
    nlohmann::json b;
    b["checkpoint"] = spec.unfair_checkpoint;
    b["spearman_rho"] = spearman_rank_corr(to_vector(base_scores), to_vector(scores));
    b["flips"] = {{"group0", {{flips.group0[0][0], flips.group0[0][1]},
                              {flips.group0[1][0], flips.group0[1][1]}}},
                  {"group1", {{flips.group1[0][0], flips.group1[0][1]},
                              {flips.group1[1][0], flips.group1[1][1]}}},
                  {"undesirable", flips.undesirable}};
    j["baseline"] = b;
  }

  const std::filesystem::path dir = resolve_out_dir(spec);
  std::filesystem::create_directories(dir);
  write_json(dir / "audit.json", j);
  write_meta(dir, spec, args);

  std::cout << "audit: mdp " << (report.mdp ? format_value(*report.mdp) : "n/a")
            << ", transport_cost " << format_value(*report.transport_cost) << ", consistency "
            << (report.consistency ? format_value(*report.consistency) : "n/a") << "\n"
            << "wrote " << (dir / "audit.json").string() << "\n";
  return 0;
}

double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

int cmd_subsets(const RunSpec& spec, const std::vector<std::string>& args) {
  const Dataset data = resolve_full(spec);
  std::string model_name;
  const Scorer scorer = resolve_scorer(spec, data, &model_name);
  const Eigen::VectorXd scores = scorer(data.features, data.sensitive);

  const std::vector<Mask> masks = random_hyperplane_subsets(data, spec.num_subsets, spec.seed);
  std::vector<double> values(masks.size());
  std::ostringstream csv;
  csv << "subset,dp_bar\n";
  for (std::size_t k = 0; k < masks.size(); ++k) {
    values[k] = subset_dp_bar(scores, data.sensitive, masks[k]);
    csv << k << "," << format_value(values[k]) << "\n";
  }

  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const double q1 = quantile_sorted(sorted, 0.25);
  const double median = quantile_sorted(sorted, 0.5);
  const double q3 = quantile_sorted(sorted, 0.75);
  const double iqr = q3 - q1;
  long long outliers = 0;
  for (double v : sorted)
    if (v < q1 - 1.5 * iqr || v > q3 + 1.5 * iqr) ++outliers;
  double mean = 0.0;
  for (double v : sorted) mean += v;
  mean /= static_cast<double>(sorted.size());
  double var = 0.0;
  for (double v : sorted) var += (v - mean) * (v - mean);
  const double stddev =
      sorted.size() > 1 ? std::sqrt(var / static_cast<double>(sorted.size() - 1)) : 0.0;

  nlohmann::json summary;
  summary["spec"] = spec_info(spec);
  summary["spec"]["model"] = model_name;
  summary["spec"]["num_subsets"] = spec.num_subsets;
  summary["count"] = sorted.size();
  summary["median"] = median;
  summary["q1"] = q1;
  summary["q3"] = q3;
  summary["iqr"] = iqr;
  summary["std"] = stddev;
  summary["outlier_count"] = outliers;
  summary["whisker_rule"] = "tukey-1.5-iqr";

  const std::filesystem::path dir = resolve_out_dir(spec);
  std::filesystem::create_directories(dir);
  write_text(dir / "subsets.csv", csv.str());
  write_json(dir / "subsets_summary.json", summary);
  write_meta(dir, spec, args);

  std::cout << "subsets: median " << median << ", outliers " << outliers << " of "
            << sorted.size() << "\n"
            << "wrote " << (dir / "subsets_summary.json").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// Flag wiring.

Method parse_method(const std::string& s) {
  if (s == "ftm") return Method::ftm;
  if (s == "reg") return Method::reg;
  if (s == "unfair") return Method::unfair;
  throw std::invalid_argument("unknown method '" + s + "' (ftm, reg, unfair)");
}

MatchDirection parse_direction(const std::string& s) {
  if (s == "0") return MatchDirection::fixed0;
  if (s == "1") return MatchDirection::fixed1;
  if (s == "alternate") return MatchDirection::alternate;
  throw std::invalid_argument("unknown direction '" + s + "' (0, 1, alternate)");
}

void add_source_options(CLI::App* cmd, RunSpec& spec) {
  cmd->add_option("--dataset", spec.dataset,
                  "synthetic, grid, csv, or a preset (adult, german, dutch, bank)")
      ->required();
  cmd->add_option("--csv", spec.csv_path, "CSV path for csv-backed datasets");
  cmd->add_option("--schema", spec.schema_path, "schema JSON (overrides a preset's)");
  cmd->add_option("--grid-n", spec.grid_n, "grid points per group");
  cmd->add_option("--synth-n", spec.synth.n, "synthetic sample count");
  cmd->add_option("--synth-d", spec.synth.d, "synthetic feature dimension");
  cmd->add_option("--synth-shift", spec.synth.group_shift, "synthetic group mean shift");
  cmd->add_option("--synth-frac", spec.synth.group1_fraction, "synthetic group 1 share");
  cmd->add_option("--synth-label-scale", spec.synth.label_scale, "synthetic label sharpness");
  cmd->add_option("--synth-bias0", spec.synth.label_bias0, "synthetic group 0 label bias");
  cmd->add_option("--synth-bias1", spec.synth.label_bias1, "synthetic group 1 label bias");
  cmd->add_option("--seed", spec.seed, "master seed; all streams derive from it");
  cmd->add_option("--tau", spec.tau, "decision threshold");
  cmd->add_option("--out", spec.out_dir, "output directory (default $FTM_OUT_ROOT/ftm-<cmd>)");
}

void add_train_options(CLI::App* cmd, RunSpec& spec, std::string& method, std::string& direction) {
  cmd->add_option("--method", method, "ftm, reg, or unfair");
  cmd->add_option("--alpha", spec.train.alpha, "label weight in the match cost");
  cmd->add_option("--epochs", spec.train.epochs, "training epochs");
  cmd->add_option("--batch-size", spec.train.loss_batch_size, "loss mini-batch size")
      ->each([&spec](const std::string&) { spec.batch_size_given = true; });
  cmd->add_option("--match-batch-size", spec.train.match_batch_size, "match batch size per group");
  cmd->add_option("--lr", spec.train.lr, "Adam learning rate");
  cmd->add_option("--lr-decay", spec.train.lr_decay, "per-epoch learning-rate factor");
  cmd->add_option("--direction", direction, "match source group: 0, 1, or alternate");
  cmd->add_flag("--reuse-match-batches",
                [&spec](std::int64_t) { spec.train.resample_matches_per_step = false; },
                "draw one match batch per epoch instead of per step");
  cmd->add_flag("--no-sensitive",
                [&spec](std::int64_t) { spec.train.include_sensitive = false; },
                "hide the sensitive bit from the model input");
  cmd->add_option("--train-fraction", spec.train_fraction, "train split share");
  cmd->add_option("--minority-frac", spec.minority_frac,
                  "downsample group 0 of the training split to this share");
  cmd->add_option("--num-batches", spec.num_batches, "batches for the transport cost estimate");
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const PresetDef& p : kPresets) names.push_back(p.name);
  return names;
}

DataSchema preset_schema(const std::string& name) {
  const PresetDef* preset = find_preset(name);
  if (!preset) throw std::invalid_argument("unknown preset '" + name + "'");
  return DataSchema::from_json(nlohmann::json::parse(preset->schema));
}

int preset_batch_size(const std::string& name) {
  const PresetDef* preset = find_preset(name);
  if (!preset) throw std::invalid_argument("unknown preset '" + name + "'");
  return preset->batch_size;
}

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"group-fair training and auditing through optimal-transport matching"};
  app.require_subcommand(1);

  RunSpec spec;
  std::string method = "ftm";
  std::string direction = "alternate";
  std::string lambda_list;

  CLI::App* train_cmd = app.add_subcommand("train", "train one model and report on the test split");
  add_source_options(train_cmd, spec);
  add_train_options(train_cmd, spec, method, direction);
  train_cmd->add_option("--lambda", spec.train.lambda, "penalty weight");

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "train one model per lambda on a shared split");
  add_source_options(sweep_cmd, spec);
  add_train_options(sweep_cmd, spec, method, direction);
  sweep_cmd->add_option("--lambdas", lambda_list, "comma-separated penalty weights")->required();
  sweep_cmd->add_option("--jobs", spec.jobs, "worker threads");

  CLI::App* audit_cmd = app.add_subcommand("audit", "matching and fairness audit of one model");
  add_source_options(audit_cmd, spec);
  audit_cmd->add_option("--checkpoint", spec.checkpoint, "model checkpoint to audit");
  audit_cmd->add_option("--builtin", spec.builtin, "closed-form model: swapped-step, shared-step");
  audit_cmd->add_option("--unfair-checkpoint", spec.unfair_checkpoint,
                        "baseline checkpoint for rank and flip comparison");
  audit_cmd->add_option("--match-size", spec.match_size, "rows per group per match batch");
  audit_cmd->add_option("--num-batches", spec.num_batches, "match batches to average");

  CLI::App* subsets_cmd =
      app.add_subcommand("subsets", "score-gap distribution over random halfspace subsets");
  add_source_options(subsets_cmd, spec);
  subsets_cmd->add_option("--checkpoint", spec.checkpoint, "model checkpoint to audit");
  subsets_cmd->add_option("--builtin", spec.builtin,
                          "closed-form model: swapped-step, shared-step");
  subsets_cmd->add_option("--num-subsets", spec.num_subsets, "random subsets to draw");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    spec.train.method = parse_method(method);
    spec.train.direction = parse_direction(direction);
    if (!lambda_list.empty()) {
      std::stringstream ss(lambda_list);
      std::string item;
      while (std::getline(ss, item, ','))
        spec.lambdas.push_back(std::stod(item));
    }
    if (train_cmd->parsed()) {
      spec.command = "train";
      return cmd_train(spec, args);
    }
    if (sweep_cmd->parsed()) {
      spec.command = "sweep";
      return cmd_sweep(spec, args);
    }
    if (audit_cmd->parsed()) {
      spec.command = "audit";
      return cmd_audit(spec, args);
    }
    spec.command = "subsets";
    return cmd_subsets(spec, args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ftm
