#include "ftm/metrics.hpp"

#include "ftm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ftm {

namespace {

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double positive_rate(const std::vector<double>& v, double tau) {
  double c = 0.0;
  for (const double x : v)
    if (x >= tau) c += 1.0;
  return c / static_cast<double>(v.size());
}

void require_both_groups(const std::vector<double>& s0, const std::vector<double>& s1,
                         const char* where) {
  if (s0.empty() || s1.empty())
    throw std::invalid_argument(std::string(where) + ": needs scores from both groups");
}

// average ranks, ties share the mean of their rank run
std::vector<double> average_ranks(const std::vector<double>& v) {
  const int n = static_cast<int>(v.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  int k = 0;
  while (k < n) {
    int run = k;
    while (run + 1 < n && v[order[run + 1]] == v[order[k]]) ++run;
    const double shared = 0.5 * (k + run) + 1.0;
    for (int t = k; t <= run; ++t) ranks[order[t]] = shared;
    k = run + 1;
  }
  return ranks;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::pair<std::vector<double>, std::vector<double>> split_scores(const Eigen::VectorXd& scores,
                                                                 const Eigen::VectorXi& groups) {
  if (scores.size() != groups.size())
    throw std::invalid_argument("split_scores: lengths differ");
  std::vector<double> s0, s1;
  for (int i = 0; i < scores.size(); ++i)
    (groups(i) == 0 ? s0 : s1).push_back(scores(i));
  return {std::move(s0), std::move(s1)};
}

double dp_gap(const std::vector<double>& scores0, const std::vector<double>& scores1,
              double tau) {
  require_both_groups(scores0, scores1, "dp_gap");
  return std::abs(positive_rate(scores0, tau) - positive_rate(scores1, tau));
}

double dp_bar_gap(const std::vector<double>& scores0, const std::vector<double>& scores1) {
  require_both_groups(scores0, scores1, "dp_bar_gap");
  return std::abs(mean(scores0) - mean(scores1));
}

double wasserstein_dp(const std::vector<double>& scores0, const std::vector<double>& scores1) {
  require_both_groups(scores0, scores1, "wasserstein_dp");
  std::vector<double> a = scores0, b = scores1;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const long long n = static_cast<long long>(a.size());
  const long long m = static_cast<long long>(b.size());
  // walk the merged quantile breakpoints; positions compared exactly over the
  // common denominator n*m
  double acc = 0.0;
  long long prev = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const long long qa = static_cast<long long>(i + 1) * m;
    const long long qb = static_cast<long long>(j + 1) * n;
    const long long q = std::min(qa, qb);
    acc += static_cast<double>(q - prev) * std::abs(a[i] - b[j]);
    prev = q;
    if (qa == q) ++i;
    if (qb == q) ++j;
  }
  return acc / (static_cast<double>(n) * static_cast<double>(m));
}

double tv_dp(const std::vector<double>& scores0, const std::vector<double>& scores1,
             int num_bins) {
  require_both_groups(scores0, scores1, "tv_dp");
  if (num_bins < 1) throw std::invalid_argument("tv_dp: num_bins must be positive");
  auto histogram = [&](const std::vector<double>& s) {
    std::vector<double> h(num_bins, 0.0);
    for (const double x : s) {
      int bin = static_cast<int>(std::floor(x * num_bins));
      bin = std::max(0, std::min(num_bins - 1, bin));
      h[bin] += 1.0 / static_cast<double>(s.size());
    }
    return h;
  };
  const std::vector<double> h0 = histogram(scores0);
  const std::vector<double> h1 = histogram(scores1);
  double acc = 0.0;
  for (int k = 0; k < num_bins; ++k) acc += std::abs(h0[k] - h1[k]);
  return 0.5 * acc;
}

double ks_dp(const std::vector<double>& scores0, const std::vector<double>& scores1) {
  require_both_groups(scores0, scores1, "ks_dp");
  std::vector<double> a = scores0, b = scores1;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double sup = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    double x;
    if (j >= b.size() || (i < a.size() && a[i] <= b[j]))
      x = a[i];
    else
      x = b[j];
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    const double f0 = static_cast<double>(i) / a.size();
    const double f1 = static_cast<double>(j) / b.size();
    sup = std::max(sup, std::abs(f0 - f1));
  }
  return sup;
}

double subset_dp_bar(const Eigen::VectorXd& scores, const Eigen::VectorXi& groups,
                     const Mask& mask) {
  if (scores.size() != groups.size() || static_cast<int>(mask.size()) != scores.size())
    throw std::invalid_argument("subset_dp_bar: lengths differ");
  double sum0 = 0.0, sum1 = 0.0;
  long long c0 = 0, c1 = 0;
  for (int i = 0; i < scores.size(); ++i) {
    if (!mask[i]) continue;
    if (groups(i) == 0) {
      sum0 += scores(i);
      ++c0;
    } else {
      sum1 += scores(i);
      ++c1;
    }
  }
  if (c0 == 0 || c1 == 0)
    throw std::invalid_argument("subset_dp_bar: subset leaves a group empty");
  return std::abs(sum0 / c0 - sum1 / c1);
}

std::vector<Mask> random_hyperplane_subsets(const Dataset& data, int num_subsets,
                                            std::uint64_t seed) {
  if (num_subsets < 1)
    throw std::invalid_argument("random_hyperplane_subsets: num_subsets must be positive");
  std::vector<Mask> masks;
  masks.reserve(num_subsets);
  const int d = data.dim();
  for (int k = 0; k < num_subsets; ++k) {
    auto g = make_rng(seed, "subset", static_cast<std::uint64_t>(k));
    Mask mask(data.rows());
    for (int attempt = 0;; ++attempt) {
      if (attempt >= 10000)
        throw std::runtime_error("random_hyperplane_subsets: no usable direction found");
      Eigen::VectorXd v(d);
      for (int c = 0; c < d; ++c) v(c) = next_uniform(g, -1.0, 1.0);
      if (v.isZero(0.0)) continue;
      const Eigen::VectorXd dots = data.features * v;
      bool has0 = false, has1 = false;
      for (int i = 0; i < data.rows(); ++i) {
        mask[i] = dots(i) >= 0.0 ? 1 : 0;
        if (mask[i]) (data.sensitive(i) == 0 ? has0 : has1) = true;
      }
      if (has0 && has1) break;
    }
    masks.push_back(std::move(mask));
  }
  return masks;
}

EoGaps eo_gaps(const Eigen::VectorXd& scores, const Eigen::VectorXi& labels,
               const Eigen::VectorXi& groups, double tau) {
  if (scores.size() != labels.size() || scores.size() != groups.size())
    throw std::invalid_argument("eo_gaps: lengths differ");
  double pos[2][2] = {{0, 0}, {0, 0}};
  long long count[2][2] = {{0, 0}, {0, 0}};
  for (int i = 0; i < scores.size(); ++i) {
    const int s = groups(i) == 0 ? 0 : 1;
    const int y = labels(i) == 0 ? 0 : 1;
    count[s][y]++;
    if (scores(i) >= tau) pos[s][y] += 1.0;
  }
  for (int s = 0; s < 2; ++s)
    for (int y = 0; y < 2; ++y)
      if (count[s][y] == 0)
        throw std::invalid_argument("eo_gaps: empty (group, label) cell");
  EoGaps out;
  out.tpr_gap = std::abs(pos[0][1] / count[0][1] - pos[1][1] / count[1][1]);
  out.fpr_gap = std::abs(pos[0][0] / count[0][0] - pos[1][0] / count[1][0]);
  out.eo = 0.5 * (out.tpr_gap + out.fpr_gap);
  return out;
}

double consistency(const Scorer& scorer, const Dataset& data, double tau) {
  if (data.rows() == 0) throw std::invalid_argument("consistency: empty dataset");
  const Eigen::VectorXd plain = scorer(data.features, data.sensitive);
  Eigen::VectorXi flipped = data.sensitive;
  for (int i = 0; i < flipped.size(); ++i) flipped(i) = flipped(i) == 0 ? 1 : 0;
  const Eigen::VectorXd swapped = scorer(data.features, flipped);
  long long same = 0;
  for (int i = 0; i < plain.size(); ++i)
    if ((plain(i) >= tau) == (swapped(i) >= tau)) ++same;
  return static_cast<double>(same) / data.rows();
}

double spearman_rank_corr(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("spearman_rank_corr: lengths differ");
  if (a.size() < 2) throw std::invalid_argument("spearman_rank_corr: needs at least two points");
  const std::vector<double> ra = average_ranks(a);
  const std::vector<double> rb = average_ranks(b);
  const double ma = mean(ra), mb = mean(rb);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0.0 || vb == 0.0)
    throw std::invalid_argument("spearman_rank_corr: constant input has no rank ordering");
  return cov / std::sqrt(va * vb);
}

FlipCounts flip_confusion(const Eigen::VectorXd& baseline_scores,
                          const Eigen::VectorXd& adjusted_scores, const Eigen::VectorXi& groups,
                          double tau) {
  if (baseline_scores.size() != adjusted_scores.size() ||
      baseline_scores.size() != groups.size())
    throw std::invalid_argument("flip_confusion: lengths differ");
  FlipCounts out;
  for (int i = 0; i < baseline_scores.size(); ++i) {
    const int u = baseline_scores(i) >= tau ? 1 : 0;
    const int f = adjusted_scores(i) >= tau ? 1 : 0;
    if (groups(i) == 0)
      out.group0[u][f]++;
    else
      out.group1[u][f]++;
  }
  out.undesirable = out.group1[0][1] + out.group0[1][0];
  return out;
}

FairnessReport evaluate_model(const Scorer& scorer, const Dataset& data, double tau) {
  const Eigen::VectorXd scores = scorer(data.features, data.sensitive);
  const auto [s0, s1] = split_scores(scores, data.sensitive);
  require_both_groups(s0, s1, "evaluate_model");

  FairnessReport r;
  r.tau = tau;
  long long correct = 0;
  for (int i = 0; i < scores.size(); ++i)
    if ((scores(i) >= tau ? 1 : 0) == data.labels(i)) ++correct;
  r.accuracy = static_cast<double>(correct) / data.rows();
  r.dp = dp_gap(s0, s1, tau);
  r.dp_bar = dp_bar_gap(s0, s1);
  r.wdp = wasserstein_dp(s0, s1);
  r.tvdp = tv_dp(s0, s1);
  r.ksdp = ks_dp(s0, s1);
  const EoGaps eo = eo_gaps(scores, data.labels, data.sensitive, tau);
  r.tpr_gap = eo.tpr_gap;
  r.fpr_gap = eo.fpr_gap;
  r.eo = eo.eo;
  r.mdp = stochastic_fair_match(s0, s1).total_cost;
  r.consistency = consistency(scorer, data, tau);
  return r;
}

nlohmann::json FairnessReport::to_json() const {
  nlohmann::json j;
  j["accuracy"] = accuracy;
  j["dp"] = dp;
  j["dp_bar"] = dp_bar;
  j["wdp"] = wdp;
  j["tvdp"] = tvdp;
  j["ksdp"] = ksdp;
  j["tpr_gap"] = tpr_gap;
  j["fpr_gap"] = fpr_gap;
  j["eo"] = eo;
  j["mdp"] = mdp.has_value() ? nlohmann::json(*mdp) : nlohmann::json(nullptr);
  j["transport_cost"] =
      transport_cost.has_value() ? nlohmann::json(*transport_cost) : nlohmann::json(nullptr);
  j["consistency"] =
      consistency.has_value() ? nlohmann::json(*consistency) : nlohmann::json(nullptr);
  j["tau"] = tau;
  return j;
}

std::string FairnessReport::csv_header() {
  return "lambda,accuracy,dp,dp_bar,wdp,tvdp,ksdp,tpr_gap,fpr_gap,eo,mdp,transport_cost,"
         "consistency,tau";
}

std::string FairnessReport::csv_row(double lambda) const {
  std::ostringstream row;
  row << format_double(lambda) << ',' << format_double(accuracy) << ',' << format_double(dp)
      << ',' << format_double(dp_bar) << ',' << format_double(wdp) << ',' << format_double(tvdp)
      << ',' << format_double(ksdp) << ',' << format_double(tpr_gap) << ','
      << format_double(fpr_gap) << ',' << format_double(eo) << ','
      << (mdp ? format_double(*mdp) : "") << ','
      << (transport_cost ? format_double(*transport_cost) : "") << ','
      << (consistency ? format_double(*consistency) : "") << ',' << format_double(tau);
  return row.str();
}

}  // namespace ftm
