#include "doctest.h"
#include "oracles.hpp"

#include "ftm/ot.hpp"
#include "ftm/rng.hpp"

#include <cmath>

using namespace ftm;

namespace {

Eigen::MatrixXd random_matrix(int r, int c, std::mt19937_64& g) {
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = next_double(g);
  return m;
}

CostMatrix wrap(const Eigen::MatrixXd& m) {
  CostMatrix c;
  c.entries = m;
  return c;
}

}  // namespace

TEST_SUITE("ot") {

TEST_CASE("cost matrix is squared euclidean distance") {
  Eigen::MatrixXd a(1, 2), b(1, 2);
  a << 0.0, 0.0;
  b << 3.0, 4.0;
  const CostMatrix c = build_cost_matrix(a, b);
  CHECK(c.entries.rows() == 1);
  CHECK(c.entries.cols() == 1);
  CHECK(c.entries(0, 0) == doctest::Approx(25.0).epsilon(1e-12));

  Eigen::MatrixXd a2(2, 3), b2(2, 3);
  a2 << 1, 0, 0, 0, 2, 0;
  b2 << 1, 0, 0, 1, 1, 1;
  const CostMatrix c2 = build_cost_matrix(a2, b2);
  // hand computed: |a_i - b_j|^2
  CHECK(c2.entries(0, 0) == doctest::Approx(0.0));
  CHECK(c2.entries(0, 1) == doctest::Approx(0.0 + 1.0 + 1.0));
  CHECK(c2.entries(1, 0) == doctest::Approx(1.0 + 4.0 + 0.0));
  CHECK(c2.entries(1, 1) == doctest::Approx(1.0 + 1.0 + 1.0));
}

TEST_CASE("cost matrix entries stay nonnegative for identical points") {
  auto g = make_rng(7, "cost-nonneg");
  const Eigen::MatrixXd x = random_matrix(5, 4, g);
  const CostMatrix c = build_cost_matrix(x, x);
  CHECK(c.entries.minCoeff() >= 0.0);
  for (int i = 0; i < 5; ++i) CHECK(c.entries(i, i) == 0.0);
}

TEST_CASE("cost matrix adds scaled label distance") {
  Eigen::MatrixXd a(1, 1), b(1, 1);
  a << 0.0;
  b << 1.0;
  Eigen::VectorXd ya(1), yb(1);
  ya << 1.0;
  yb << 0.0;
  const CostMatrix c = build_cost_matrix(a, b, &ya, &yb, 100.0);
  CHECK(c.entries(0, 0) == doctest::Approx(1.0 + 100.0));
  CHECK(c.alpha == 100.0);

  yb << 1.0;
  const CostMatrix same = build_cost_matrix(a, b, &ya, &yb, 100.0);
  CHECK(same.entries(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("cost matrix rejects bad inputs") {
  Eigen::MatrixXd a(1, 2), b(1, 3);
  a.setZero();
  b.setZero();
  CHECK_THROWS_AS(build_cost_matrix(a, b), std::invalid_argument);

  Eigen::MatrixXd b2(1, 2);
  b2.setZero();
  CHECK_THROWS_AS(build_cost_matrix(a, b2, nullptr, nullptr, 100.0), std::invalid_argument);
  Eigen::VectorXd ya(1), yb_short(0);
  ya << 1.0;
  CHECK_THROWS_AS(build_cost_matrix(a, b2, &ya, &yb_short, 100.0), std::invalid_argument);
  Eigen::VectorXd yb(1);
  yb << 0.0;
  CHECK_THROWS_AS(build_cost_matrix(a, b2, &ya, &yb, -1.0), std::invalid_argument);
}

TEST_CASE("assignment on hand enumerated 2x2 instances") {
  // [[5,1],[2,9]]: identity costs (5+9)/2 = 7, swap (1+2)/2 = 1.5
  Eigen::MatrixXd m(2, 2);
  m << 5, 1, 2, 9;
  TransportPlan p = solve_assignment(wrap(m));
  CHECK(p.kind == TransportPlan::Kind::assignment);
  REQUIRE(p.assignment.size() == 2);
  CHECK(p.assignment[0] == 1);
  CHECK(p.assignment[1] == 0);
  CHECK(p.total_cost == doctest::Approx(1.5).epsilon(1e-12));

  // [[0,1],[1,0]]: identity is the unique optimum at 0
  m << 0, 1, 1, 0;
  p = solve_assignment(wrap(m));
  CHECK(p.assignment[0] == 0);
  CHECK(p.assignment[1] == 1);
  CHECK(p.total_cost == doctest::Approx(0.0));
}

TEST_CASE("assignment matches brute force on random instances") {
  for (int m = 2; m <= 6; ++m) {
    for (int rep = 0; rep < 40; ++rep) {
      auto g = make_rng(100 + m, "assign-oracle", rep);
      const Eigen::MatrixXd c = random_matrix(m, m, g);
      const auto [perm, cost] = oracle::brute_force_assignment(c);
      const TransportPlan p = solve_assignment(wrap(c));
      CHECK(std::abs(p.total_cost - cost) <= 1e-9);
    }
  }
}

TEST_CASE("assignment breaks ties toward the smallest permutation") {
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(3, 3);
  TransportPlan p = solve_assignment(wrap(z));
  CHECK(p.assignment == std::vector<int>({0, 1, 2}));

  Eigen::MatrixXd m(3, 3);
  m << 0, 0, 1, 0, 1, 0, 1, 0, 0;
  // optima at cost 0: (0,2,1) and (1,0,2); lexicographically smallest first
  p = solve_assignment(wrap(m));
  CHECK(p.assignment == std::vector<int>({0, 2, 1}));

  // small integer costs force frequent ties; compare against the
  // lexicographic brute-force optimum exactly
  for (int rep = 0; rep < 60; ++rep) {
    auto g = make_rng(4, "assign-ties", rep);
    Eigen::MatrixXd c(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) c(i, j) = static_cast<double>(next_index(g, 3));
    const auto [perm, cost] = oracle::brute_force_assignment(c);
    const TransportPlan p2 = solve_assignment(wrap(c));
    CHECK(p2.assignment == perm);
    CHECK(p2.total_cost == doctest::Approx(cost).epsilon(1e-12));
  }
}

TEST_CASE("assignment cost is invariant under row permutation of the points") {
  auto g = make_rng(11, "assign-perm");
  Eigen::MatrixXd xs0 = random_matrix(6, 3, g);
  const Eigen::MatrixXd xs1 = random_matrix(6, 3, g);
  const TransportPlan before = solve_assignment(build_cost_matrix(xs0, xs1));

  std::vector<int> order = {3, 1, 5, 0, 4, 2};
  Eigen::MatrixXd shuffled(6, 3);
  for (int i = 0; i < 6; ++i) shuffled.row(i) = xs0.row(order[i]);
  const TransportPlan after = solve_assignment(build_cost_matrix(shuffled, xs1));
  CHECK(after.total_cost == doctest::Approx(before.total_cost).epsilon(1e-12));
}

TEST_CASE("assignment rejects rectangular input and handles m=1") {
  Eigen::MatrixXd rect(1, 2);
  rect << 1, 3;
  CHECK_THROWS_AS(solve_assignment(wrap(rect)), std::invalid_argument);

  Eigen::MatrixXd one(1, 1);
  one << 4.0;
  const TransportPlan p = solve_assignment(wrap(one));
  CHECK(p.assignment == std::vector<int>({0}));
  CHECK(p.total_cost == doctest::Approx(4.0));
}

TEST_CASE("kantorovich splits a single row uniformly") {
  Eigen::MatrixXd m(1, 2);
  m << 1, 3;
  const TransportPlan p = solve_kantorovich(wrap(m));
  CHECK(p.kind == TransportPlan::Kind::coupling);
  CHECK(p.coupling(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p.coupling(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p.total_cost == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("kantorovich equals vertex enumeration on small instances") {
  for (int rep = 0; rep < 30; ++rep) {
    auto g = make_rng(21, "kant-vertex", rep);
    const int r = 2 + static_cast<int>(next_index(g, 2));
    const int c = 2 + static_cast<int>(next_index(g, 3));
    const Eigen::MatrixXd m = random_matrix(r, c, g);
    const double best = oracle::enumerate_transport_vertices(m);
    const TransportPlan p = solve_kantorovich(wrap(m));
    CHECK(std::abs(p.total_cost - best) <= 1e-9);
  }
}

TEST_CASE("kantorovich equals assignment cost on square instances") {
  for (int rep = 0; rep < 10; ++rep) {
    auto g = make_rng(31, "kant-square", rep);
    const Eigen::MatrixXd m = random_matrix(5, 5, g);
    const TransportPlan lp = solve_kantorovich(wrap(m));
    const TransportPlan ap = solve_assignment(wrap(m));
    CHECK(std::abs(lp.total_cost - ap.total_cost) <= 1e-9);
  }
}

TEST_CASE("kantorovich coupling has exact uniform marginals") {
  auto g = make_rng(41, "kant-marginals");
  const Eigen::MatrixXd m = random_matrix(4, 7, g);
  const TransportPlan p = solve_kantorovich(wrap(m));
  REQUIRE(p.coupling.rows() == 4);
  REQUIRE(p.coupling.cols() == 7);
  CHECK(p.coupling.minCoeff() >= 0.0);
  for (int i = 0; i < 4; ++i)
    CHECK(p.coupling.row(i).sum() == doctest::Approx(1.0 / 4).epsilon(1e-12));
  for (int j = 0; j < 7; ++j)
    CHECK(p.coupling.col(j).sum() == doctest::Approx(1.0 / 7).epsilon(1e-12));
  CHECK(p.total_cost == doctest::Approx(plan_inner_cost(p, wrap(m))).epsilon(1e-12));
  CHECK(p.row_marginal.size() == 4);
  CHECK(p.col_marginal.size() == 7);
}

TEST_CASE("common point coupling keeps shared scores in place") {
  // scores {0.2, 0.5} vs {0.2, 0.5, 0.9}: two shared values, so the diagonal
  // block carries 1/3 each and the leftover mass 1/2 - 1/3 per shared row
  // plus nothing else routes to 0.9. Realized gap: (0.7 + 0.4)/6.
  const TransportPlan p = construct_common_point_coupling({0.2, 0.5}, {0.2, 0.5, 0.9});
  CHECK(p.kind == TransportPlan::Kind::coupling);
  REQUIRE(p.coupling.rows() == 2);
  REQUIRE(p.coupling.cols() == 3);
  CHECK(p.coupling(0, 0) == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(p.coupling(1, 1) == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(p.coupling(0, 1) == doctest::Approx(0.0));
  CHECK(p.coupling(1, 0) == doctest::Approx(0.0));
  CHECK(p.coupling(0, 2) == doctest::Approx(1.0 / 6).epsilon(1e-12));
  CHECK(p.coupling(1, 2) == doctest::Approx(1.0 / 6).epsilon(1e-12));
  CHECK(p.total_cost == doctest::Approx((0.7 + 0.4) / 6).epsilon(1e-12));
  // mass off the shared block is 1 - m/n1 = 1/3 and bounds the gap
  CHECK(p.total_cost <= 1.0 - 2.0 / 3 + 1e-12);
  for (int i = 0; i < 2; ++i)
    CHECK(p.coupling.row(i).sum() == doctest::Approx(0.5).epsilon(1e-12));
  for (int j = 0; j < 3; ++j)
    CHECK(p.coupling.col(j).sum() == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("common point coupling on identical lists is diagonal") {
  const TransportPlan p = construct_common_point_coupling({0.1, 0.4, 0.7}, {0.1, 0.4, 0.7});
  CHECK(p.total_cost == doctest::Approx(0.0));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(p.coupling(i, j) == doctest::Approx(i == j ? 1.0 / 3 : 0.0));
}

TEST_CASE("common point coupling with no shared value can hit the bound") {
  const TransportPlan p = construct_common_point_coupling({0.0}, {1.0, 1.0});
  CHECK(p.coupling(0, 0) == doctest::Approx(0.5));
  CHECK(p.coupling(0, 1) == doctest::Approx(0.5));
  CHECK(p.total_cost == doctest::Approx(1.0));  // equals 1 - 0/n1
}

TEST_CASE("common point coupling pairs duplicates once each") {
  const TransportPlan p = construct_common_point_coupling({0.3, 0.3}, {0.3, 0.3, 0.3});
  CHECK(p.total_cost == doctest::Approx(0.0));
  for (int i = 0; i < 2; ++i)
    CHECK(p.coupling.row(i).sum() == doctest::Approx(0.5).epsilon(1e-12));
  for (int j = 0; j < 3; ++j)
    CHECK(p.coupling.col(j).sum() == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("common point coupling requires n0 <= n1") {
  CHECK_THROWS_AS(construct_common_point_coupling({0.1, 0.2}, {0.3}), std::invalid_argument);
  CHECK_THROWS_AS(construct_common_point_coupling({}, {0.3}), std::invalid_argument);
}

TEST_CASE("common point coupling realized gap stays under 1 - m/n1") {
  for (int rep = 0; rep < 25; ++rep) {
    auto g = make_rng(55, "common-bound", rep);
    const int n0 = 1 + static_cast<int>(next_index(g, 6));
    const int n1 = n0 + static_cast<int>(next_index(g, 5));
    std::vector<double> s0(n0), s1(n1);
    // quantized scores so shared values actually occur
    for (auto& v : s0) v = std::round(next_double(g) * 4) / 4.0;
    for (auto& v : s1) v = std::round(next_double(g) * 4) / 4.0;
    const TransportPlan p = construct_common_point_coupling(s0, s1);
    // count the shared multiset size independently
    std::vector<double> a = s0, b = s1;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<double> shared;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(shared));
    const double bound = 1.0 - static_cast<double>(shared.size()) / n1;
    CHECK(p.total_cost <= bound + 1e-12);
    for (int i = 0; i < n0; ++i)
      CHECK(p.coupling.row(i).sum() == doctest::Approx(1.0 / n0).epsilon(1e-12));
    for (int j = 0; j < n1; ++j)
      CHECK(p.coupling.col(j).sum() == doctest::Approx(1.0 / n1).epsilon(1e-12));
  }
}

}  // TEST_SUITE
