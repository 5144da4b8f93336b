#include <gtest/gtest.h>

#include <random>
#include <set>

#include "reluforge/milp.hpp"
#include "support/random_milps.hpp"

using namespace reluforge::opt;

TEST(Milp, TwoBinariesWithCover) {
  MilpProblem p;
  p.base.add_variable(0.0, 1.0, 1.0);
  p.base.add_variable(0.0, 1.0, 1.0);
  p.base.add_constraint({{0, 1.0}, {1, 1.0}}, Relation::less_equal, 1.0);
  p.binaries = {0, 1};
  Solution s = solve_milp(p);
  ASSERT_EQ(s.status, SolveStatus::optimal);
  EXPECT_NEAR(s.objective, 1.0, 1e-9);
  EXPECT_NEAR(s.bound, 1.0, 1e-9);
}

TEST(Milp, FirstFeasibleAboveThreshold) {
  MilpProblem p;
  for (int j = 0; j < 6; ++j) p.base.add_variable(0.0, 1.0, 1.0 + j);
  p.base.add_constraint({1, 1, 1, 1, 1, 1}, Relation::less_equal, 2.5);
  p.binaries = {0, 1, 2, 3, 4, 5};
  MilpConfig cfg;
  cfg.target = MilpTarget::first_feasible_above(0.0);
  Solution s = solve_milp(p, cfg);
  ASSERT_EQ(s.status, SolveStatus::feasible_found);
  EXPECT_GT(s.objective, 0.0);
  EXPECT_GE(s.bound, 11.0 - 1e-9);
}

TEST(Milp, RejectsBadBinaryBounds) {
  MilpProblem p;
  p.base.add_variable(0.0, 2.0, 1.0);
  p.binaries = {0};
  EXPECT_THROW(solve_milp(p), reluforge::DimensionError);
}

TEST(Milp, KnapsackMatchesBruteForce) {
  const std::vector<double> value{10, 13, 7, 8, 9, 4, 12, 6};
  const std::vector<double> weight{5, 7, 3, 4, 5, 2, 6, 3};
  const double cap = 17;
  MilpProblem p;
  for (std::size_t j = 0; j < value.size(); ++j) p.base.add_variable(0.0, 1.0, value[j]);
  p.base.add_constraint(weight, Relation::less_equal, cap);
  for (std::size_t j = 0; j < value.size(); ++j) p.binaries.push_back(j);

  double best = 0.0;
  for (unsigned mask = 0; mask < 256; ++mask) {
    double v = 0.0, w = 0.0;
    for (std::size_t j = 0; j < 8; ++j)
      if (mask >> j & 1u) v += value[j], w += weight[j];
    if (w <= cap) best = std::max(best, v);
  }
  Solution s = solve_milp(p);
  ASSERT_EQ(s.status, SolveStatus::optimal);
  EXPECT_NEAR(s.objective, best, 1e-9);
}

TEST(Milp, NodeLimitReportsValidBound) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(1.0, 10.0);
  MilpProblem p;
  std::vector<double> w;
  for (int j = 0; j < 20; ++j) {
    p.base.add_variable(0.0, 1.0, u(rng));
    w.push_back(u(rng));
    p.binaries.push_back(j);
  }
  p.base.add_constraint(w, Relation::less_equal, 30.0);
  MilpConfig cfg;
  cfg.node_limit = 5;
  Solution limited = solve_milp(p, cfg);
  Solution full = solve_milp(p);
  ASSERT_EQ(full.status, SolveStatus::optimal);
  ASSERT_EQ(limited.status, SolveStatus::time_limit);
  EXPECT_GE(limited.bound, full.objective - 1e-9);
}

TEST(Milp, MinimizationIsHandled) {
  MilpProblem p;
  p.base.sense = Sense::minimize;
  p.base.add_variable(0.0, 1.0, 3.0);
  p.base.add_variable(0.0, 1.0, 2.0);
  p.base.add_variable(0.0, 5.0, 1.0);
  p.base.add_constraint({{0, 1.0}, {1, 1.0}}, Relation::greater_equal, 1.0);
  p.base.add_constraint({{1, -4.0}, {2, 1.0}}, Relation::greater_equal, 0.5);
  p.binaries = {0, 1};
  Solution s = solve_milp(p);
  ASSERT_EQ(s.status, SolveStatus::optimal);
  // z0 = 1 gives 3 + 0.5; z1 = 1 gives 2 + 4.5
  EXPECT_NEAR(s.objective, 3.5, 1e-9);
  EXPECT_NEAR(s.bound, 3.5, 1e-9);
}

TEST(Milp, LazyHookSeesEveryFeasibleAssignment) {
  // Feasible set: binary vectors of length 5 with z0 + z1 + z2 <= 2 and z3 >= z4.
  MilpProblem p;
  for (int j = 0; j < 5; ++j) p.base.add_variable(0.0, 1.0, 1.0);
  p.base.add_constraint({1, 1, 1, 0, 0}, Relation::less_equal, 2.0);
  p.base.add_constraint({0, 0, 0, 1, -1}, Relation::greater_equal, 0.0);
  p.binaries = {0, 1, 2, 3, 4};
  std::set<unsigned> seen;
  auto hook = [&](const std::vector<double>& x, double) {
    unsigned mask = 0;
    std::vector<double> cut(5);
    double ones = 0;
    for (int j = 0; j < 5; ++j) {
      const bool on = x[j] > 0.5;
      mask |= static_cast<unsigned>(on) << j;
      cut[j] = on ? 1.0 : -1.0;
      ones += on;
    }
    EXPECT_TRUE(seen.insert(mask).second) << "duplicate incumbent";
    IncumbentDecision d;
    d.accept = false;
    d.cuts.push_back({cut, Relation::less_equal, ones - 1.0});
    return d;
  };
  Solution s = solve_milp(p, {}, hook);
  EXPECT_EQ(s.status, SolveStatus::infeasible);
  std::set<unsigned> expected;
  for (unsigned m = 0; m < 32; ++m) {
    const int head = (m & 1) + (m >> 1 & 1) + (m >> 2 & 1);
    if (head <= 2 && (m >> 3 & 1) >= (m >> 4 & 1)) expected.insert(m);
  }
  EXPECT_EQ(seen, expected);
}

TEST(Milp, RandomProblemsMatchBruteForce) {
  std::mt19937_64 rng(31);
  int feasible = 0;
  for (int t = 0; t < 60; ++t) {
    MilpProblem p = testsupport::random_milp(rng, 8);
    const auto ref = testsupport::brute_force_milp(p);
    const Solution s = solve_milp(p);
    if (!ref.feasible) {
      EXPECT_EQ(s.status, SolveStatus::infeasible) << "trial " << t;
      continue;
    }
    ++feasible;
    ASSERT_EQ(s.status, SolveStatus::optimal) << "trial " << t;
    EXPECT_NEAR(s.objective, ref.best, 1e-6 * (1.0 + std::abs(ref.best))) << "trial " << t;
    bool complete = false;
    EXPECT_EQ(testsupport::lazy_enumerate(p, &complete), ref.feasible_masks) << "trial " << t;
    EXPECT_TRUE(complete);
  }
  EXPECT_GT(feasible, 30);
}
