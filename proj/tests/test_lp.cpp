#include <gtest/gtest.h>

#include <random>

#include "reluforge/lp.hpp"
#include "support/textbook_simplex.hpp"

using namespace reluforge::opt;

TEST(Lp, BoundedMaximum) {
  LpProblem p;
  p.add_variable(0.0, kInf, 1.0);
  p.add_constraint({{0, 1.0}}, Relation::less_equal, 3.0);
  Solution s = solve_lp(p);
  ASSERT_EQ(s.status, SolveStatus::optimal);
  EXPECT_NEAR(s.objective, 3.0, 1e-12);
  EXPECT_NEAR(s.bound, 3.0, 1e-12);
}

TEST(Lp, Infeasible) {
  LpProblem p;
  p.add_variable(-kInf, kInf, 1.0);
  p.add_constraint({{0, 1.0}}, Relation::greater_equal, 1.0);
  p.add_constraint({{0, 1.0}}, Relation::less_equal, 0.0);
  EXPECT_EQ(solve_lp(p).status, SolveStatus::infeasible);
}

TEST(Lp, ConflictingBoundsAreInfeasible) {
  LpProblem p;
  p.add_variable(2.0, 1.0, 1.0);
  EXPECT_EQ(solve_lp(p).status, SolveStatus::infeasible);
}

TEST(Lp, Unbounded) {
  LpProblem p;
  p.add_variable(0.0, kInf, 1.0);
  p.add_variable(0.0, kInf, 0.0);
  p.add_constraint({{0, 1.0}, {1, -1.0}}, Relation::less_equal, 1.0);
  EXPECT_EQ(solve_lp(p).status, SolveStatus::unbounded);
}

TEST(Lp, MinimizeWithEqualityAndFreeVariable) {
  // min x + 2y, x + y = 4, x - y >= -2 (y free, x in [0, 3])
  LpProblem p;
  p.sense = Sense::minimize;
  p.add_variable(0.0, 3.0, 1.0);
  p.add_variable(-kInf, kInf, 2.0);
  p.add_constraint({{0, 1.0}, {1, 1.0}}, Relation::equal, 4.0);
  p.add_constraint({{0, 1.0}, {1, -1.0}}, Relation::greater_equal, -2.0);
  Solution s = solve_lp(p);
  ASSERT_EQ(s.status, SolveStatus::optimal);
  EXPECT_NEAR(s.objective, 3.0 + 2.0, 1e-9);
  EXPECT_NEAR(s.values[0], 3.0, 1e-9);
}

TEST(Lp, DegenerateProblemTerminates) {
  // Classic cycling example (Beale) for plain Dantzig pricing.
  LpProblem p;
  p.sense = Sense::minimize;
  for (double c : {-0.75, 150.0, -0.02, 6.0}) p.add_variable(0.0, kInf, c);
  p.add_constraint({0.25, -60.0, -0.04, 9.0}, Relation::less_equal, 0.0);
  p.add_constraint({0.5, -90.0, -0.02, 3.0}, Relation::less_equal, 0.0);
  p.add_constraint({0.0, 0.0, 1.0, 0.0}, Relation::less_equal, 1.0);
  Solution s = solve_lp(p);
  ASSERT_EQ(s.status, SolveStatus::optimal);
  EXPECT_NEAR(s.objective, -0.05, 1e-9);
}

TEST(Lp, RejectsNonFiniteInput) {
  LpProblem p;
  p.add_variable(0.0, 1.0, 1.0);
  p.add_constraint({{0, 1.0}}, Relation::less_equal, std::numeric_limits<double>::infinity());
  EXPECT_THROW(solve_lp(p), reluforge::NonFiniteError);
}

namespace {

LpProblem random_lp(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nvar(1, 30), ncon(1, 25), kind(0, 9);
  std::normal_distribution<double> normal(0.0, 1.0);
  LpProblem p;
  p.sense = kind(rng) < 5 ? Sense::maximize : Sense::minimize;
  const int n = nvar(rng), m = ncon(rng);
  for (int j = 0; j < n; ++j) {
    const int k = kind(rng);
    double lo = -kInf, hi = kInf;
    if (k < 5) lo = std::round(normal(rng) * 2.0);
    if (k >= 3 && k < 9) hi = (std::isfinite(lo) ? lo : 0.0) + std::abs(normal(rng)) * 3.0;
    p.add_variable(lo, hi, normal(rng));
  }
  // Rows are built around a random point so that most instances are feasible.
  std::vector<double> x0(n);
  for (int j = 0; j < n; ++j) {
    double lo = std::isfinite(p.lower[j]) ? p.lower[j] : -5.0;
    double hi = std::isfinite(p.upper[j]) ? p.upper[j] : lo + 10.0;
    x0[j] = lo + (hi - lo) * 0.37;
  }
  for (int i = 0; i < m; ++i) {
    std::vector<double> a(n);
    double ax = 0.0;
    for (int j = 0; j < n; ++j) {
      a[j] = kind(rng) < 3 ? 0.0 : std::round(normal(rng) * 4.0) / 2.0;
      ax += a[j] * x0[j];
    }
    const int r = kind(rng);
    const double noise = normal(rng);
    if (r < 6) p.add_constraint(a, Relation::less_equal, ax + std::abs(noise) + (r == 0 ? -3.0 : 0.0));
    else if (r < 9) p.add_constraint(a, Relation::greater_equal, ax - std::abs(noise));
    else p.add_constraint(a, Relation::equal, ax);
  }
  return p;
}

}  // namespace

TEST(Lp, MatchesTextbookOracleOnRandomProblems) {
  std::mt19937_64 rng(20240611);
  int optimal = 0, infeasible = 0, unbounded = 0;
  for (int trial = 0; trial < 400; ++trial) {
    LpProblem p = random_lp(rng);
    Solution s = solve_lp(p);
    testsupport::TextbookResult ref = testsupport::textbook_solve(p);
    switch (ref.kind) {
      case testsupport::TextbookResult::optimal:
        ASSERT_EQ(s.status, SolveStatus::optimal) << "trial " << trial;
        EXPECT_NEAR(s.objective, ref.objective, 1e-6 * (1.0 + std::abs(ref.objective))) << "trial " << trial;
        EXPECT_LE(max_violation(p, s.values), 1e-7) << "trial " << trial;
        ++optimal;
        break;
      case testsupport::TextbookResult::infeasible:
        EXPECT_EQ(s.status, SolveStatus::infeasible) << "trial " << trial;
        ++infeasible;
        break;
      case testsupport::TextbookResult::unbounded:
        EXPECT_EQ(s.status, SolveStatus::unbounded) << "trial " << trial;
        ++unbounded;
        break;
    }
  }
  EXPECT_GT(optimal, 100);
  EXPECT_GT(infeasible + unbounded, 5);
}

TEST(Lp, EmptyColumnsMatchOracle) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    LpProblem p = random_lp(rng);
    for (auto& c : p.constraints) c.coefficients[trial % p.num_variables()] = 0.0;
    Solution s = solve_lp(p);
    testsupport::TextbookResult ref = testsupport::textbook_solve(p);
    if (ref.kind == testsupport::TextbookResult::optimal) {
      ASSERT_EQ(s.status, SolveStatus::optimal) << "trial " << trial;
      EXPECT_NEAR(s.objective, ref.objective, 1e-6 * (1.0 + std::abs(ref.objective)));
      EXPECT_LE(max_violation(p, s.values), 1e-7);
    } else {
      EXPECT_EQ(s.status, ref.kind == testsupport::TextbookResult::infeasible ? SolveStatus::infeasible
                                                                              : SolveStatus::unbounded)
          << "trial " << trial;
    }
  }
}
