#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "reluforge/regions.hpp"
#include "support/random_nets.hpp"

using namespace reluforge;

namespace {

// Three lines in general position crossing [-1,1]^2 near the origin.
Network three_lines() {
  Matrix w(3, 2);
  w(0, 0) = 1.0, w(0, 1) = 0.2;
  w(1, 0) = -0.3, w(1, 1) = 1.0;
  w(2, 0) = 1.0, w(2, 1) = 1.1;
  Layer hidden{w, {0.1, -0.2, 0.35}, Activation::relu};
  Layer out{Matrix(1, 3, 1.0), {0.0}, Activation::identity};
  return Network(2, {hidden, out});
}

PatternSet enumerate(const Network& net, const BoxDomain& d) {
  return enumerate_patterns(net, d, classify_units(net, d));
}

}  // namespace

TEST(Regions, SingleUnit) {
  Network net(1, {Layer{Matrix(1, 1, 1.0), {0.0}, Activation::relu}, Layer{Matrix(1, 1, 1.0), {0.0}, Activation::identity}});
  PatternSet ps = enumerate(net, BoxDomain({-1.0}, {1.0}));
  EXPECT_TRUE(ps.complete);
  ASSERT_EQ(ps.size(), 2u);
  EXPECT_TRUE(ps.contains(ActivationPattern::from_string("0")));
  EXPECT_TRUE(ps.contains(ActivationPattern::from_string("1")));
}

TEST(Regions, ThreeLinesMakeSevenRegions) {
  BoxDomain d = BoxDomain::uniform(2, -1.0, 1.0);
  PatternSet ps = enumerate(three_lines(), d);
  EXPECT_TRUE(ps.complete);
  EXPECT_EQ(ps.size(), 7u);
  EXPECT_EQ(brute_force_patterns(three_lines(), d, 500).size(), 7u);
  EXPECT_EQ(exhaustive_lp_patterns(three_lines(), d).patterns, ps.patterns);
  EXPECT_EQ(zaslavsky_bound(3, 2), 7u);
}

TEST(Regions, ConstantNetHasOnePattern) {
  Network net(2, {Layer{Matrix(3, 2), {-1, -1, -1}, Activation::relu}, Layer{Matrix(1, 3), {0.5}, Activation::identity}});
  BoxDomain d = BoxDomain::uniform(2, -1.0, 1.0);
  EXPECT_EQ(brute_force_patterns(net, d, 50).size(), 1u);
  PatternSet ps = enumerate(net, d);
  EXPECT_TRUE(ps.complete);
  ASSERT_EQ(ps.size(), 1u);
  EXPECT_EQ(ps.patterns.begin()->to_string(), "000");
  EXPECT_EQ(exhaustive_lp_patterns(net, d).size(), 1u);
}

TEST(Regions, GridPatternsAreLpFeasible) {
  std::mt19937_64 rng(71);
  BoxDomain d = BoxDomain::uniform(2, -1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    Network net = testsupport::random_network({2, 3, 3, 1}, rng);
    for (const auto& p : brute_force_patterns(net, d, 100).patterns) EXPECT_TRUE(region_feasible(net, d, p)) << p.to_string();
  }
}

TEST(Regions, EnumerationMatchesOraclesOnSmallNets) {
  std::mt19937_64 rng(72);
  for (int trial = 0; trial < 12; ++trial) {
    const bool two_d = trial % 3 != 0;
    Network net = two_d ? testsupport::random_network({2, 3, 2, 1}, rng) : testsupport::random_network({1, 2, 1}, rng);
    BoxDomain d = BoxDomain::uniform(net.input_dim(), -1.0, 1.0);
    PatternSet ps = enumerate(net, d);
    ASSERT_TRUE(ps.complete);
    EXPECT_EQ(ps.patterns, exhaustive_lp_patterns(net, d).patterns) << "trial " << trial;
    for (const auto& p : brute_force_patterns(net, d, 400).patterns) EXPECT_TRUE(ps.contains(p)) << p.to_string();
  }
}

TEST(Regions, CoverageAndNoGoodClosure) {
  std::mt19937_64 rng(73);
  Network net = testsupport::random_network({2, 4, 3, 2}, rng);
  BoxDomain d = BoxDomain::uniform(2, -1.0, 1.0);
  StabilityReport report = classify_units(net, d);
  PatternSet ps = enumerate_patterns(net, d, report);
  ASSERT_TRUE(ps.complete);
  for (int k = 0; k < 10000; ++k) {
    auto p = forward(net, testsupport::sample_point(d, rng)).pattern;
    EXPECT_TRUE(ps.contains(p)) << p.to_string();
  }
  EnumerationModel model = enumeration_model(net, d, report);
  for (const auto& p : ps.patterns) model.encoding.milp.base.constraints.push_back(model.no_good(p));
  EXPECT_EQ(opt::solve_milp(model.encoding.milp).status, opt::SolveStatus::infeasible);
}

TEST(Regions, PatternLimitMarksIncomplete) {
  std::mt19937_64 rng(74);
  Network net = testsupport::random_network({2, 6, 1}, rng);
  BoxDomain d = BoxDomain::uniform(2, -1.0, 1.0);
  EnumerationLimits limits;
  limits.max_patterns = 3;
  PatternSet ps = enumerate_patterns(net, d, classify_units(net, d), limits);
  EXPECT_FALSE(ps.complete);
  EXPECT_EQ(ps.size(), 3u);
}

TEST(Regions, RejectsForeignReport) {
  std::mt19937_64 rng(75);
  Network a = testsupport::random_network({2, 2, 1}, rng);
  Network b = testsupport::random_network({2, 2, 1}, rng);
  BoxDomain d = BoxDomain::uniform(2, -1.0, 1.0);
  EXPECT_THROW(enumerate_patterns(b, d, classify_units(a, d)), InconsistentInputError);
  EXPECT_THROW(brute_force_patterns(testsupport::random_network({4, 2, 1}, rng), BoxDomain::uniform(4, 0, 1), 3),
               DimensionError);
  EXPECT_THROW(exhaustive_lp_patterns(testsupport::random_network({2, 9, 8, 1}, rng), d), LimitError);
}

TEST(Regions, ZaslavskyHoldsForSingleLayerNets) {
  std::mt19937_64 rng(76);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n1 = 1 + trial % 6;
    Network net = testsupport::random_network({2, n1, 1}, rng);
    BoxDomain d = BoxDomain::uniform(2, -2.0, 2.0);
    EXPECT_LE(enumerate(net, d).size(), zaslavsky_bound(n1, 2));
  }
}

TEST(Regions, PrefixSetsByHand) {
  PatternSet single;
  single.patterns.insert(ActivationPattern::from_string("10|01"));
  EXPECT_EQ(prefix_sets(single).counts(), (std::vector<std::size_t>{1, 1, 1}));

  PatternSet two;
  two.patterns.insert(ActivationPattern::from_string("1|10"));
  two.patterns.insert(ActivationPattern::from_string("1|01"));
  EXPECT_EQ(prefix_sets(two).counts(), (std::vector<std::size_t>{1, 1, 2}));
  EXPECT_THROW(prefix_sets(PatternSet{}), InconsistentInputError);
}

TEST(Regions, JsonLinesRoundTrip) {
  PatternSet ps;
  ps.patterns.insert(ActivationPattern::from_string("10110|01|1"));
  ps.patterns.insert(ActivationPattern::from_string("00000|00|0"));
  std::stringstream buf;
  write_patterns(buf, ps);
  EXPECT_NE(buf.str().find("\"10110|01|1\"\n"), std::string::npos);
  PatternSet back = read_patterns(buf, true);
  EXPECT_EQ(back.patterns, ps.patterns);
  std::stringstream bad("\"10x\"\n");
  EXPECT_THROW(read_patterns(bad), ParseError);
}
