#include <gtest/gtest.h>

#include <random>

#include "reluforge/compressor.hpp"
#include "reluforge/equiv.hpp"
#include "support/constructions.hpp"

using namespace reluforge;

TEST(Equivalence, SelfIsExact) {
  std::mt19937_64 rng(1);
  Network net = testsupport::random_network({2, 3, 3, 2}, rng);
  BoxDomain d = BoxDomain::uniform(2, -1.0, 1.0);
  auto s = check_sampled(net, net, d, 1000, 1e-12, 7);
  EXPECT_EQ(s.verdict, Verdict::pass);
  EXPECT_EQ(s.max_abs_deviation, 0.0);
  EXPECT_EQ(s.tested, 1000u);
  auto r = check_region_exact(net, net, d, exhaustive_lp_patterns(net, d));
  EXPECT_EQ(r.verdict, Verdict::pass);
  EXPECT_EQ(r.max_rel_deviation, 0.0);
  auto f = check_interior_filtered(net, net, d, 1e-3, Norm::linf, 1000, 1e-12, 7);
  EXPECT_EQ(f.verdict, Verdict::pass);
  EXPECT_GT(f.acceptance_ratio(), 0.9);
}

TEST(Equivalence, DetectsPerturbedBias) {
  std::mt19937_64 rng(2);
  Network net = testsupport::random_network({2, 3, 1}, rng);
  std::vector<Layer> layers = net.layers();
  layers.back().bias[0] += 1.0;
  Network other(2, layers);
  BoxDomain d = BoxDomain::uniform(2, -1.0, 1.0);
  auto s = check_sampled(net, other, d, 100, 1e-6, 3);
  EXPECT_EQ(s.verdict, Verdict::fail);
  EXPECT_NEAR(s.max_abs_deviation, 1.0, 1e-12);
  EXPECT_FALSE(s.failures.empty());
  EXPECT_EQ(check_sampled(other, net, d, 100, 1e-6, 3).verdict, s.verdict);
}

TEST(Equivalence, DoubledOutputFailsEveryRegion) {
  std::mt19937_64 rng(3);
  Network net = testsupport::random_network({2, 3, 1}, rng);
  std::vector<Layer> layers = net.layers();
  for (double& w : layers.back().weights.data()) w *= 2.0;
  Network other(2, layers);
  BoxDomain d = BoxDomain::uniform(2, -1.0, 1.0);
  PatternSet ps = exhaustive_lp_patterns(net, d);
  auto r = check_region_exact(net, other, d, ps);
  EXPECT_EQ(r.verdict, Verdict::fail);
  // A region where the whole layer is off maps to the same constant in both.
  std::size_t dead = 0;
  for (const auto& p : ps.patterns) dead += p.count_active() == 0;
  EXPECT_EQ(r.num_failures + dead, r.tested);
}

TEST(Equivalence, CompressedNetsCertified) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    Network net = testsupport::forced_stable_network({2, 4, 4, 2}, rng);
    BoxDomain d = BoxDomain::uniform(2, -1.0, 1.0);
    auto c = stability_compression(net, d, classify_units(net, d));
    EXPECT_TRUE(check_region_exact(net, c.network, d, exhaustive_lp_patterns(net, d)).passed());
    EXPECT_TRUE(check_sampled(net, c.network, d, 2000, 1e-6, t).passed());
  }
}

TEST(Equivalence, ConstantCollapseSingleRegion) {
  std::mt19937_64 rng(5);
  Network net = testsupport::random_network({2, 3, 2, 1}, rng);
  std::vector<Layer> layers = net.layers();
  for (double& b : layers[0].bias) b = -50.0;
  net = Network(2, layers);
  BoxDomain d = BoxDomain::uniform(2, -1.0, 1.0);
  auto c = stability_compression(net, d, classify_units(net, d));
  PatternSet ps = exhaustive_lp_patterns(net, d);
  ASSERT_EQ(ps.size(), 1u);
  EXPECT_TRUE(check_region_exact(net, c.network, d, ps).passed());
}

TEST(Equivalence, ShallowInteriorFiltered) {
  std::mt19937_64 rng(6);
  Network net = testsupport::random_network({2, 2, 1}, rng);
  BoxDomain d = BoxDomain::uniform(2, -1.0, 1.0);
  ShallowConfig cfg;
  auto full = shallow_full(net, d, cfg);
  auto r = check_interior_filtered(net, full, d, 1e-3, Norm::linf, 2000, 1e-6, 1);
  EXPECT_EQ(r.verdict, Verdict::pass);
  Network deep = testsupport::random_network({2, 2, 2, 1}, rng);
  auto pat = shallow_patterns(deep, d, exhaustive_lp_patterns(deep, d), cfg);
  EXPECT_TRUE(check_interior_filtered(deep, pat, d, 1e-3, Norm::linf, 2000, 1e-6, 1).passed());
  auto big = check_interior_filtered(deep, pat, d, 10.0, Norm::linf, 200, 1e-6, 1);
  EXPECT_EQ(big.verdict, Verdict::inconclusive);
  EXPECT_EQ(big.tested, 0u);
}

TEST(Equivalence, RegionPassImpliesSampledPass) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 10; ++t) {
    Network net = testsupport::forced_stable_network({2, 3, 3, 1}, rng);
    BoxDomain d = BoxDomain::uniform(2, -1.0, 1.0);
    auto c = stability_compression(net, d, classify_units(net, d));
    if (!check_region_exact(net, c.network, d, exhaustive_lp_patterns(net, d)).passed()) continue;
    for (std::uint64_t seed : {1u, 2u, 3u}) EXPECT_TRUE(check_sampled(net, c.network, d, 500, 1e-6, seed).passed());
  }
}

TEST(Equivalence, Errors) {
  std::mt19937_64 rng(8);
  Network a = testsupport::random_network({2, 3, 1}, rng);
  Network b = testsupport::random_network({3, 3, 1}, rng);
  BoxDomain d = BoxDomain::uniform(2, -1.0, 1.0);
  EXPECT_THROW(check_sampled(a, b, d, 10, 1e-6, 0), DimensionError);
  PatternSet incomplete;
  EXPECT_THROW(check_region_exact(a, a, d, incomplete), InconsistentInputError);
  auto j = report_to_json(check_sampled(a, a, d, 10, 1e-6, 0));
  EXPECT_EQ(j["verdict"], "pass");
  EXPECT_EQ(j["tested"], 10);
}
