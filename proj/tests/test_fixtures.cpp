#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "reluforge/compressor.hpp"
#include "reluforge/network_io.hpp"
#include "reluforge/regions.hpp"

using namespace reluforge;

namespace {

const std::string kDir = RELUFORGE_FIXTURE_DIR;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Fixtures, RoundTripByteIdentical) {
  for (const char* name : {"mlp_784_5_5_5_10.json", "tiny_2_2_1.json", "tiny_2_2_2_1.json",
                           "forced_stable_2_4_4_2.json", "abs_1_2_1.json"}) {
    const std::string text = slurp(kDir + "/" + name);
    EXPECT_EQ(save_network(load_network_string(text)), text) << name;
  }
}

TEST(Fixtures, MnistShapedNetHasStablyInactiveUnits) {
  const Network net = load_network_file(kDir + "/mlp_784_5_5_5_10.json");
  EXPECT_EQ(net.architecture(), (std::vector<std::size_t>{784, 5, 5, 5, 10}));
  const StabilityReport r = classify_units(net, BoxDomain::uniform(784, 0.0, 1.0));
  EXPECT_GE(r.count(StabilityClass::stably_inactive), 1u);
}

TEST(Fixtures, CenteredSweepIsMonotone) {
  const Network net = load_network_file(kDir + "/mlp_784_5_5_5_10.json");
  const Vector center = nlohmann::json::parse(slurp(kDir + "/center_784.json")).at("center").get<Vector>();
  ASSERT_EQ(center.size(), 784u);
  std::size_t prev = 0, prev_stable = net.total_hidden_units();
  for (double delta : {0.0, 1e-3, 1e-1}) {
    const BoxDomain d = BoxDomain::around(center, delta, std::pair{0.0, 1.0});
    const StabilityReport r = classify_units(net, d);
    const PatternSet ps = enumerate_patterns(net, d, r);
    const std::size_t stable = r.count(StabilityClass::stably_inactive) + r.count(StabilityClass::stably_active);
    ASSERT_TRUE(ps.complete);
    if (delta == 0.0) {
      EXPECT_EQ(ps.size(), 1u);
      EXPECT_EQ(stable, net.total_hidden_units());
    }
    EXPECT_GE(ps.size(), prev);
    EXPECT_LE(stable, prev_stable);
    prev = ps.size();
    prev_stable = stable;
  }
}

TEST(Fixtures, CompressWithoutStableUnitsIsIdentity) {
  const std::string text = slurp(kDir + "/abs_1_2_1.json");
  const Network net = load_network_string(text);
  const BoxDomain d = BoxDomain::uniform(1, -1.0, 1.0);
  const auto c = stability_compression(net, d, classify_units(net, d));
  EXPECT_TRUE(c.trace.actions.empty());
  EXPECT_EQ(save_network(c.network), text);
}
