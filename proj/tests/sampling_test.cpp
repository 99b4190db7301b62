#include <gtest/gtest.h>

#include <set>

#include "ergae/sampling.hpp"
#include "fixtures.hpp"

using namespace ergae;

namespace {

std::set<std::size_t> covered(const std::vector<std::vector<std::size_t>>& batches) {
  std::set<std::size_t> out;
  for (const auto& b : batches) out.insert(b.begin(), b.end());
  return out;
}

}  // namespace

TEST(Sampling, PolicyNames) {
  for (auto p : {SamplingPolicy::kComponent, SamplingPolicy::kConditionalIndependence, SamplingPolicy::kSnowflake,
                 SamplingPolicy::kEntity}) {
    EXPECT_EQ(sampling_policy_from_string(to_string(p)), p);
  }
  EXPECT_THROW(sampling_policy_from_string("random"), std::invalid_argument);
}

TEST(Sampling, ComponentPolicyNeverSplitsAndRespectsBudget) {
  auto fx = ergae::testing::random_multigraph(300, 200, 9);
  const Dataset& d = *fx.dataset;
  SamplingConfig cfg;
  cfg.budget = 40;
  auto comps = connected_components(d);
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    auto batches = sample_epoch(d, cfg, seed);
    EXPECT_EQ(covered(batches).size(), d.size());
    std::vector<std::size_t> where(d.size());
    for (std::size_t k = 0; k < batches.size(); ++k)
      for (auto e : batches[k]) where[e] = k;
    for (const auto& c : comps)
      for (auto e : c.entities) EXPECT_EQ(where[e], where[c.entities.front()]);
    for (const auto& b : batches) {
      bool oversized_alone = false;
      for (const auto& c : comps)
        if (c.entities.size() > cfg.budget && c.entities.size() == b.size()) oversized_alone = true;
      if (!oversized_alone) EXPECT_LE(b.size(), cfg.budget);
    }
  }
}

TEST(Sampling, OversizedComponentGetsItsOwnBatch) {
  auto fx = ergae::testing::random_multigraph(50, 200, 10);  // dense: one big component
  const Dataset& d = *fx.dataset;
  auto comps = connected_components(d);
  std::size_t biggest = 0;
  for (const auto& c : comps) biggest = std::max(biggest, c.entities.size());
  ASSERT_GT(biggest, 10u);
  SamplingConfig cfg;
  cfg.budget = 10;
  auto batches = sample_epoch(d, cfg, 1);
  bool found = false;
  for (const auto& b : batches) found = found || b.size() == biggest;
  EXPECT_TRUE(found);
}

TEST(Sampling, ConditionalIndependenceAnchorsEveryBatch) {
  auto fx = ergae::testing::random_multigraph(200, 150, 11);
  const Dataset& d = *fx.dataset;
  SamplingConfig cfg;
  cfg.policy = SamplingPolicy::kConditionalIndependence;
  cfg.budget = 30;
  cfg.anchor_ids = {d.id(0), d.id(17)};
  auto batches = sample_epoch(d, cfg, 2);
  EXPECT_EQ(covered(batches).size(), d.size());
  for (const auto& b : batches) {
    std::set<std::size_t> m(b.begin(), b.end());
    EXPECT_TRUE(m.count(0) && m.count(17));
    EXPECT_EQ(m.size(), b.size());
  }
  cfg.anchor_ids = {"missing"};
  EXPECT_THROW(sample_epoch(d, cfg, 0), std::invalid_argument);
  cfg.anchor_ids.clear();
  EXPECT_THROW(sample_epoch(d, cfg, 0), std::invalid_argument);
}

TEST(Sampling, SnowflakesStayWithinRadius) {
  auto fx = ergae::testing::random_multigraph(150, 160, 12);
  const Dataset& d = *fx.dataset;
  SamplingConfig cfg;
  cfg.policy = SamplingPolicy::kSnowflake;
  cfg.budget = 25;
  cfg.radius = 2;
  auto batches = sample_epoch(d, cfg, 3);
  EXPECT_EQ(covered(batches).size(), d.size());
  for (const auto& b : batches) {
    EXPECT_LE(b.size(), cfg.budget);
    auto dist = ergae::testing::hop_distances(d, b.front());
    for (auto e : b) EXPECT_LE(dist[e], cfg.radius);
  }
}

TEST(Sampling, EntityPolicyChunks) {
  auto fx = ergae::testing::random_multigraph(95, 50, 13);
  SamplingConfig cfg;
  cfg.policy = SamplingPolicy::kEntity;
  cfg.budget = 10;
  auto batches = sample_epoch(*fx.dataset, cfg, 0);
  EXPECT_EQ(batches.size(), 10u);
  std::size_t total = 0;
  for (const auto& b : batches) total += b.size();
  EXPECT_EQ(total, 95u);
}

TEST(Sampling, DeterministicPerSeed) {
  auto fx = ergae::testing::random_multigraph(120, 80, 14);
  SamplingConfig cfg;
  cfg.budget = 16;
  EXPECT_EQ(sample_epoch(*fx.dataset, cfg, 5), sample_epoch(*fx.dataset, cfg, 5));
  EXPECT_NE(sample_epoch(*fx.dataset, cfg, 5), sample_epoch(*fx.dataset, cfg, 6));
}

TEST(Sampling, BatchesCarryLocalAdjacency) {
  auto fx = ergae::testing::random_multigraph(80, 60, 15);
  const Dataset& d = *fx.dataset;
  SamplingConfig cfg;
  cfg.budget = 20;
  for (const auto& b : sample_batches(d, cfg, 1)) {
    ASSERT_EQ(b.edges.size(), d.edges().size());
    for (std::size_t r = 0; r < b.edges.size(); ++r) {
      std::size_t expected = 0;
      std::set<std::size_t> m(b.entities.begin(), b.entities.end());
      for (auto [s, t] : d.edges()[r]) expected += m.count(s) && m.count(t);
      EXPECT_EQ(b.edges[r].size(), expected);
      for (auto [s, t] : b.edges[r]) {
        ASSERT_LT(s, b.size());
        ASSERT_LT(t, b.size());
      }
    }
  }
}
