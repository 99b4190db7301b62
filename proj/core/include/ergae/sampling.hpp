#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ergae/dataset.hpp"

namespace ergae {

enum class SamplingPolicy { kComponent, kConditionalIndependence, kSnowflake, kEntity };

struct SamplingConfig {
  SamplingPolicy policy = SamplingPolicy::kComponent;
  std::size_t budget = 256;  // maximum entities per batch
  // conditional independence: either an entity-type or explicit ids
  std::string anchor_type;
  std::vector<std::string> anchor_ids;
  std::size_t radius = 1;  // snowflake
};

/// "component", "conditional-independence", "snowflake" or "entity".
SamplingPolicy sampling_policy_from_string(const std::string& name);
std::string to_string(SamplingPolicy policy);

/// Entity lists (dataset indices) for one epoch. Every entity appears in at
/// least one batch. The component policy never splits a component; a component
/// larger than the budget gets a batch of its own.
std::vector<std::vector<std::size_t>> sample_epoch(const Dataset& dataset, const SamplingConfig& config,
                                                   std::uint64_t seed);

/// Same as sample_epoch, with adjacency restricted to each batch.
std::vector<Batch> sample_batches(const Dataset& dataset, const SamplingConfig& config, std::uint64_t seed);

}  // namespace ergae
