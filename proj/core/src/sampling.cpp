#include "ergae/sampling.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <random>
#include <stdexcept>

namespace ergae {

namespace {

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  // Fisher-Yates with a fixed reduction so results do not depend on the
  // standard library's distribution implementation.
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

std::vector<std::vector<std::size_t>> neighbor_lists(const Dataset& d) {
  std::vector<std::vector<std::size_t>> adj(d.size());
  for (const auto& list : d.edges()) {
    for (const auto& [a, b] : list) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
  }
  for (auto& l : adj) {
    std::sort(l.begin(), l.end());
    l.erase(std::unique(l.begin(), l.end()), l.end());
  }
  return adj;
}

// Greedy first-fit of shuffled groups into batches of at most `budget` entities.
std::vector<std::vector<std::size_t>> pack_groups(std::vector<std::vector<std::size_t>> groups, std::size_t budget,
                                                  std::size_t reserved, std::mt19937_64& rng) {
  shuffle(groups, rng);
  std::vector<std::vector<std::size_t>> batches;
  std::vector<std::size_t> current;
  const std::size_t room = budget - reserved;
  for (auto& g : groups) {
    if (!current.empty() && current.size() + g.size() > room) {
      batches.push_back(std::move(current));
      current.clear();
    }
    current.insert(current.end(), g.begin(), g.end());
  }
  if (!current.empty()) batches.push_back(std::move(current));
  return batches;
}

std::vector<std::vector<std::size_t>> component_groups(const Dataset& d) {
  std::vector<std::vector<std::size_t>> groups;
  for (auto& c : connected_components(d)) groups.push_back(std::move(c.entities));
  return groups;
}

std::vector<std::vector<std::size_t>> conditional_independence(const Dataset& d, const SamplingConfig& cfg,
                                                               std::mt19937_64& rng) {
  std::vector<std::size_t> anchors;
  if (!cfg.anchor_type.empty()) {
    auto t = d.schema().entity_type_index(cfg.anchor_type);
    if (!t) throw std::invalid_argument("unknown anchor entity-type '" + cfg.anchor_type + "'");
    anchors = d.entities_of_type(*t);
  }
  for (const auto& id : cfg.anchor_ids) {
    auto e = d.find(id);
    if (!e) throw std::invalid_argument("unknown anchor id '" + id + "'");
    anchors.push_back(*e);
  }
  std::sort(anchors.begin(), anchors.end());
  anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());
  if (anchors.empty()) throw std::invalid_argument("conditional-independence sampling needs an anchor type or ids");
  if (anchors.size() > cfg.budget) {
    throw std::invalid_argument("anchor set of " + std::to_string(anchors.size()) + " entities exceeds batch budget " +
                                std::to_string(cfg.budget));
  }
  std::vector<char> is_anchor(d.size(), 0);
  for (auto a : anchors) is_anchor[a] = 1;
  std::vector<std::size_t> rest;
  for (std::size_t e = 0; e < d.size(); ++e) {
    if (!is_anchor[e]) rest.push_back(e);
  }
  std::vector<std::vector<std::size_t>> groups;
  for (auto& c : connected_components(d.subset(rest))) {
    for (auto& local : c.entities) local = rest[local];
    groups.push_back(std::move(c.entities));
  }
  if (groups.empty()) return {anchors};
  auto batches = pack_groups(std::move(groups), cfg.budget, anchors.size(), rng);
  for (auto& b : batches) b.insert(b.begin(), anchors.begin(), anchors.end());
  return batches;
}

std::vector<std::vector<std::size_t>> snowflakes(const Dataset& d, const SamplingConfig& cfg, std::mt19937_64& rng) {
  const auto adj = neighbor_lists(d);
  std::vector<std::size_t> seeds(d.size());
  std::iota(seeds.begin(), seeds.end(), 0);
  shuffle(seeds, rng);
  std::vector<char> covered(d.size(), 0);
  std::vector<std::size_t> mark(d.size(), 0);
  std::size_t stamp = 0;
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t seed : seeds) {
    if (covered[seed]) continue;
    ++stamp;
    std::vector<std::size_t> flake{seed};
    std::deque<std::pair<std::size_t, std::size_t>> frontier{{seed, 0}};
    mark[seed] = stamp;
    while (!frontier.empty() && flake.size() < cfg.budget) {
      auto [u, dist] = frontier.front();
      frontier.pop_front();
      if (dist == cfg.radius) continue;
      for (std::size_t v : adj[u]) {
        if (mark[v] == stamp) continue;
        mark[v] = stamp;
        flake.push_back(v);
        frontier.emplace_back(v, dist + 1);
        if (flake.size() == cfg.budget) break;
      }
    }
    for (auto e : flake) covered[e] = 1;
    batches.push_back(std::move(flake));
  }
  return batches;
}

}  // namespace

SamplingPolicy sampling_policy_from_string(const std::string& name) {
  if (name == "component") return SamplingPolicy::kComponent;
  if (name == "conditional-independence") return SamplingPolicy::kConditionalIndependence;
  if (name == "snowflake") return SamplingPolicy::kSnowflake;
  if (name == "entity") return SamplingPolicy::kEntity;
  throw std::invalid_argument("unknown sampling policy '" + name + "'");
}

std::string to_string(SamplingPolicy policy) {
  switch (policy) {
    case SamplingPolicy::kComponent:
      return "component";
    case SamplingPolicy::kConditionalIndependence:
      return "conditional-independence";
    case SamplingPolicy::kSnowflake:
      return "snowflake";
    case SamplingPolicy::kEntity:
      return "entity";
  }
  return "component";
}

std::vector<std::vector<std::size_t>> sample_epoch(const Dataset& dataset, const SamplingConfig& config,
                                                   std::uint64_t seed) {
  if (config.budget == 0) throw std::invalid_argument("batch budget must be positive");
  std::mt19937_64 rng(seed);
  switch (config.policy) {
    case SamplingPolicy::kComponent:
      return pack_groups(component_groups(dataset), config.budget, 0, rng);
    case SamplingPolicy::kConditionalIndependence:
      return conditional_independence(dataset, config, rng);
    case SamplingPolicy::kSnowflake:
      return snowflakes(dataset, config, rng);
    case SamplingPolicy::kEntity: {
      std::vector<std::size_t> order(dataset.size());
      std::iota(order.begin(), order.end(), 0);
      shuffle(order, rng);
      std::vector<std::vector<std::size_t>> batches;
      for (std::size_t i = 0; i < order.size(); i += config.budget) {
        const std::size_t end = std::min(order.size(), i + config.budget);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
      }
      return batches;
    }
  }
  return {};
}

std::vector<Batch> sample_batches(const Dataset& dataset, const SamplingConfig& config, std::uint64_t seed) {
  std::vector<Batch> out;
  for (auto& members : sample_epoch(dataset, config, seed)) out.push_back(make_batch(dataset, std::move(members)));
  return out;
}

}  // namespace ergae
