#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ergae/dataset.hpp"
#include "ergae/graph_model.hpp"

namespace ergae {

struct BottleneckRow {
  std::string id;
  std::string type;
  std::vector<double> values;
};

struct BottleneckTable {
  std::size_t depth = 0;
  std::size_t size = 0;  // bottleneck width
  std::vector<BottleneckRow> rows;  // dataset order

  const BottleneckRow* find(const std::string& id) const;

  /// Line-delimited: a {"depth","size","count"} header, then one
  /// {"id","type","values"} object per entity.
  void write_jsonl(std::ostream& out) const;
  static BottleneckTable read_jsonl(std::string_view text);
};

/// Evaluation-mode bottlenecks of every entity at `depth` (defaults to the
/// model depth), computed over whole-component batches.
BottleneckTable export_bottlenecks(const GraphModel& model, const Dataset& dataset,
                                   std::optional<std::size_t> depth = std::nullopt);

struct SimilarPair {
  std::string first;   // first < second
  std::string second;
  double similarity = 0.0;

  friend bool operator==(const SimilarPair&, const SimilarPair&) = default;
};

enum class SearchMode { kAuto, kExact, kApproximate };

struct PairSearchOptions {
  std::optional<std::string> type;  // keep only entities of this type
  SearchMode mode = SearchMode::kAuto;
  std::size_t exact_limit = 50000;  // kAuto switches to approximate above this many entities
  std::size_t hash_bits = 12;
  std::size_t hash_tables = 8;
  std::uint64_t seed = 0;
};

struct PairSearchResult {
  std::vector<SimilarPair> pairs;  // descending similarity, ties by (first, second)
  bool approximate = false;
  std::vector<std::string> warnings;
};

/// Cosine similarity; 0 when either vector has zero norm.
double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

/// Top-k unordered pairs by cosine similarity. Zero-norm vectors are dropped
/// with a warning. Approximate mode compares only pairs that share a
/// random-hyperplane hash bucket in at least one table.
PairSearchResult nearest_pairs(const BottleneckTable& table, std::size_t k, const PairSearchOptions& options = {});

/// Top-k pairs that contain `id`, among entities of the same type.
PairSearchResult nearest_to(const BottleneckTable& table, const std::string& id, std::size_t k);

}  // namespace ergae
