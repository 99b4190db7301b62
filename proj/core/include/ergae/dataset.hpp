#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ergae/codec.hpp"
#include "ergae/schema.hpp"

namespace ergae {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Edge = std::pair<std::uint32_t, std::uint32_t>;
using EdgeList = std::vector<Edge>;

/// Reads an entity file: JSON Lines or whitespace-separated records.
std::vector<Json> load_entities(std::string_view text);

/// Vocabularies and statistics from the records whose ids are in `training_ids`
/// (all records when empty). One codec per schema property, in schema order.
std::vector<PropertyCodec> build_codecs(const DomainSchema& schema, const std::vector<Json>& records,
                                        const std::set<std::string>& training_ids = {});

struct DatasetOptions {
  /// Drop relationship targets that name no record instead of failing.
  bool drop_dangling_edges = false;
};

/// Packed, immutable view of a set of entity records.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::shared_ptr<const DomainSchema> schema, std::vector<PropertyCodec> codecs, std::vector<Json> records,
          DatasetOptions options = {});

  const DomainSchema& schema() const { return *schema_; }
  std::shared_ptr<const DomainSchema> schema_ptr() const { return schema_; }
  const std::vector<PropertyCodec>& codecs() const { return codecs_; }

  std::size_t size() const { return ids_.size(); }
  const std::string& id(std::size_t e) const { return ids_[e]; }
  std::size_t entity_type(std::size_t e) const { return types_[e]; }
  std::optional<std::size_t> find(const std::string& id) const;
  const Json& record(std::size_t e) const { return records_[e]; }
  const std::vector<Json>& records() const { return records_; }

  /// Packed value of schema property `p` for entity `e`, or nullptr if absent.
  const PackedValue* value(std::size_t e, std::size_t p) const;

  /// Per relationship (schema order): (source, target) entity indices.
  const std::vector<EdgeList>& edges() const { return edges_; }
  std::size_t edge_count() const;

  /// Restriction to a subset of entities; edges leaving the subset are dropped.
  Dataset subset(const std::vector<std::size_t>& entities) const;

  /// Indices of entities of one entity-type.
  std::vector<std::size_t> entities_of_type(std::size_t type) const;

 private:
  std::shared_ptr<const DomainSchema> schema_;
  std::vector<PropertyCodec> codecs_;
  std::vector<std::string> ids_;
  std::vector<std::size_t> types_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<Json> records_;
  std::vector<std::vector<std::optional<PackedValue>>> values_;
  std::vector<EdgeList> edges_;
};

/// Connected set of entities under all relationships taken as undirected.
struct Component {
  std::vector<std::size_t> entities;  // ascending
};

std::vector<Component> connected_components(const Dataset& dataset);

/// Unit of training or inference: a subset of entities with local adjacency
/// and per-(entity, property) visibility flags.
struct Batch {
  std::vector<std::size_t> entities;  // dataset indices; local index = position
  std::vector<EdgeList> edges;        // local adjacency seen by the forward pass
  std::vector<EdgeList> truth_edges;  // ground-truth local adjacency
  // [local entity][property]: 1 = value withheld from the encoder.
  std::vector<std::vector<std::uint8_t>> hidden;
  // [local entity][property]: 1 = value not used as a reconstruction target.
  std::vector<std::vector<std::uint8_t>> excluded;

  std::size_t size() const { return entities.size(); }
};

/// Builds a batch over `entities` with all present values visible.
Batch make_batch(const Dataset& dataset, std::vector<std::size_t> entities);

struct MaskSpec {
  std::map<std::string, double> property_rates;  // per-property input dropout
  double property_rate = 0.0;                    // default for properties not listed
  double entity_rate = 0.0;
  double relationship_rate = 0.0;
  std::set<std::string> always_mask;
  std::uint64_t seed = 0;

  void check() const;
};

/// Always-masked properties are withheld from the encoder and from the loss.
/// Random property/entity dropout withholds inputs only, so those values stay
/// reconstruction targets. Relationship dropout removes forward-pass edges.
Batch apply_mask(const Dataset& dataset, Batch batch, const MaskSpec& spec);

}  // namespace ergae
