#include "ergae/dataset.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "ergae/json_io.hpp"
#include "ergae/validate.hpp"

namespace ergae {

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::uint8_t> rank_;
};

}  // namespace

std::vector<Json> load_entities(std::string_view text) {
  std::vector<Json> records;
  try {
    records = parse_relaxed_json_stream(text);
  } catch (const JsonParseError& e) {
    throw DatasetError("entity file line " + std::to_string(e.line()) + ": " + e.what());
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].is_object()) throw DatasetError("entity record " + std::to_string(i + 1) + " is not an object");
  }
  return records;
}

std::vector<PropertyCodec> build_codecs(const DomainSchema& schema, const std::vector<Json>& records,
                                        const std::set<std::string>& training_ids) {
  std::vector<std::vector<const Json*>> values(schema.properties.size());
  for (const auto& r : records) {
    auto id = r.find(kIdKey);
    if (!training_ids.empty() && (id == r.end() || !id->is_string() || !training_ids.count(id->get<std::string>()))) {
      continue;
    }
    for (auto it = r.begin(); it != r.end(); ++it) {
      if (it.key() == kIdKey || it.key() == kEntityTypeKey || it.value().is_null()) continue;
      if (schema.relationship(it.key())) continue;
      auto p = schema.property_index(it.key());
      if (!p) throw DatasetError("property '" + it.key() + "' is not in the schema");
      if (auto problem = check_property_value(schema.properties[*p].type, it.value())) {
        throw DatasetError(it.key() + ": " + *problem);
      }
      values[*p].push_back(&it.value());
    }
  }
  std::vector<PropertyCodec> codecs;
  for (std::size_t p = 0; p < schema.properties.size(); ++p) {
    codecs.push_back(PropertyCodec::fit(schema.properties[p], values[p]));
  }
  return codecs;
}

Dataset::Dataset(std::shared_ptr<const DomainSchema> schema, std::vector<PropertyCodec> codecs,
                 std::vector<Json> records, DatasetOptions options)
    : schema_(std::move(schema)), codecs_(std::move(codecs)), records_(std::move(records)) {
  const DomainSchema& s = *schema_;
  if (codecs_.size() != s.properties.size()) throw DatasetError("codec count does not match schema properties");
  for (std::size_t p = 0; p < codecs_.size(); ++p) {
    if (codecs_[p].property() != s.properties[p].name) {
      throw DatasetError("codec order does not match schema at property " + s.properties[p].name);
    }
  }
  ValidationReport report;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    report.merge(validate_entity(s, records_[i], "record " + std::to_string(i + 1)));
  }
  if (!report.ok()) {
    std::string msg = "invalid entities:";
    for (std::size_t i = 0; i < report.errors.size() && i < 10; ++i) {
      msg += "\n  " + report.errors[i].location + ": " + report.errors[i].message;
    }
    if (report.errors.size() > 10) msg += "\n  ... " + std::to_string(report.errors.size() - 10) + " more";
    throw DatasetError(msg);
  }

  const std::size_t n = records_.size();
  ids_.reserve(n);
  types_.reserve(n);
  values_.assign(n, std::vector<std::optional<PackedValue>>(s.properties.size()));
  for (std::size_t e = 0; e < n; ++e) {
    const Json& r = records_[e];
    ids_.push_back(r.at(kIdKey).get<std::string>());
    types_.push_back(*s.entity_type_index(r.at(kEntityTypeKey).get<std::string>()));
    if (!index_.emplace(ids_.back(), e).second) throw DatasetError("duplicate entity id '" + ids_.back() + "'");
    for (auto it = r.begin(); it != r.end(); ++it) {
      if (it.value().is_null()) continue;
      if (auto p = s.property_index(it.key())) {
        try {
          values_[e][*p] = codecs_[*p].pack(it.value());
        } catch (const CodecError& err) {
          throw DatasetError("entity " + ids_.back() + ": " + err.what());
        }
      }
    }
  }
  edges_.assign(s.relationships.size(), {});
  for (std::size_t e = 0; e < n; ++e) {
    const Json& r = records_[e];
    for (std::size_t rel = 0; rel < s.relationships.size(); ++rel) {
      auto it = r.find(s.relationships[rel].name);
      if (it == r.end() || it->is_null()) continue;
      const auto target_type = *s.entity_type_index(s.relationships[rel].target_entity_type);
      const auto targets = relationship_targets(*it);
      if (!targets) continue;
      for (const auto& target : *targets) {
        auto t = index_.find(target);
        if (t == index_.end()) {
          if (options.drop_dangling_edges) continue;
          throw DatasetError("entity " + ids_[e] + ": " + s.relationships[rel].name + " names unknown entity '" + target +
                             "'");
        }
        if (types_[t->second] != target_type) {
          throw DatasetError("entity " + ids_[e] + ": " + s.relationships[rel].name + " target '" + target +
                             "' is not a " + s.relationships[rel].target_entity_type);
        }
        edges_[rel].emplace_back(static_cast<std::uint32_t>(e), static_cast<std::uint32_t>(t->second));
      }
    }
  }
}

std::optional<std::size_t> Dataset::find(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const PackedValue* Dataset::value(std::size_t e, std::size_t p) const {
  const auto& v = values_[e][p];
  return v ? &*v : nullptr;
}

std::size_t Dataset::edge_count() const {
  std::size_t total = 0;
  for (const auto& l : edges_) total += l.size();
  return total;
}

std::vector<std::size_t> Dataset::entities_of_type(std::size_t type) const {
  std::vector<std::size_t> out;
  for (std::size_t e = 0; e < types_.size(); ++e) {
    if (types_[e] == type) out.push_back(e);
  }
  return out;
}

Dataset Dataset::subset(const std::vector<std::size_t>& entities) const {
  Dataset out;
  out.schema_ = schema_;
  out.codecs_ = codecs_;
  std::vector<std::int64_t> remap(size(), -1);
  for (std::size_t i = 0; i < entities.size(); ++i) {
    const std::size_t e = entities.at(i);
    if (remap[e] >= 0) throw DatasetError("subset lists entity " + ids_[e] + " twice");
    remap[e] = static_cast<std::int64_t>(i);
    out.ids_.push_back(ids_[e]);
    out.types_.push_back(types_[e]);
    out.index_.emplace(ids_[e], i);
    out.records_.push_back(records_[e]);
    out.values_.push_back(values_[e]);
  }
  out.edges_.assign(edges_.size(), {});
  for (std::size_t r = 0; r < edges_.size(); ++r) {
    for (const auto& [a, b] : edges_[r]) {
      if (remap[a] >= 0 && remap[b] >= 0) {
        out.edges_[r].emplace_back(static_cast<std::uint32_t>(remap[a]), static_cast<std::uint32_t>(remap[b]));
      }
    }
  }
  return out;
}

std::vector<Component> connected_components(const Dataset& dataset) {
  UnionFind uf(dataset.size());
  for (const auto& list : dataset.edges()) {
    for (const auto& [a, b] : list) uf.unite(a, b);
  }
  std::vector<std::int64_t> slot(dataset.size(), -1);
  std::vector<Component> out;
  for (std::size_t e = 0; e < dataset.size(); ++e) {
    const std::size_t root = uf.find(e);
    if (slot[root] < 0) {
      slot[root] = static_cast<std::int64_t>(out.size());
      out.emplace_back();
    }
    out[static_cast<std::size_t>(slot[root])].entities.push_back(e);
  }
  return out;
}

Batch make_batch(const Dataset& dataset, std::vector<std::size_t> entities) {
  Batch b;
  b.entities = std::move(entities);
  std::unordered_map<std::size_t, std::uint32_t> local;
  local.reserve(b.entities.size() * 2);
  for (std::size_t i = 0; i < b.entities.size(); ++i) {
    if (!local.emplace(b.entities[i], static_cast<std::uint32_t>(i)).second) {
      throw DatasetError("batch lists entity " + dataset.id(b.entities[i]) + " twice");
    }
  }
  b.edges.assign(dataset.edges().size(), {});
  for (std::size_t r = 0; r < dataset.edges().size(); ++r) {
    for (const auto& [s, t] : dataset.edges()[r]) {
      auto is = local.find(s);
      if (is == local.end()) continue;
      auto it = local.find(t);
      if (it == local.end()) continue;
      b.edges[r].emplace_back(is->second, it->second);
    }
  }
  b.truth_edges = b.edges;
  const std::size_t np = dataset.schema().properties.size();
  b.hidden.assign(b.entities.size(), std::vector<std::uint8_t>(np, 0));
  b.excluded.assign(b.entities.size(), std::vector<std::uint8_t>(np, 0));
  return b;
}

void MaskSpec::check() const {
  auto ok = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!ok(property_rate) || !ok(entity_rate) || !ok(relationship_rate)) {
    throw std::invalid_argument("mask rates must lie in [0, 1]");
  }
  for (const auto& [name, r] : property_rates) {
    if (!ok(r)) throw std::invalid_argument("mask rate for " + name + " must lie in [0, 1]");
  }
}

Batch apply_mask(const Dataset& dataset, Batch batch, const MaskSpec& spec) {
  spec.check();
  const DomainSchema& schema = dataset.schema();
  for (const auto& name : spec.always_mask) {
    if (!schema.property(name)) throw std::invalid_argument("cannot mask unknown property '" + name + "'");
  }
  std::vector<double> rates(schema.properties.size(), spec.property_rate);
  std::vector<std::uint8_t> always(schema.properties.size(), 0);
  for (std::size_t p = 0; p < schema.properties.size(); ++p) {
    auto it = spec.property_rates.find(schema.properties[p].name);
    if (it != spec.property_rates.end()) rates[p] = it->second;
    always[p] = spec.always_mask.count(schema.properties[p].name) ? 1 : 0;
  }
  std::mt19937_64 rng(spec.seed);
  for (std::size_t i = 0; i < batch.entities.size(); ++i) {
    const std::size_t e = batch.entities[i];
    const bool drop_entity = uniform01(rng) < spec.entity_rate;
    for (std::size_t p = 0; p < rates.size(); ++p) {
      const bool drop_property = uniform01(rng) < rates[p];
      if (!dataset.value(e, p)) continue;
      if (always[p]) {
        batch.hidden[i][p] = 1;
        batch.excluded[i][p] = 1;
      } else if (drop_entity || drop_property) {
        batch.hidden[i][p] = 1;
      }
    }
  }
  if (spec.relationship_rate > 0.0) {
    for (auto& list : batch.edges) {
      EdgeList kept;
      for (const auto& edge : list) {
        if (uniform01(rng) >= spec.relationship_rate) kept.push_back(edge);
      }
      list = std::move(kept);
    }
  }
  return batch;
}

}  // namespace ergae
