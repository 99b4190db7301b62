#include "ergae/schema.hpp"

#include <algorithm>
#include <array>
#include <set>

namespace ergae {

namespace {

constexpr std::array<std::pair<PropertyType, std::string_view>, 7> kTypeNames{{
    {PropertyType::kScalar, "scalar"},
    {PropertyType::kCategorical, "categorical"},
    {PropertyType::kText, "text"},
    {PropertyType::kDistribution, "distribution"},
    {PropertyType::kDate, "date"},
    {PropertyType::kPlace, "place"},
    {PropertyType::kImage, "image"},
}};

template <typename T>
std::optional<std::size_t> index_by_name(const std::vector<T>& items, std::string_view name) {
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].name == name) return i;
  }
  return std::nullopt;
}

Json read_meta(const Json& node, const std::string& where, ValidationReport& report) {
  auto it = node.find("meta");
  if (it == node.end()) return Json::object();
  if (!it->is_object()) {
    report.error(where + ".meta", "meta must be an object");
    return Json::object();
  }
  return *it;
}

}  // namespace

std::string_view to_string(PropertyType type) {
  for (const auto& [t, n] : kTypeNames) {
    if (t == type) return n;
  }
  return "unknown";
}

std::optional<PropertyType> property_type_from_string(std::string_view name) {
  for (const auto& [t, n] : kTypeNames) {
    if (n == name) return t;
  }
  return std::nullopt;
}

void ValidationReport::merge(const ValidationReport& other) {
  errors.insert(errors.end(), other.errors.begin(), other.errors.end());
  warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
}

Json ValidationReport::to_json() const {
  auto list = [](const std::vector<Diagnostic>& ds) {
    Json out = Json::array();
    for (const auto& d : ds) out.push_back({{"location", d.location}, {"message", d.message}});
    return out;
  };
  return Json{{"ok", ok()}, {"errors", list(errors)}, {"warnings", list(warnings)}};
}

SchemaError::SchemaError(ValidationReport report)
    : std::runtime_error([&] {
        std::string msg = "invalid schema";
        for (const auto& e : report.errors) msg += "\n  " + e.location + ": " + e.message;
        return msg;
      }()),
      report_(std::move(report)) {}

const EntityTypeDef* DomainSchema::entity_type(std::string_view name) const {
  auto i = entity_type_index(name);
  return i ? &entity_types[*i] : nullptr;
}
const PropertyDef* DomainSchema::property(std::string_view name) const {
  auto i = property_index(name);
  return i ? &properties[*i] : nullptr;
}
const RelationshipDef* DomainSchema::relationship(std::string_view name) const {
  auto i = relationship_index(name);
  return i ? &relationships[*i] : nullptr;
}
std::optional<std::size_t> DomainSchema::entity_type_index(std::string_view name) const {
  return index_by_name(entity_types, name);
}
std::optional<std::size_t> DomainSchema::property_index(std::string_view name) const {
  return index_by_name(properties, name);
}
std::optional<std::size_t> DomainSchema::relationship_index(std::string_view name) const {
  return index_by_name(relationships, name);
}

DomainSchema schema_from_json(const Json& doc, ValidationReport* warnings) {
  ValidationReport report;
  DomainSchema schema;
  if (!doc.is_object()) {
    report.error("$", "schema must be an object");
    throw SchemaError(report);
  }
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const std::string& key = it.key();
    if (key != "@context" && key != "entity_types" && key != "properties" && key != "relationships" &&
        key != "meta") {
      report.warn(key, "unrecognized top-level key ignored");
    }
  }
  if (auto it = doc.find("@context"); it != doc.end()) schema.context = *it;
  schema.meta = read_meta(doc, "$", report);

  auto section = [&](const char* name) -> const Json* {
    auto it = doc.find(name);
    if (it == doc.end()) {
      report.error(name, "missing section");
      return nullptr;
    }
    if (!it->is_object()) {
      report.error(name, "section must be an object");
      return nullptr;
    }
    return &*it;
  };

  if (const Json* props = section("properties")) {
    for (auto it = props->begin(); it != props->end(); ++it) {
      const std::string where = "properties." + it.key();
      const Json& node = it.value();
      if (!node.is_object()) {
        report.error(where, "property definition must be an object");
        continue;
      }
      PropertyDef def;
      def.name = it.key();
      auto t = node.find("type");
      if (t == node.end() || !t->is_string()) {
        report.error(where, "missing property type");
        continue;
      }
      auto type = property_type_from_string(t->get<std::string>());
      if (!type) {
        report.error(where + ".type", "unknown property type '" + t->get<std::string>() + "'");
        continue;
      }
      def.type = *type;
      def.meta = read_meta(node, where, report);
      for (auto k = node.begin(); k != node.end(); ++k) {
        if (k.key() != "type" && k.key() != "meta") report.warn(where + "." + k.key(), "unrecognized key ignored");
      }
      if (def.type == PropertyType::kImage) {
        report.warn(where, "image properties are not modeled; defaulting to null encoder and decoder");
      }
      schema.properties.push_back(std::move(def));
    }
  }

  if (const Json* types = section("entity_types")) {
    for (auto it = types->begin(); it != types->end(); ++it) {
      const std::string where = "entity_types." + it.key();
      EntityTypeDef def;
      def.name = it.key();
      const Json* list = &it.value();
      if (it.value().is_object()) {
        auto p = it.value().find("properties");
        if (p == it.value().end()) {
          report.error(where, "entity-type object needs a properties list");
          continue;
        }
        list = &*p;
        def.meta = read_meta(it.value(), where, report);
      }
      if (!list->is_array()) {
        report.error(where, "entity-type must list its property names");
        continue;
      }
      std::set<std::string> seen;
      for (const auto& p : *list) {
        if (!p.is_string()) {
          report.error(where, "property names must be strings");
          continue;
        }
        const auto name = p.get<std::string>();
        if (!seen.insert(name).second) report.error(where, "duplicate property '" + name + "'");
        def.properties.push_back(name);
      }
      schema.entity_types.push_back(std::move(def));
    }
  }

  if (const Json* rels = section("relationships")) {
    for (auto it = rels->begin(); it != rels->end(); ++it) {
      const std::string where = "relationships." + it.key();
      const Json& node = it.value();
      if (!node.is_object()) {
        report.error(where, "relationship definition must be an object");
        continue;
      }
      RelationshipDef def;
      def.name = it.key();
      auto s = node.find("source_entity_type");
      auto t = node.find("target_entity_type");
      if (s == node.end() || !s->is_string() || t == node.end() || !t->is_string()) {
        report.error(where, "relationship needs source_entity_type and target_entity_type");
        continue;
      }
      def.source_entity_type = s->get<std::string>();
      def.target_entity_type = t->get<std::string>();
      def.meta = read_meta(node, where, report);
      schema.relationships.push_back(std::move(def));
    }
  }

  report.merge(check_schema(schema));
  if (!report.ok()) throw SchemaError(report);
  if (warnings) warnings->merge(report);
  return schema;
}

DomainSchema parse_schema(std::string_view text, ValidationReport* warnings) {
  Json doc;
  try {
    doc = parse_relaxed_json(text);
  } catch (const JsonParseError& e) {
    ValidationReport r;
    r.error("line " + std::to_string(e.line()), e.what());
    throw SchemaError(r);
  }
  return schema_from_json(doc, warnings);
}

ValidationReport check_schema(const DomainSchema& schema) {
  ValidationReport report;
  auto unique = [&](const auto& items, const char* section) {
    std::set<std::string> seen;
    for (const auto& item : items) {
      if (!seen.insert(item.name).second) report.error(std::string(section) + "." + item.name, "duplicate name");
    }
  };
  unique(schema.entity_types, "entity_types");
  unique(schema.properties, "properties");
  unique(schema.relationships, "relationships");

  for (const auto& et : schema.entity_types) {
    for (const auto& p : et.properties) {
      if (!schema.property(p)) report.error("entity_types." + et.name, "undefined property '" + p + "'");
    }
  }
  for (const auto& r : schema.relationships) {
    const std::string where = "relationships." + r.name;
    const EntityTypeDef* src = schema.entity_type(r.source_entity_type);
    if (!src) report.error(where, "undefined source entity-type '" + r.source_entity_type + "'");
    if (!schema.entity_type(r.target_entity_type)) {
      report.error(where, "undefined target entity-type '" + r.target_entity_type + "'");
    }
    if (src && std::find(src->properties.begin(), src->properties.end(), r.name) != src->properties.end()) {
      report.error(where, "name collides with a property of entity-type '" + src->name + "'");
    }
    if (r.name == "id" || r.name == "entity_type") report.error(where, "reserved name");
  }
  for (const auto& p : schema.properties) {
    if (p.name == "id" || p.name == "entity_type") report.error("properties." + p.name, "reserved name");
  }
  return report;
}

Json schema_to_json(const DomainSchema& schema) {
  Json doc = Json::object();
  if (!schema.context.is_null()) doc["@context"] = schema.context;
  if (!schema.meta.empty()) doc["meta"] = schema.meta;
  Json types = Json::object();
  for (const auto& et : schema.entity_types) {
    Json props = Json::array();
    for (const auto& p : et.properties) props.push_back(p);
    if (et.meta.empty()) {
      types[et.name] = std::move(props);
    } else {
      types[et.name] = Json{{"properties", std::move(props)}, {"meta", et.meta}};
    }
  }
  doc["entity_types"] = std::move(types);
  Json props = Json::object();
  for (const auto& p : schema.properties) {
    Json node{{"type", std::string(to_string(p.type))}};
    if (!p.meta.empty()) node["meta"] = p.meta;
    props[p.name] = std::move(node);
  }
  doc["properties"] = std::move(props);
  Json rels = Json::object();
  for (const auto& r : schema.relationships) {
    Json node{{"source_entity_type", r.source_entity_type}, {"target_entity_type", r.target_entity_type}};
    if (!r.meta.empty()) node["meta"] = r.meta;
    rels[r.name] = std::move(node);
  }
  doc["relationships"] = std::move(rels);
  return doc;
}

std::string serialize_schema(const DomainSchema& schema) { return schema_to_json(schema).dump(2); }

}  // namespace ergae
