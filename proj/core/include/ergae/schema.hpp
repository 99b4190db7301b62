#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ergae/json_io.hpp"

namespace ergae {

enum class PropertyType { kScalar, kCategorical, kText, kDistribution, kDate, kPlace, kImage };

std::string_view to_string(PropertyType type);
std::optional<PropertyType> property_type_from_string(std::string_view name);

struct Diagnostic {
  std::string location;
  std::string message;
};

struct ValidationReport {
  std::vector<Diagnostic> errors;
  std::vector<Diagnostic> warnings;

  bool ok() const { return errors.empty(); }
  void error(std::string location, std::string message) {
    errors.push_back({std::move(location), std::move(message)});
  }
  void warn(std::string location, std::string message) {
    warnings.push_back({std::move(location), std::move(message)});
  }
  void merge(const ValidationReport& other);
  Json to_json() const;
};

class SchemaError : public std::runtime_error {
 public:
  explicit SchemaError(ValidationReport report);
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

struct PropertyDef {
  std::string name;
  PropertyType type = PropertyType::kScalar;
  Json meta = Json::object();

  friend bool operator==(const PropertyDef&, const PropertyDef&) = default;
};

struct RelationshipDef {
  std::string name;
  std::string source_entity_type;
  std::string target_entity_type;
  Json meta = Json::object();

  friend bool operator==(const RelationshipDef&, const RelationshipDef&) = default;
};

struct EntityTypeDef {
  std::string name;
  std::vector<std::string> properties;
  Json meta = Json::object();

  friend bool operator==(const EntityTypeDef&, const EntityTypeDef&) = default;
};

/// Entity-relationship description of a domain. Declaration order is kept.
struct DomainSchema {
  Json context;  // raw "@context" value, null when absent
  std::vector<EntityTypeDef> entity_types;
  std::vector<PropertyDef> properties;
  std::vector<RelationshipDef> relationships;
  Json meta = Json::object();

  const EntityTypeDef* entity_type(std::string_view name) const;
  const PropertyDef* property(std::string_view name) const;
  const RelationshipDef* relationship(std::string_view name) const;
  std::optional<std::size_t> entity_type_index(std::string_view name) const;
  std::optional<std::size_t> property_index(std::string_view name) const;
  std::optional<std::size_t> relationship_index(std::string_view name) const;

  friend bool operator==(const DomainSchema&, const DomainSchema&) = default;
};

/// Parses and checks a schema document. Problems that do not prevent use
/// (image properties, empty entity-types) are appended to `warnings` if given.
DomainSchema parse_schema(std::string_view text, ValidationReport* warnings = nullptr);
DomainSchema schema_from_json(const Json& document, ValidationReport* warnings = nullptr);

/// Canonical document form; parse_schema(serialize) reproduces the schema.
Json schema_to_json(const DomainSchema& schema);
std::string serialize_schema(const DomainSchema& schema);

/// Structural checks (dangling references, duplicate names) on an in-memory schema.
ValidationReport check_schema(const DomainSchema& schema);

}  // namespace ergae
