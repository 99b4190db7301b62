#pragma once

#include <optional>
#include <string>

#include "ergae/schema.hpp"

namespace ergae {

/// Keys every entity record carries besides its properties and relationships.
inline constexpr const char* kEntityTypeKey = "entity_type";
inline constexpr const char* kIdKey = "id";

/// Why a human-form value does not fit a property type; nullopt if it fits.
/// The dataset codecs run the same check before packing.
std::optional<std::string> check_property_value(PropertyType type, const Json& value);

/// Days since 1970-01-01 for an ISO "YYYY-MM-DD" string.
std::optional<long long> parse_iso_date(const std::string& text);
std::string format_iso_date(long long days);

/// Relationship targets of a record value: an id string or a list of them.
std::optional<std::vector<std::string>> relationship_targets(const Json& value);

/// Checks one raw record against the schema. Never throws.
ValidationReport validate_entity(const DomainSchema& schema, const Json& entity, const std::string& where = "");

}  // namespace ergae
