#include "ergae/validate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

namespace ergae {

std::optional<long long> parse_iso_date(const std::string& text) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  if (text.size() < 8 || std::sscanf(text.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3) return std::nullopt;
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return std::chrono::sys_days(ymd).time_since_epoch().count();
}

std::string format_iso_date(long long days) {
  std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

std::optional<std::string> check_property_value(PropertyType type, const Json& v) {
  auto finite_number = [](const Json& x) { return x.is_number() && std::isfinite(x.get<double>()); };
  switch (type) {
    case PropertyType::kScalar:
      if (!finite_number(v)) return "expected a finite number";
      return std::nullopt;
    case PropertyType::kCategorical:
      if (!(v.is_string() || v.is_number() || v.is_boolean())) return "expected a string, number or boolean";
      return std::nullopt;
    case PropertyType::kText:
      if (!v.is_string()) return "expected a string";
      return std::nullopt;
    case PropertyType::kImage:
      if (!v.is_string()) return "expected a URL or file name";
      return std::nullopt;
    case PropertyType::kDate:
      if (!v.is_string() || !parse_iso_date(v.get<std::string>())) return "expected an ISO date YYYY-MM-DD";
      return std::nullopt;
    case PropertyType::kPlace: {
      if (!v.is_object()) return "expected an object with latitude and longitude";
      auto lat = v.find("latitude");
      auto lon = v.find("longitude");
      if (lat == v.end() || !finite_number(*lat)) return "place is missing a numeric latitude";
      if (lon == v.end() || !finite_number(*lon)) return "place is missing a numeric longitude";
      if (std::abs(lat->get<double>()) > 90.0) return "latitude outside [-90, 90]";
      if (std::abs(lon->get<double>()) > 180.0) return "longitude outside [-180, 180]";
      return std::nullopt;
    }
    case PropertyType::kDistribution: {
      if (!v.is_array() || v.empty()) return "expected a non-empty array of numbers";
      bool any_negative = false;
      bool any_positive = false;
      for (const auto& x : v) {
        if (!finite_number(x)) return "distribution entries must be finite numbers";
        double d = x.get<double>();
        any_negative = any_negative || d < 0.0;
        any_positive = any_positive || d > 0.0;
      }
      // Non-negative entries are probabilities; otherwise every entry is a log-probability.
      if (!any_negative && !any_positive) return "probabilities sum to zero";
      if (any_negative) {
        for (const auto& x : v) {
          if (x.get<double>() > 0.0) return "mixes probabilities and log-probabilities";
        }
      }
      return std::nullopt;
    }
  }
  return "unknown property type";
}

std::optional<std::vector<std::string>> relationship_targets(const Json& v) {
  std::vector<std::string> out;
  if (v.is_string()) {
    out.push_back(v.get<std::string>());
    return out;
  }
  if (!v.is_array()) return std::nullopt;
  for (const auto& x : v) {
    if (!x.is_string()) return std::nullopt;
    out.push_back(x.get<std::string>());
  }
  return out;
}

ValidationReport validate_entity(const DomainSchema& schema, const Json& entity, const std::string& where) {
  ValidationReport report;
  const std::string base = where.empty() ? "entity" : where;
  if (!entity.is_object()) {
    report.error(base, "entity must be an object");
    return report;
  }
  auto id = entity.find(kIdKey);
  std::string label = base;
  if (id == entity.end() || !id->is_string() || id->get<std::string>().empty()) {
    report.error(base + ".id", "missing or empty id");
  } else {
    label = where.empty() ? id->get<std::string>() : where;
  }
  auto type = entity.find(kEntityTypeKey);
  if (type == entity.end() || !type->is_string()) {
    report.error(label + ".entity_type", "missing entity_type");
    return report;
  }
  const EntityTypeDef* et = schema.entity_type(type->get<std::string>());
  if (!et) {
    report.error(label + ".entity_type", "unknown entity-type '" + type->get<std::string>() + "'");
    return report;
  }
  for (auto it = entity.begin(); it != entity.end(); ++it) {
    const std::string& key = it.key();
    if (key == kIdKey || key == kEntityTypeKey || (!key.empty() && key[0] == '@')) continue;
    const std::string loc = label + "." + key;
    if (const RelationshipDef* rel = schema.relationship(key)) {
      if (rel->source_entity_type != et->name) {
        report.error(loc, "relationship '" + key + "' does not start at entity-type " + et->name);
      } else if (!relationship_targets(it.value())) {
        report.error(loc, "relationship value must be an id or a list of ids");
      }
      continue;
    }
    if (std::find(et->properties.begin(), et->properties.end(), key) == et->properties.end()) {
      report.error(loc, "unknown property for entity-type " + et->name);
      continue;
    }
    if (it.value().is_null()) continue;  // explicit null = missing
    const PropertyDef* def = schema.property(key);
    if (auto problem = check_property_value(def->type, it.value())) {
      report.error(loc, *problem);
    } else if (def->type == PropertyType::kDistribution && def->meta.contains("dimension") &&
               def->meta["dimension"].is_number_integer() &&
               it.value().size() != def->meta["dimension"].get<std::size_t>()) {
      report.error(loc, "distribution must have " + def->meta["dimension"].dump() + " entries");
    }
  }
  return report;
}

}  // namespace ergae
