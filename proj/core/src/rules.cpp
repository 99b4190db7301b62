#include "ergae/rules.hpp"

#include "default_rules_data.hpp"

namespace ergae {

namespace {

ConfigRule rule_from_pair(const Json& pair, std::size_t index) {
  const std::string where = "rules[" + std::to_string(index) + "]";
  if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() || !pair[1].is_object()) {
    ValidationReport r;
    r.error(where, "rule must be a [pattern, {values}] pair");
    throw SchemaError(r);
  }
  try {
    return ConfigRule{JsonPath::parse(pair[0].get<std::string>()), pair[1]};
  } catch (const JsonPathError& e) {
    ValidationReport r;
    r.error(where, e.what());
    throw SchemaError(r);
  }
}

// Maps a match in the schema document onto the schema element that owns a meta field.
Json* meta_slot(DomainSchema& schema, const Location& loc) {
  if (loc.steps.empty()) return &schema.meta;
  if (loc.steps.size() != 2) return nullptr;
  const auto* section = std::get_if<std::string>(&loc.steps[0]);
  const auto* name = std::get_if<std::string>(&loc.steps[1]);
  if (!section || !name) return nullptr;
  if (*section == "properties") {
    if (auto i = schema.property_index(*name)) return &schema.properties[*i].meta;
  } else if (*section == "entity_types") {
    if (auto i = schema.entity_type_index(*name)) return &schema.entity_types[*i].meta;
  } else if (*section == "relationships") {
    if (auto i = schema.relationship_index(*name)) return &schema.relationships[*i].meta;
  }
  return nullptr;
}

void apply_one(DomainSchema& schema, const ConfigRule& rule, bool warn_unmatched, ValidationReport& report) {
  // Matching runs against the document as it stands after all earlier rules.
  const Json doc = schema_to_json(schema);
  auto matches = rule.pattern.select(doc);
  if (matches.empty() && warn_unmatched) {
    report.warn(rule.pattern.pattern(), "rule matched no locations");
  }
  for (const auto& loc : matches) {
    Json* meta = meta_slot(schema, loc);
    if (!meta) {
      report.warn(loc.to_string(), "matched location cannot carry meta; rule " + rule.pattern.pattern() + " skipped");
      continue;
    }
    for (auto it = rule.values.begin(); it != rule.values.end(); ++it) (*meta)[it.key()] = it.value();
  }
}

}  // namespace

std::vector<ConfigRule> rules_from_json(const Json& doc) {
  std::vector<ConfigRule> rules;
  if (doc.is_array() && doc.size() == 2 && doc[0].is_string()) {
    rules.push_back(rule_from_pair(doc, 0));
    return rules;
  }
  if (!doc.is_array()) {
    ValidationReport r;
    r.error("rules", "rules file must be a rule pair or a list of rule pairs");
    throw SchemaError(r);
  }
  for (std::size_t i = 0; i < doc.size(); ++i) rules.push_back(rule_from_pair(doc[i], i));
  return rules;
}

std::vector<ConfigRule> parse_rules(std::string_view text) {
  std::vector<Json> docs;
  try {
    docs = parse_relaxed_json_stream(text);
  } catch (const JsonParseError& e) {
    ValidationReport r;
    r.error("line " + std::to_string(e.line()), e.what());
    throw SchemaError(r);
  }
  std::vector<ConfigRule> out;
  for (const auto& d : docs) {
    auto part = rules_from_json(d);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

const std::vector<ConfigRule>& default_rules() {
  static const std::vector<ConfigRule> rules = parse_rules(kDefaultRulesJson);
  return rules;
}

DomainSchema apply_rules(const DomainSchema& schema, const std::vector<ConfigRule>& rules, ValidationReport* report,
                         RuleOptions options) {
  ValidationReport local;
  DomainSchema out = schema;
  if (options.include_defaults) {
    for (const auto& r : default_rules()) apply_one(out, r, false, local);
  }
  for (const auto& r : rules) apply_one(out, r, true, local);
  if (report) report->merge(local);
  return out;
}

}  // namespace ergae
