#pragma once

#include <string_view>
#include <vector>

#include "ergae/jsonpath.hpp"
#include "ergae/schema.hpp"

namespace ergae {

/// A JSONPath pattern over the schema document plus the values written into
/// the "meta" field of every match.
struct ConfigRule {
  JsonPath pattern;
  Json values = Json::object();
};

/// Accepts a single [pattern, values] pair or an ordered list of them.
std::vector<ConfigRule> parse_rules(std::string_view text);
std::vector<ConfigRule> rules_from_json(const Json& document);

/// Per-type encoder/decoder/loss defaults, applied ahead of user rules.
const std::vector<ConfigRule>& default_rules();

struct RuleOptions {
  bool include_defaults = true;
};

/// Applies rules in order; each match's meta gains the rule's values,
/// overwriting existing keys. Rules that match nothing produce a warning.
DomainSchema apply_rules(const DomainSchema& schema, const std::vector<ConfigRule>& rules,
                         ValidationReport* report = nullptr, RuleOptions options = {});

}  // namespace ergae
