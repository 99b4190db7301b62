#pragma once

// A small JSONPath subset: `$`, dotted or bracketed child names, `*` and
// string-equality filters `[?(@.field=='literal')]`. Anything else is a parse
// error naming the offending token.

#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ergae/json_io.hpp"

namespace ergae {

class JsonPathError : public std::runtime_error {
 public:
  JsonPathError(const std::string& message, std::string token)
      : std::runtime_error(message), token_(std::move(token)) {}
  const std::string& token() const { return token_; }

 private:
  std::string token_;
};

/// Path from the document root: object keys or array positions.
struct Location {
  std::vector<std::variant<std::string, std::size_t>> steps;

  /// "$" followed by ".key" per object step and "[i]" per array step.
  std::string to_string() const;
  friend bool operator==(const Location&, const Location&) = default;
};

class JsonPath {
 public:
  struct Step {
    enum class Kind { kChild, kWildcard, kFilter };
    Kind kind = Kind::kChild;
    std::string name;                 // kChild
    std::vector<std::string> field;   // kFilter: @.a.b
    std::string literal;              // kFilter
  };

  static JsonPath parse(std::string_view pattern);

  /// All matching locations in document order.
  std::vector<Location> select(const Json& document) const;

  const std::string& pattern() const { return pattern_; }
  const std::vector<Step>& steps() const { return steps_; }

 private:
  std::string pattern_;
  std::vector<Step> steps_;
};

inline std::vector<Location> jsonpath_select(const Json& document, std::string_view pattern) {
  return JsonPath::parse(pattern).select(document);
}

/// Node at a location; nullptr if the location does not exist.
const Json* resolve(const Json& document, const Location& location);

}  // namespace ergae
