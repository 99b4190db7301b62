#include "ergae/jsonpath.hpp"

#include <cctype>

namespace ergae {

std::string Location::to_string() const {
  std::string out = "$";
  for (const auto& s : steps) {
    if (const auto* key = std::get_if<std::string>(&s)) {
      out += '.';
      out += *key;
    } else {
      out += '[' + std::to_string(std::get<std::size_t>(s)) + ']';
    }
  }
  return out;
}

namespace {

bool name_char(char c) {
  return !(c == '.' || c == '[' || c == ']' || c == '(' || c == ')' || c == '\'' || c == '"' || c == '=' ||
           c == '*' || c == '?' || c == '$' || std::isspace(static_cast<unsigned char>(c)));
}

class PatternParser {
 public:
  explicit PatternParser(std::string_view p) : p_(p) {}

  std::vector<JsonPath::Step> run() {
    std::vector<JsonPath::Step> steps;
    if (p_.empty() || p_[0] != '$') fail("pattern must start with '$'", token_at(0));
    pos_ = 1;
    while (pos_ < p_.size()) {
      const char c = p_[pos_];
      if (c == '.') {
        ++pos_;
        if (pos_ < p_.size() && p_[pos_] == '.') fail("recursive descent is not supported", "..");
        if (pos_ < p_.size() && p_[pos_] == '*') {
          ++pos_;
          steps.push_back({JsonPath::Step::Kind::kWildcard, {}, {}, {}});
          continue;
        }
        std::string name = read_name();
        if (name.empty()) fail("expected a child name after '.'", token_at(pos_));
        steps.push_back({JsonPath::Step::Kind::kChild, std::move(name), {}, {}});
      } else if (c == '[') {
        steps.push_back(bracket());
      } else {
        fail("unexpected token", token_at(pos_));
      }
    }
    return steps;
  }

 private:
  JsonPath::Step bracket() {
    const std::size_t open = pos_;
    ++pos_;  // '['
    skip_ws();
    if (peek() == '*') {
      ++pos_;
      skip_ws();
      expect(']', open);
      return {JsonPath::Step::Kind::kWildcard, {}, {}, {}};
    }
    if (peek() == '\'' || peek() == '"') {
      std::string name = read_quoted();
      skip_ws();
      expect(']', open);
      return {JsonPath::Step::Kind::kChild, std::move(name), {}, {}};
    }
    if (peek() == '?') {
      ++pos_;
      expect('(', open);
      skip_ws();
      expect('@', open);
      JsonPath::Step step;
      step.kind = JsonPath::Step::Kind::kFilter;
      while (peek() == '.') {
        ++pos_;
        std::string part = read_name();
        if (part.empty()) fail("expected a field name in filter", token_at(pos_));
        step.field.push_back(std::move(part));
      }
      if (step.field.empty()) fail("filter must test a field of '@'", token_at(pos_));
      skip_ws();
      if (p_.substr(pos_, 2) != "==") fail("only '==' comparisons are supported", token_at(pos_));
      pos_ += 2;
      skip_ws();
      if (peek() != '\'' && peek() != '"') fail("filter literal must be a quoted string", token_at(pos_));
      step.literal = read_quoted();
      skip_ws();
      expect(')', open);
      skip_ws();
      expect(']', open);
      return step;
    }
    fail("unsupported bracket expression", token_at(open));
  }

  std::string read_name() {
    const std::size_t start = pos_;
    while (pos_ < p_.size() && name_char(p_[pos_])) ++pos_;
    return std::string(p_.substr(start, pos_ - start));
  }

  std::string read_quoted() {
    const char q = p_[pos_];
    const std::size_t start = pos_;
    ++pos_;
    std::string out;
    while (pos_ < p_.size() && p_[pos_] != q) {
      if (p_[pos_] == '\\' && pos_ + 1 < p_.size()) ++pos_;
      out += p_[pos_++];
    }
    if (pos_ >= p_.size()) fail("unterminated string literal", std::string(p_.substr(start)));
    ++pos_;
    return out;
  }

  void expect(char c, std::size_t context) {
    if (peek() != c) fail(std::string("expected '") + c + "'", token_at(pos_ < p_.size() ? pos_ : context));
    ++pos_;
  }

  char peek() const { return pos_ < p_.size() ? p_[pos_] : '\0'; }
  void skip_ws() {
    while (pos_ < p_.size() && std::isspace(static_cast<unsigned char>(p_[pos_]))) ++pos_;
  }

  // The token starting at `at`: a bracket group, or a run up to the next separator.
  std::string token_at(std::size_t at) const {
    if (at >= p_.size()) return "<end>";
    if (p_[at] == '[') {
      auto close = p_.find(']', at);
      return std::string(p_.substr(at, close == std::string_view::npos ? std::string_view::npos : close - at + 1));
    }
    std::size_t end = at + 1;
    while (end < p_.size() && p_[end] != '.' && p_[end] != '[') ++end;
    return std::string(p_.substr(at, end - at));
  }

  [[noreturn]] void fail(const std::string& what, const std::string& token) const {
    throw JsonPathError("JSONPath '" + std::string(p_) + "': " + what + " at '" + token + "'", token);
  }

  std::string_view p_;
  std::size_t pos_ = 0;
};

bool filter_matches(const Json& node, const JsonPath::Step& step) {
  const Json* cur = &node;
  for (const auto& f : step.field) {
    if (!cur->is_object()) return false;
    auto it = cur->find(f);
    if (it == cur->end()) return false;
    cur = &*it;
  }
  return cur->is_string() && cur->get_ref<const std::string&>() == step.literal;
}

void walk(const Json& node, Location& loc, const std::vector<JsonPath::Step>& steps, std::size_t i,
          std::vector<Location>& out) {
  if (i == steps.size()) {
    out.push_back(loc);
    return;
  }
  const auto& step = steps[i];
  auto visit = [&](const Json& child, std::variant<std::string, std::size_t> key) {
    loc.steps.push_back(std::move(key));
    walk(child, loc, steps, i + 1, out);
    loc.steps.pop_back();
  };
  switch (step.kind) {
    case JsonPath::Step::Kind::kChild:
      if (node.is_object()) {
        auto it = node.find(step.name);
        if (it != node.end()) visit(*it, step.name);
      }
      break;
    case JsonPath::Step::Kind::kWildcard:
    case JsonPath::Step::Kind::kFilter: {
      const bool filter = step.kind == JsonPath::Step::Kind::kFilter;
      if (node.is_object()) {
        for (auto it = node.begin(); it != node.end(); ++it) {
          if (!filter || filter_matches(it.value(), step)) visit(it.value(), it.key());
        }
      } else if (node.is_array()) {
        for (std::size_t k = 0; k < node.size(); ++k) {
          if (!filter || filter_matches(node[k], step)) visit(node[k], k);
        }
      }
      break;
    }
  }
}

}  // namespace

JsonPath JsonPath::parse(std::string_view pattern) {
  JsonPath p;
  p.pattern_ = std::string(pattern);
  p.steps_ = PatternParser(pattern).run();
  return p;
}

std::vector<Location> JsonPath::select(const Json& document) const {
  std::vector<Location> out;
  Location loc;
  walk(document, loc, steps_, 0, out);
  return out;
}

const Json* resolve(const Json& document, const Location& location) {
  const Json* cur = &document;
  for (const auto& s : location.steps) {
    if (const auto* key = std::get_if<std::string>(&s)) {
      if (!cur->is_object()) return nullptr;
      auto it = cur->find(*key);
      if (it == cur->end()) return nullptr;
      cur = &*it;
    } else {
      std::size_t idx = std::get<std::size_t>(s);
      if (!cur->is_array() || idx >= cur->size()) return nullptr;
      cur = &(*cur)[idx];
    }
  }
  return cur;
}

}  // namespace ergae
