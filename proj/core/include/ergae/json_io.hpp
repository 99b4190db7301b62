#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ergae {

using Json = nlohmann::ordered_json;

class JsonParseError : public std::runtime_error {
 public:
  JsonParseError(const std::string& what, std::size_t line) : std::runtime_error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Parses hand-edited JSON: tolerates trailing commas and commas missing
/// between values or members, as long as the tokens are otherwise separated.
/// Duplicate object keys are rejected.
Json parse_relaxed_json(std::string_view text);

/// Parses a sequence of concatenated top-level values (JSON Lines, or records
/// separated only by whitespace or stray commas).
std::vector<Json> parse_relaxed_json_stream(std::string_view text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace ergae
