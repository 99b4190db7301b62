#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ergae/schema.hpp"

namespace ergae {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

class TabularError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// RFC 4180 comma-separated values with a header row.
Table parse_csv(std::string_view text);

struct ColumnHint {
  std::optional<PropertyType> type;
  std::string group;       // entity-type receiving this column; empty = default group
  std::string references;  // non-empty: column is a foreign key into this group
  bool key = false;        // column holds the ids of its group's entities
};

struct TabularHints {
  std::string default_group = "record";
  std::map<std::string, ColumnHint> columns;
};

struct TabularDerivation {
  DomainSchema schema;
  std::vector<Json> entities;
};

/// Heuristic schema + entities from a table. Unhinted columns are typed as
/// scalar (all numeric), categorical (at most min(32, 10% of rows) distinct
/// values) or text.
TabularDerivation derive_schema_from_tabular(const Table& table, const TabularHints& hints = {});

PropertyType infer_column_type(const std::vector<std::string>& cells);

}  // namespace ergae
