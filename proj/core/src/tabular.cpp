#include "ergae/tabular.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>
#include <unordered_map>

#include "ergae/validate.hpp"

namespace ergae {

namespace {

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  while (end && *end == ' ') ++end;
  if (end == s.c_str() || *end != '\0') return std::nullopt;
  return v;
}

}  // namespace

Table parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t i = 0;
  if (text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;  // UTF-8 byte order mark
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      end_record();
    } else if (c == '\r') {
      if (i + 1 < text.size() && text[i + 1] == '\n') continue;
      end_record();
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw TabularError("unterminated quoted field");
  if (field_started || !record.empty()) end_record();
  Table table;
  if (records.empty()) throw TabularError("empty table");
  table.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size()) {
      throw TabularError("row " + std::to_string(r + 1) + " has " + std::to_string(records[r].size()) +
                         " columns, header has " + std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

PropertyType infer_column_type(const std::vector<std::string>& cells) {
  std::size_t present = 0;
  bool numeric = true;
  std::set<std::string> distinct;
  for (const auto& c : cells) {
    if (c.empty()) continue;
    ++present;
    numeric = numeric && parse_number(c).has_value();
    distinct.insert(c);
  }
  if (present > 0 && numeric) return PropertyType::kScalar;
  const double limit = std::min(32.0, 0.1 * static_cast<double>(cells.size()));
  if (static_cast<double>(distinct.size()) <= limit) return PropertyType::kCategorical;
  return PropertyType::kText;
}

TabularDerivation derive_schema_from_tabular(const Table& table, const TabularHints& hints) {
  if (table.rows.empty()) throw TabularError("empty table");
  for (const auto& [col, hint] : hints.columns) {
    if (std::find(table.header.begin(), table.header.end(), col) == table.header.end()) {
      throw TabularError("hint names unknown column '" + col + "'");
    }
  }
  const std::size_t ncols = table.header.size();
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    if (table.rows[r].size() != ncols) throw TabularError("row " + std::to_string(r + 1) + " has wrong column count");
  }

  struct Column {
    std::string name;
    std::string group;
    ColumnHint hint;
    PropertyType type = PropertyType::kText;
  };
  std::vector<Column> columns;
  std::vector<std::string> groups;
  std::map<std::string, std::size_t> key_column;
  auto add_group = [&](const std::string& g) {
    if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
  };
  for (std::size_t c = 0; c < ncols; ++c) {
    Column col;
    col.name = table.header[c];
    auto it = hints.columns.find(col.name);
    if (it != hints.columns.end()) col.hint = it->second;
    col.group = col.hint.group.empty() ? hints.default_group : col.hint.group;
    add_group(col.group);
    if (col.hint.key) {
      if (key_column.count(col.group)) throw TabularError("group '" + col.group + "' has two key columns");
      key_column[col.group] = c;
    }
    if (!col.hint.references.empty()) add_group(col.hint.references);
    std::vector<std::string> cells;
    cells.reserve(table.rows.size());
    for (const auto& row : table.rows) cells.push_back(row[c]);
    col.type = col.hint.type ? *col.hint.type : infer_column_type(cells);
    columns.push_back(std::move(col));
  }

  TabularDerivation out;
  DomainSchema& schema = out.schema;
  for (const auto& g : groups) schema.entity_types.push_back({g, {}, Json::object()});
  for (const auto& col : columns) {
    if (col.hint.key) continue;
    if (!col.hint.references.empty()) {
      schema.relationships.push_back({col.name, col.group, col.hint.references, Json::object()});
    } else {
      schema.properties.push_back({col.name, col.type, Json::object()});
      schema.entity_types[*schema.entity_type_index(col.group)].properties.push_back(col.name);
    }
  }
  auto problems = check_schema(schema);
  if (!problems.ok()) throw SchemaError(problems);

  std::unordered_map<std::string, std::size_t> by_id;
  auto entity = [&](const std::string& group, const std::string& id) -> Json& {
    auto it = by_id.find(id);
    if (it != by_id.end()) return out.entities[it->second];
    by_id.emplace(id, out.entities.size());
    out.entities.push_back(Json{{kEntityTypeKey, group}, {kIdKey, id}});
    return out.entities.back();
  };

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    std::map<std::string, std::string> row_ids;
    for (const auto& g : groups) {
      auto k = key_column.find(g);
      if (k != key_column.end()) {
        if (!row[k->second].empty()) row_ids[g] = g + ":" + row[k->second];
      } else if (std::any_of(columns.begin(), columns.end(), [&](const Column& c) { return c.group == g; })) {
        row_ids[g] = g + ":" + std::to_string(r + 1);
      }
    }
    for (const auto& [g, id] : row_ids) entity(g, id);
    for (std::size_t c = 0; c < ncols; ++c) {
      const Column& col = columns[c];
      const std::string& cell = row[c];
      if (col.hint.key || cell.empty()) continue;
      auto src = row_ids.find(col.group);
      if (src == row_ids.end()) continue;
      Json& e = entity(col.group, src->second);
      if (!col.hint.references.empty()) {
        std::string target;
        if (key_column.count(col.hint.references)) {
          target = col.hint.references + ":" + cell;
          entity(col.hint.references, target);
        } else if (auto t = row_ids.find(col.hint.references); t != row_ids.end()) {
          target = t->second;
        } else {
          continue;
        }
        Json& e2 = entity(col.group, src->second);
        if (!e2.contains(col.name)) e2[col.name] = Json::array();
        if (std::find(e2[col.name].begin(), e2[col.name].end(), Json(target)) == e2[col.name].end()) {
          e2[col.name].push_back(target);
        }
        continue;
      }
      if (e.contains(col.name)) continue;  // first non-empty value wins for merged entities
      if (col.type == PropertyType::kScalar) {
        auto v = parse_number(cell);
        if (!v) throw TabularError("row " + std::to_string(r + 1) + " column " + col.name + ": not a number");
        e[col.name] = *v;
      } else {
        e[col.name] = cell;
      }
    }
  }
  return out;
}

}  // namespace ergae
