#include "ergae/service.hpp"

#include <cstdlib>
#include <charconv>
#include <set>

#include "ergae/validate.hpp"
#include "httplib.h"

namespace ergae {

namespace {

constexpr std::size_t kDefaultPage = 50;
constexpr std::size_t kMaxPage = 1000;

HttpResponse json_response(int status, const Json& body) { return {status, body.dump(), "application/json"}; }

HttpResponse error_response(int status, const std::string& message, const std::string& field = "") {
  Json body{{"error", message}};
  if (!field.empty()) body["field"] = field;
  return json_response(status, body);
}

std::optional<std::size_t> parse_count(const std::string& text) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return v;
}

Json edges_of(const Dataset& data, std::size_t e) {
  Json edges = Json::array();
  const auto& rels = data.schema().relationships;
  for (std::size_t r = 0; r < rels.size(); ++r) {
    for (const auto& [src, dst] : data.edges()[r]) {
      if (src == e || dst == e) {
        edges.push_back({{"relationship", rels[r].name}, {"source", data.id(src)}, {"target", data.id(dst)}});
      }
    }
  }
  return edges;
}

Json pair_json(const std::vector<SimilarPair>& pairs) {
  Json out = Json::array();
  for (const auto& p : pairs) out.push_back({{"first", p.first}, {"second", p.second}, {"similarity", p.similarity}});
  return out;
}

}  // namespace

Json infer_component(const GraphModel& model, const Json& request) {
  const DomainSchema& schema = model.schema();
  if (!request.is_object()) throw InferError("", "request body must be an object");
  auto ents = request.find("entities");
  if (ents == request.end() || !ents->is_array()) throw InferError("entities", "'entities' must be a list");
  if (ents->empty()) throw InferError("entities", "'entities' is empty");

  std::vector<Json> records;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ents->size(); ++i) {
    const std::string where = "entities[" + std::to_string(i) + "]";
    const Json& e = (*ents)[i];
    ValidationReport report = validate_entity(schema, e, where);
    if (!report.ok()) throw InferError(report.errors.front().location, report.errors.front().message);
    const std::string id = e.at(kIdKey).get<std::string>();
    if (!index.emplace(id, i).second) throw InferError(where + ".id", "duplicate id '" + id + "'");
    records.push_back(e);
  }

  if (auto edges = request.find("edges"); edges != request.end() && !edges->is_null()) {
    if (!edges->is_array()) throw InferError("edges", "'edges' must be a list");
    for (std::size_t i = 0; i < edges->size(); ++i) {
      const std::string where = "edges[" + std::to_string(i) + "]";
      const Json& edge = (*edges)[i];
      auto field = [&](const char* key) -> std::string {
        auto it = edge.is_object() ? edge.find(key) : edge.end();
        if (!edge.is_object() || it == edge.end() || !it->is_string()) {
          throw InferError(where + "." + key, std::string("edge needs a string '") + key + "'");
        }
        return it->get<std::string>();
      };
      const std::string rel = field("relationship");
      const std::string src = field("source");
      const std::string dst = field("target");
      const RelationshipDef* def = schema.relationship(rel);
      if (!def) throw InferError(where + ".relationship", "unknown relationship '" + rel + "'");
      auto s = index.find(src);
      if (s == index.end()) throw InferError(where + ".source", "source '" + src + "' is not in the request");
      if (records[s->second].at(kEntityTypeKey) != def->source_entity_type) {
        throw InferError(where + ".source", "'" + src + "' is not a " + def->source_entity_type);
      }
      Json& slot = records[s->second][rel];
      if (slot.is_null()) {
        slot = Json::array();
      } else if (slot.is_string()) {
        slot = Json::array({slot});
      }
      slot.push_back(dst);
    }
  }

  for (std::size_t i = 0; i < records.size(); ++i) {
    for (const auto& rel : schema.relationships) {
      auto it = records[i].find(rel.name);
      if (it == records[i].end() || it->is_null()) continue;
      const std::string where = "entities[" + std::to_string(i) + "]." + rel.name;
      for (const auto& target : relationship_targets(*it).value_or(std::vector<std::string>{})) {
        auto t = index.find(target);
        if (t == index.end()) throw InferError(where, "target '" + target + "' is not in the request");
        if (records[t->second].at(kEntityTypeKey) != rel.target_entity_type) {
          throw InferError(where, "target '" + target + "' is not a " + rel.target_entity_type);
        }
      }
    }
  }

  MaskSpec mask;
  if (auto m = request.find("mask"); m != request.end() && !m->is_null()) {
    if (!m->is_array()) throw InferError("mask", "'mask' must be a list of property names");
    for (std::size_t i = 0; i < m->size(); ++i) {
      const Json& name = (*m)[i];
      if (!name.is_string() || !schema.property(name.get<std::string>())) {
        throw InferError("mask[" + std::to_string(i) + "]", "unknown property " + name.dump());
      }
      mask.always_mask.insert(name.get<std::string>());
    }
  }

  std::unique_ptr<Dataset> data;
  try {
    data = std::make_unique<Dataset>(model.schema_ptr(), model.codecs(), records);
  } catch (const DatasetError& err) {
    throw InferError("entities", err.what());
  }
  std::vector<std::size_t> all(data->size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  Batch batch = apply_mask(*data, make_batch(*data, all), mask);

  Tape tape;
  tape.set_recording(false);
  Forward f(tape, false);
  ForwardOutput out = model.forward(f, *data, batch);
  std::vector<Json> rec = model.reconstruct(f, out, *data, batch);

  // Per-entity loss of each scored property, averaged over decoder depths.
  std::vector<std::map<std::string, std::pair<double, std::size_t>>> losses(batch.size());
  for (const auto& dp : out.decoded) {
    const Tensor& l = dp.loss_rows.value();
    const std::string& name = schema.properties[dp.property].name;
    for (std::size_t k = 0; k < dp.rows.size(); ++k) {
      auto& slot = losses[out.members[dp.type][dp.rows[k]]][name];
      slot.first += l.at(k, 0);
      slot.second += 1;
    }
  }

  Json entities = Json::array();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::size_t type = data->entity_type(batch.entities[i]);
    Json reconstruction = Json::object();
    for (auto it = rec[i].begin(); it != rec[i].end(); ++it) {
      if (it.key() != kIdKey && it.key() != kEntityTypeKey) reconstruction[it.key()] = it.value();
    }
    Json bottlenecks = Json::array();
    for (std::size_t d = 0; d < out.bottlenecks.size(); ++d) {
      const Tensor& b = out.bottlenecks[d][type].value();
      std::vector<double> row(b.cols());
      for (std::size_t c = 0; c < row.size(); ++c) row[c] = b.at(out.row_of[i], c);
      bottlenecks.push_back(row);
    }
    Json loss = Json::object();
    for (const auto& [name, acc] : losses[i]) {
      const double weight = schema.property(name)->meta.value("loss_weight", 1.0);
      loss[name] = weight * acc.first / static_cast<double>(acc.second);
    }
    entities.push_back({{"id", data->id(batch.entities[i])},
                        {"entity_type", schema.entity_types[type].name},
                        {"reconstruction", std::move(reconstruction)},
                        {"bottlenecks", std::move(bottlenecks)},
                        {"losses", std::move(loss)}});
  }
  Json masked = Json::array();
  for (const auto& name : mask.always_mask) masked.push_back(name);
  return Json{{"entities", std::move(entities)}, {"loss", out.total.value().item()}, {"masked", std::move(masked)}};
}

Service::Service(std::shared_ptr<const GraphModel> model, std::shared_ptr<const Dataset> dataset)
    : model_(std::move(model)), dataset_(std::move(dataset)) {
  if (!model_ || !dataset_) throw std::invalid_argument("service needs a model and a dataset");
  if (!same_structure(model_->schema(), dataset_->schema())) {
    throw std::invalid_argument("dataset schema does not match the checkpoint");
  }
  table_ = export_bottlenecks(*model_, *dataset_);
}

HttpResponse Service::schema() const { return json_response(200, schema_to_json(model_->schema())); }

HttpResponse Service::entities(const std::map<std::string, std::string>& query) const {
  std::size_t offset = 0;
  std::size_t limit = kDefaultPage;
  if (auto it = query.find("offset"); it != query.end()) {
    auto v = parse_count(it->second);
    if (!v) return error_response(400, "offset must be a non-negative integer", "offset");
    offset = *v;
  }
  if (auto it = query.find("limit"); it != query.end()) {
    auto v = parse_count(it->second);
    if (!v || *v == 0 || *v > kMaxPage) {
      return error_response(400, "limit must be between 1 and " + std::to_string(kMaxPage), "limit");
    }
    limit = *v;
  }
  std::vector<std::size_t> selected;
  if (auto it = query.find("type"); it != query.end() && !it->second.empty()) {
    auto t = dataset_->schema().entity_type_index(it->second);
    if (!t) return error_response(404, "unknown entity type '" + it->second + "'", "type");
    selected = dataset_->entities_of_type(*t);
  } else {
    selected.resize(dataset_->size());
    for (std::size_t i = 0; i < selected.size(); ++i) selected[i] = i;
  }
  if (offset > selected.size()) return error_response(400, "offset is past the last entity", "offset");
  Json page = Json::array();
  for (std::size_t i = offset; i < std::min(selected.size(), offset + limit); ++i) {
    page.push_back(dataset_->record(selected[i]));
  }
  return json_response(200, {{"total", selected.size()}, {"offset", offset}, {"limit", limit}, {"entities", page}});
}

HttpResponse Service::entity(const std::string& id) const {
  auto e = dataset_->find(id);
  if (!e) return error_response(404, "unknown entity '" + id + "'");
  return json_response(200, {{"entity", dataset_->record(*e)}, {"edges", edges_of(*dataset_, *e)}});
}

HttpResponse Service::neighbors(const std::string& id, const std::map<std::string, std::string>& query) const {
  if (!dataset_->find(id)) return error_response(404, "unknown entity '" + id + "'");
  std::size_t k = 10;
  if (auto it = query.find("k"); it != query.end()) {
    auto v = parse_count(it->second);
    if (!v || *v == 0) return error_response(400, "k must be a positive integer", "k");
    k = *v;
  }
  PairSearchResult r = nearest_to(table_, id, k);
  Json list = Json::array();
  for (const auto& p : r.pairs) list.push_back({{"id", p.first == id ? p.second : p.first}, {"similarity", p.similarity}});
  return json_response(200, {{"id", id},
                             {"k", k},
                             {"depth", table_.depth},
                             {"neighbors", list},
                             {"pairs", pair_json(r.pairs)},
                             {"warnings", r.warnings}});
}

HttpResponse Service::infer(const std::string& body) const {
  Json request;
  try {
    request = Json::parse(body);
  } catch (const Json::parse_error& err) {
    return error_response(400, std::string("malformed request body: ") + err.what());
  }
  try {
    return json_response(200, infer_component(*model_, request));
  } catch (const InferError& err) {
    return error_response(422, err.what(), err.field());
  }
}

HttpResponse Service::handle(const std::string& method, const std::string& path,
                             const std::map<std::string, std::string>& query, const std::string& body) const {
  auto tail = [&](const std::string& prefix) -> std::optional<std::string> {
    if (path.size() > prefix.size() && path.compare(0, prefix.size(), prefix) == 0) return path.substr(prefix.size());
    return std::nullopt;
  };
  const bool get = method == "GET";
  if (path == "/infer") return method == "POST" ? infer(body) : error_response(405, "use POST");
  if (path == "/schema") return get ? schema() : error_response(405, "use GET");
  if (path == "/entities") return get ? entities(query) : error_response(405, "use GET");
  if (auto id = tail("/entity/")) return get ? entity(*id) : error_response(405, "use GET");
  if (auto id = tail("/neighbors/")) return get ? neighbors(*id, query) : error_response(405, "use GET");
  return error_response(404, "no route for " + path);
}

struct HttpServer::Impl {
  explicit Impl(const Service& s) : service(s) {}
  const Service& service;
  httplib::Server server;
};

HttpServer::HttpServer(const Service& service) : impl_(std::make_unique<Impl>(service)) {
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [k, v] : req.params) query.emplace(k, v);
    HttpResponse r;
    try {
      r = impl_->service.handle(req.method, req.path, query, req.body);
    } catch (const std::exception& err) {
      r = error_response(500, err.what());
    }
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  impl_->server.Get(".*", route);
  impl_->server.Post(".*", route);
  impl_->server.Put(".*", route);
  impl_->server.Delete(".*", route);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw std::runtime_error("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

std::pair<std::string, int> bind_address_from_env(std::string host, int port) {
  if (const char* h = std::getenv("ERGAE_HOST"); h && *h) host = h;
  if (const char* p = std::getenv("ERGAE_PORT"); p && *p) {
    auto v = parse_count(p);
    if (!v || *v > 65535) throw std::invalid_argument(std::string("ERGAE_PORT is not a port: ") + p);
    port = static_cast<int>(*v);
  }
  return {host, port};
}

}  // namespace ergae
