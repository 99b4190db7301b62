#pragma once

#include <map>
#include <memory>
#include <string>

#include "ergae/dataset.hpp"
#include "ergae/explore.hpp"
#include "ergae/graph_model.hpp"

namespace ergae {

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// Read-only inference and browsing over one checkpoint and its dataset.
/// Handlers are const and safe to call concurrently.
class Service {
 public:
  Service(std::shared_ptr<const GraphModel> model, std::shared_ptr<const Dataset> dataset);

  const GraphModel& model() const { return *model_; }
  const Dataset& dataset() const { return *dataset_; }
  const BottleneckTable& bottlenecks() const { return table_; }

  HttpResponse schema() const;
  HttpResponse entities(const std::map<std::string, std::string>& query) const;
  HttpResponse entity(const std::string& id) const;
  HttpResponse neighbors(const std::string& id, const std::map<std::string, std::string>& query) const;
  HttpResponse infer(const std::string& body) const;

  /// Routes a request by method and path; query holds decoded parameters.
  HttpResponse handle(const std::string& method, const std::string& path,
                      const std::map<std::string, std::string>& query, const std::string& body) const;

 private:
  std::shared_ptr<const GraphModel> model_;
  std::shared_ptr<const Dataset> dataset_;
  BottleneckTable table_;
};

/// Evaluation-mode inference over a request component. Throws InferError
/// when the request does not fit the model's schema.
Json infer_component(const GraphModel& model, const Json& request);

class InferError : public std::runtime_error {
 public:
  InferError(std::string field, const std::string& message)
      : std::runtime_error(message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Blocking HTTP front end for a Service.
class HttpServer {
 public:
  explicit HttpServer(const Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds to host:port; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void listen();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Bind address from ERGAE_HOST / ERGAE_PORT, falling back to the given defaults.
std::pair<std::string, int> bind_address_from_env(std::string host = "127.0.0.1", int port = 8080);

}  // namespace ergae
