#pragma once

// HTTP facade over one immutable model. Routing lives in Service::handle so it
// can be exercised without sockets; serve() binds it to cpp-httplib.

#include <atomic>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "crcbn/api.hpp"

namespace crcbn {

struct ServiceOptions {
  /// Influence requests with rows * iterations above this run as background jobs.
  std::size_t influence_budget = 5000;
  std::string cors_origin = "*";
  std::size_t threads = 0;
};

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// Loaded model plus its posterior-mean network; never modified after load.
struct SessionModel {
  std::string id;
  ParameterPosterior posterior;
  BayesianNetwork mean;
  nlohmann::json metadata;

  static std::shared_ptr<const SessionModel> from_document(const std::string& document) {
    auto loaded = load_model_document(document);
    auto m = std::make_shared<SessionModel>();
    m->id = api::model_id(document);
    m->mean = posterior_mean_network(loaded.posterior);
    m->posterior = std::move(loaded.posterior);
    m->metadata = std::move(loaded.metadata);
    return m;
  }
};

class Service {
 public:
  explicit Service(std::shared_ptr<const SessionModel> model = nullptr, ServiceOptions opt = {})
      : model_(std::move(model)), opt_(std::move(opt)) {}

  const ServiceOptions& options() const noexcept { return opt_; }
  bool has_model() const noexcept { return model_ != nullptr; }

  Response handle(const std::string& method, const std::string& path, const std::string& body) const {
    try {
      if (method == "OPTIONS") return {204, "", "text/plain"};
      if (method == "GET" && path == "/healthz") return ok({{"status", "ok"}, {"model_loaded", has_model()}});
      if (method == "GET" && path.rfind("/influence/", 0) == 0) return poll(path.substr(11));

      const bool known = path == "/model" || path == "/query" || path == "/riskmap" || path == "/influence";
      if (!known) return error(404, "not_found", "no route for " + method + " " + path);
      const bool want_get = path == "/model";
      if (method != (want_get ? "GET" : "POST")) return error(405, "method_not_allowed", method + " " + path);
      if (!model_) return error(503, "no_model", "no model is loaded");
      if (path == "/model") return ok(api::model_metadata(model_->posterior, model_->id, model_->metadata));

      const auto request = parse_body(body);
      if (path == "/query") return ok(api::run_query(model_->mean, request));
      if (path == "/riskmap") return ok(api::run_riskmap(model_->posterior, request, opt_.threads));
      return influence(request);
    } catch (const Error& e) {
      return from_error(e);
    } catch (const nlohmann::json::exception& e) {
      return error(400, "parse error", e.what());
    } catch (const std::exception& e) {
      return error(500, "internal", e.what());
    }
  }

  /// Registers every route on `server`; `static_dir` (if non-empty) is served at "/".
  void attach(httplib::Server& server, const std::string& static_dir = {}) const {
    auto adapt = [this](const httplib::Request& req, httplib::Response& res) {
      auto r = handle(req.method, req.path, req.body);
      res.status = r.status;
      res.set_content(r.body, r.content_type);
    };
    server.Get("/healthz", adapt);
    server.Get("/model", adapt);
    server.Get(R"(/influence/([A-Za-z0-9-]+))", adapt);
    for (const char* p : {"/query", "/riskmap", "/influence"}) server.Post(p, adapt);
    server.Options(R"(/.*)", adapt);
    server.set_post_routing_handler([origin = opt_.cors_origin](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", origin);
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
    });
    if (!static_dir.empty() && !server.set_mount_point("/", static_dir))
      fail(ErrorKind::io, "static directory '" + static_dir + "' does not exist");
  }

 private:
  struct Job {
    std::shared_future<Response> result;
  };

  static Response ok(const nlohmann::json& j) { return {200, j.dump()}; }

  static Response error(int status, const std::string& kind, const std::string& message) {
    return {status, nlohmann::json{{"error", {{"kind", kind}, {"message", message}}}}.dump()};
  }

  static Response from_error(const Error& e) {
    switch (e.kind()) {
      case ErrorKind::impossible_evidence:
      case ErrorKind::degenerate_baseline:
      case ErrorKind::degenerate_labels:
        return error(422, std::string(to_string(e.kind())), e.what());
      default:
        return error(400, std::string(to_string(e.kind())), e.what());
    }
  }

  static nlohmann::json parse_body(const std::string& body) {
    try {
      return nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      api::bad_request(std::string("request body is not valid JSON: ") + e.what());
    }
  }

  Response influence(const nlohmann::json& request) const {
    auto r = api::parse_influence_request(model_->posterior.schema(), request);
    auto compute = [model = model_, r, threads = opt_.threads]() -> Response {
      try {
        return ok(api::run_influence(model->mean, r, threads));
      } catch (const Error& e) {
        return from_error(e);
      } catch (const std::exception& e) {
        return error(500, "internal", e.what());
      }
    };
    if (api::influence_cost(r) <= opt_.influence_budget) return compute();
    const std::string token = "job-" + std::to_string(++next_job_);
    {
      std::lock_guard lock(jobs_mutex_);
      jobs_[token] = {std::async(std::launch::async, compute).share()};
    }
    return {202, nlohmann::json{{"status", "running"}, {"token", token}, {"poll", "/influence/" + token}}.dump()};
  }

  Response poll(const std::string& token) const {
    std::shared_future<Response> f;
    {
      std::lock_guard lock(jobs_mutex_);
      auto it = jobs_.find(token);
      if (it == jobs_.end()) return error(404, "unknown_job", "no job '" + token + "'");
      f = it->second.result;
    }
    if (f.wait_for(std::chrono::seconds(0)) != std::future_status::ready)
      return {202, nlohmann::json{{"status", "running"}, {"token", token}, {"poll", "/influence/" + token}}.dump()};
    return f.get();
  }

  std::shared_ptr<const SessionModel> model_;
  ServiceOptions opt_;
  mutable std::mutex jobs_mutex_;
  mutable std::map<std::string, Job> jobs_;
  mutable std::atomic<std::size_t> next_job_{0};
};

}  // namespace crcbn
