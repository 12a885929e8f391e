// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0

#include "hybridmesh/serve.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <set>
#include <thread>
#include <utility>
#include <vector>

#include "httplib.h"
#include "hybridmesh/errors.hpp"
#include "hybridmesh/jsonio.hpp"
#include "hybridmesh/wire.hpp"

namespace hybridmesh {
namespace {

double wall_now() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void send_json(httplib::Response& res, int status, const Json& j) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

Json parse_request(const std::string& body) {
  Json j = Json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw MalformedSpec("request body must be a JSON object");
  }
  return j;
}

// Binds (port 0 picks a free one), then serves on `thread` until stop().
int launch(httplib::Server& srv, const std::string& host, int port,
           std::thread& thread) {
  int bound = port;
  if (port == 0) {
    bound = srv.bind_to_any_port(host);
    if (bound < 0) throw BindError("cannot bind to " + host);
  } else if (!srv.bind_to_port(host, port)) {
    throw BindError("cannot bind to " + host + ":" + std::to_string(port));
  }
  thread = std::thread([&srv] { srv.listen_after_bind(); });
  auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
  while (!srv.is_running()) {
    if (std::chrono::steady_clock::now() > deadline) {
      throw BindError("server failed to start on " + host);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  return bound;
}

// Route glue shared by every task-service server. `mu` may be null when
// the service does its own locking.
void mount_tes_routes(httplib::Server& srv, TesService& svc, std::mutex* mu) {
  auto guarded = [mu](auto&& fn) {
    if (mu == nullptr) return fn();
    std::lock_guard<std::mutex> lock(*mu);
    return fn();
  };
  auto handle = [](httplib::Response& res, auto&& fn) {
    try {
      fn();
    } catch (const MalformedSpec& e) {
      send_json(res, 400, Json{{"error", e.what()}});
    } catch (const UnknownTask& e) {
      send_json(res, 404, Json{{"error", e.what()}});
    } catch (const NoHealthyNode& e) {
      send_json(res, 503, Json{{"error", e.what()}});
    } catch (const Error& e) {
      send_json(res, 500, Json{{"error", e.what()}});
    }
  };
  auto full_view = [](const httplib::Request& req) {
    return req.get_param_value("view") == "FULL";
  };

  srv.Post("/v1/tasks", [&svc, guarded, handle](const httplib::Request& req,
                                                httplib::Response& res) {
    handle(res, [&] {
      TaskSpec spec = TaskSpec::from_json(parse_request(req.body));
      std::string id = guarded([&] { return svc.create_task(spec); });
      send_json(res, 200, Json{{"id", id}});
    });
  });
  // Character classes stay ":/"-ordered: httplib reads a literal "/:" as a
  // path-parameter pattern instead of a regex.
  srv.Get(R"(/v1/tasks/([^:/]+))",
          [&svc, guarded, handle, full_view](const httplib::Request& req,
                                             httplib::Response& res) {
            handle(res, [&] {
              bool full = full_view(req);
              TesTaskDoc doc = guarded(
                  [&] { return svc.get_task(req.matches[1].str(), full); });
              send_json(res, 200, doc.to_json(full));
            });
          });
  srv.Get("/v1/tasks", [&svc, guarded, handle, full_view](
                           const httplib::Request& req,
                           httplib::Response& res) {
    handle(res, [&] {
      bool full = full_view(req);
      auto docs = guarded([&] { return svc.list_tasks(full); });
      Json arr = Json::array();
      for (const auto& d : docs) arr.push_back(d.to_json(full));
      send_json(res, 200, Json{{"tasks", arr}});
    });
  });
  srv.Post(R"(/v1/tasks/([^:/]+):cancel)",
           [&svc, guarded, handle](const httplib::Request& req,
                                   httplib::Response& res) {
             handle(res, [&] {
               auto outcome = guarded(
                   [&] { return svc.cancel_task(req.matches[1].str()); });
               send_json(res, 200,
                         Json{{"canceled", outcome == CancelOutcome::CANCELED}});
             });
           });
  srv.Get("/v1/service-info", [&svc, guarded, handle](
                                  const httplib::Request&,
                                  httplib::Response& res) {
    handle(res, [&] {
      Json info = guarded([&] { return svc.service_info(); });
      send_json(res, 200, info);
    });
  });
}

}  // namespace

// ---------------------------------------------------------------------------
// RepoServer

struct RepoServer::Impl {
  MetadataRepo repo;
  std::mutex mu;  // single writer queue: every route serializes here
  httplib::Server srv;
  std::thread listener;
  std::string host;
  int port = 0;

  explicit Impl(std::int64_t max_retries) : repo(max_retries) { mount(); }

  static Json result_body(const RepoResult& r) {
    if (r.ok()) return r.record.to_json();
    Json j{{"error", to_string(r.status)}};
    if (!r.record.batch_id.empty()) j["record"] = r.record.to_json();
    return j;
  }

  void reply(httplib::Response& res, const RepoResult& r, bool created) {
    send_json(res, http_status_for(r.status, created), result_body(r));
  }

  void mount() {
    auto handle = [](httplib::Response& res, auto&& fn) {
      try {
        fn();
      } catch (const MalformedSpec& e) {
        send_json(res, 400, Json{{"error", e.what()}});
      } catch (const Error& e) {
        send_json(res, 500, Json{{"error", e.what()}});
      }
    };

    srv.Post("/batches", [this, handle](const httplib::Request& req,
                                        httplib::Response& res) {
      handle(res, [&] {
        Json j = parse_request(req.body);
        FieldReader r(j, "register");
        std::string batch_id = r.get_string("batch_id");
        const Json* input_j = r.get_raw("input");
        if (input_j == nullptr) {
          throw MalformedSpec("register: missing field 'input'");
        }
        DataRef input = DataRef::from_json(*input_j);
        std::lock_guard<std::mutex> lock(mu);
        repo.expire_leases(wall_now());
        reply(res, repo.register_batch(batch_id, input), true);
      });
    });

    srv.Post(R"(/batches/([^/]+)/claim)",
             [this, handle](const httplib::Request& req,
                            httplib::Response& res) {
               handle(res, [&] {
                 Json j = parse_request(req.body);
                 FieldReader r(j, "claim");
                 std::string site = r.get_string("site");
                 std::int64_t expected = r.get_int("expected_version");
                 double lease_s = r.get_double("lease_s");
                 std::lock_guard<std::mutex> lock(mu);
                 double now = wall_now();
                 repo.expire_leases(now);
                 reply(res,
                       repo.claim(req.matches[1].str(), site, expected,
                                  lease_s, now),
                       false);
               });
             });

    srv.Post(R"(/batches/([^/]+)/report)",
             [this, handle](const httplib::Request& req,
                            httplib::Response& res) {
               handle(res, [&] {
                 Json j = parse_request(req.body);
                 FieldReader r(j, "report");
                 std::string site = r.get_string("site");
                 BatchTag tag = batch_tag_from_string(r.get_string("tag"));
                 std::string output = r.get_string_or("output", "");
                 std::lock_guard<std::mutex> lock(mu);
                 double now = wall_now();
                 repo.expire_leases(now);
                 reply(res,
                       repo.report(req.matches[1].str(), site, tag, output,
                                   now),
                       false);
               });
             });

    srv.Get("/batches", [this, handle](const httplib::Request& req,
                                       httplib::Response& res) {
      handle(res, [&] {
        std::optional<BatchTag> tag;
        if (req.has_param("tag")) {
          tag = batch_tag_from_string(req.get_param_value("tag"));
        }
        std::lock_guard<std::mutex> lock(mu);
        repo.expire_leases(wall_now());
        Json arr = Json::array();
        for (const BatchRecord& rec : repo.list(tag)) {
          arr.push_back(rec.to_json());
        }
        send_json(res, 200, arr);
      });
    });

    srv.Get(R"(/batches/([^/]+))", [this, handle](const httplib::Request& req,
                                                  httplib::Response& res) {
      handle(res, [&] {
        std::lock_guard<std::mutex> lock(mu);
        repo.expire_leases(wall_now());
        auto rec = repo.find(req.matches[1].str());
        if (!rec) {
          send_json(res, 404, Json{{"error", "UNKNOWN_BATCH"}});
          return;
        }
        send_json(res, 200, rec->to_json());
      });
    });
  }
};

RepoServer::RepoServer(std::int64_t max_retries)
    : impl_(std::make_unique<Impl>(max_retries)) {}

RepoServer::~RepoServer() { stop(); }

int RepoServer::start(const std::string& host, int port) {
  impl_->host = host;
  impl_->port = launch(impl_->srv, host, port, impl_->listener);
  return impl_->port;
}

void RepoServer::stop() {
  if (impl_->listener.joinable()) {
    impl_->srv.stop();
    impl_->listener.join();
  }
}

std::string RepoServer::url() const {
  return "http://" + impl_->host + ":" + std::to_string(impl_->port);
}

// ---------------------------------------------------------------------------
// NodeServer

namespace {

// Wall-clock task service: worker threads pull the queue in FIFO order and
// sleep through each task's scaled duration. All state lives behind one
// mutex; cancellation wakes sleepers via the condition variable.
class LiveNodeService : public TesService {
 public:
  LiveNodeService(std::string node_id, SiteId site, std::int64_t slots,
                  double time_scale)
      : node_id_(std::move(node_id)),
        site_(std::move(site)),
        time_scale_(time_scale) {
    for (std::int64_t i = 0; i < slots; ++i) {
      workers_.emplace_back([this] { work(); });
    }
  }

  ~LiveNodeService() override {
    {
      std::lock_guard<std::mutex> lock(mu_);
      shutting_down_ = true;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

  std::string create_task(const TaskSpec& spec) override {
    if (spec.node_count < 1) throw MalformedSpec("node_count must be >= 1");
    if (spec.executor_count < 1) {
      throw MalformedSpec("executor_count must be >= 1");
    }
    if (!(spec.command.duration_s >= 0.0)) {
      throw MalformedSpec("task duration must be finite and >= 0");
    }
    if (spec.resources.cpu_cores < 1) {
      throw MalformedSpec("cpu_cores must be >= 1");
    }
    std::lock_guard<std::mutex> lock(mu_);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06llu",
                  static_cast<unsigned long long>(next_task_++));
    std::string id = node_id_ + "-t-" + buf;
    TesTaskDoc doc;
    doc.id = id;
    doc.state = TaskState::QUEUED;
    doc.spec = spec;
    doc.spec.id = id;
    doc.creation_time = wall_now();
    doc.logs.emplace_back("QUEUED", doc.creation_time);
    docs_.emplace(id, std::move(doc));
    queue_.push_back(id);
    cv_.notify_one();
    return id;
  }

  TesTaskDoc get_task(const std::string& id, bool full) override {
    std::lock_guard<std::mutex> lock(mu_);
    const TesTaskDoc& doc = doc_of(id);
    if (!full) {
      TesTaskDoc minimal;
      minimal.id = doc.id;
      minimal.state = doc.state;
      return minimal;
    }
    return doc;
  }

  std::vector<TesTaskDoc> list_tasks(bool full) override {
    std::lock_guard<std::mutex> lock(mu_);
    std::vector<TesTaskDoc> out;
    for (const auto& [id, doc] : docs_) {
      if (full) {
        out.push_back(doc);
      } else {
        TesTaskDoc minimal;
        minimal.id = doc.id;
        minimal.state = doc.state;
        out.push_back(std::move(minimal));
      }
    }
    return out;
  }

  CancelOutcome cancel_task(const std::string& id) override {
    std::lock_guard<std::mutex> lock(mu_);
    TesTaskDoc& doc = doc_of(id);
    if (is_terminal(doc.state)) return CancelOutcome::ALREADY_TERMINAL;
    if (doc.state == TaskState::QUEUED) {
      set_state(doc, TaskState::CANCELED);
    } else {
      cancel_requested_.insert(id);
      cv_.notify_all();
    }
    return CancelOutcome::CANCELED;
  }

  Json service_info() override {
    return Json{{"name", node_id_}, {"kind", "node"}, {"site", site_}};
  }

  const std::string& node_id() const { return node_id_; }

 private:
  std::string node_id_;
  SiteId site_;
  double time_scale_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::string, TesTaskDoc> docs_;
  std::deque<std::string> queue_;
  std::set<std::string> cancel_requested_;
  std::uint64_t next_task_ = 1;
  bool shutting_down_ = false;
  std::vector<std::thread> workers_;

  TesTaskDoc& doc_of(const std::string& id) {
    auto it = docs_.find(id);
    if (it == docs_.end()) {
      throw UnknownTask("unknown task '" + id + "' on node '" + node_id_ +
                        "'");
    }
    return it->second;
  }

  static void set_state(TesTaskDoc& doc, TaskState s) {
    doc.state = s;
    doc.logs.emplace_back(to_string(s), wall_now());
  }

  void work() {
    std::unique_lock<std::mutex> lock(mu_);
    for (;;) {
      cv_.wait(lock, [this] { return shutting_down_ || !queue_.empty(); });
      if (shutting_down_) return;
      std::string id = queue_.front();
      queue_.pop_front();
      TesTaskDoc& doc = docs_.at(id);
      if (doc.state != TaskState::QUEUED) continue;  // canceled in queue
      set_state(doc, TaskState::INITIALIZING);
      set_state(doc, TaskState::RUNNING);
      auto deadline =
          std::chrono::steady_clock::now() +
          std::chrono::duration_cast<std::chrono::steady_clock::duration>(
              std::chrono::duration<double>(doc.spec.command.duration_s *
                                            time_scale_));
      bool interrupted = cv_.wait_until(lock, deadline, [&] {
        return shutting_down_ || cancel_requested_.count(id) > 0;
      });
      cancel_requested_.erase(id);
      if (interrupted) {
        set_state(doc, TaskState::CANCELED);
        if (shutting_down_) return;
      } else if (doc.spec.command.poison) {
        set_state(doc, TaskState::EXECUTOR_ERROR);
      } else {
        set_state(doc, TaskState::COMPLETE);
      }
    }
  }
};

}  // namespace

struct NodeServer::Impl {
  LiveNodeService service;
  httplib::Server srv;
  std::thread listener;
  std::string host;
  int port = 0;

  Impl(std::string node_id, SiteId site, std::int64_t slots,
       double time_scale)
      : service(std::move(node_id), std::move(site), slots, time_scale) {
    mount_tes_routes(srv, service, nullptr);
  }
};

NodeServer::NodeServer(std::string node_id, SiteId site, std::int64_t slots,
                       double time_scale)
    : impl_(std::make_unique<Impl>(std::move(node_id), std::move(site), slots,
                                   time_scale)) {}

NodeServer::~NodeServer() { stop(); }

int NodeServer::start(const std::string& host, int port) {
  impl_->host = host;
  impl_->port = launch(impl_->srv, host, port, impl_->listener);
  return impl_->port;
}

void NodeServer::stop() {
  if (impl_->listener.joinable()) {
    impl_->srv.stop();
    impl_->listener.join();
  }
}

std::string NodeServer::url() const {
  return "http://" + impl_->host + ":" + std::to_string(impl_->port);
}

const std::string& NodeServer::node_id() const {
  return impl_->service.node_id();
}

// ---------------------------------------------------------------------------
// GatewayServer

struct GatewayServer::Impl {
  TesGateway gateway;
  double heartbeat_interval_s;
  std::mutex mu;  // guards gateway across request and heartbeat threads
  std::vector<std::unique_ptr<HttpTesClient>> clients;
  std::vector<std::string> client_ids;

  httplib::Server srv;
  std::thread listener;
  std::thread beater;
  std::mutex beat_mu;
  std::condition_variable beat_cv;
  bool stopping = false;
  std::string host;
  int port = 0;

  Impl(std::string name, double interval_s, double timeout_s,
       RouteCostModel cost_model)
      : gateway(std::move(name), wall_now, timeout_s, cost_model),
        heartbeat_interval_s(interval_s) {
    mount_tes_routes(srv, gateway, &mu);
  }

  void beat_loop() {
    for (;;) {
      std::vector<std::pair<std::string, HttpTesClient*>> snapshot;
      {
        std::lock_guard<std::mutex> lock(mu);
        for (std::size_t i = 0; i < clients.size(); ++i) {
          snapshot.emplace_back(client_ids[i], clients[i].get());
        }
      }
      for (auto& [id, client] : snapshot) {
        try {
          client->service_info();
          std::lock_guard<std::mutex> lock(mu);
          gateway.heartbeat(id);
        } catch (const Error&) {
          // Missed beat; the gateway ages the node out on its own.
        }
      }
      std::unique_lock<std::mutex> lock(beat_mu);
      if (beat_cv.wait_for(
              lock, std::chrono::duration<double>(heartbeat_interval_s),
              [this] { return stopping; })) {
        return;
      }
    }
  }
};

GatewayServer::GatewayServer(std::string name, double heartbeat_interval_s,
                             double heartbeat_timeout_s,
                             RouteCostModel cost_model)
    : impl_(std::make_unique<Impl>(std::move(name), heartbeat_interval_s,
                                   heartbeat_timeout_s, cost_model)) {}

GatewayServer::~GatewayServer() { stop(); }

void GatewayServer::add_node(const std::string& node_id, const SiteId& site,
                             const std::string& url) {
  auto client = std::make_unique<HttpTesClient>(url);
  std::lock_guard<std::mutex> lock(impl_->mu);
  impl_->gateway.register_node(node_id, site, *client);
  impl_->clients.push_back(std::move(client));
  impl_->client_ids.push_back(node_id);
}

int GatewayServer::start(const std::string& host, int port) {
  impl_->host = host;
  impl_->port = launch(impl_->srv, host, port, impl_->listener);
  impl_->beater = std::thread([this] { impl_->beat_loop(); });
  return impl_->port;
}

void GatewayServer::stop() {
  if (impl_->beater.joinable()) {
    {
      std::lock_guard<std::mutex> lock(impl_->beat_mu);
      impl_->stopping = true;
    }
    impl_->beat_cv.notify_all();
    impl_->beater.join();
  }
  if (impl_->listener.joinable()) {
    impl_->srv.stop();
    impl_->listener.join();
  }
}

std::string GatewayServer::url() const {
  return "http://" + impl_->host + ":" + std::to_string(impl_->port);
}

}  // namespace hybridmesh
