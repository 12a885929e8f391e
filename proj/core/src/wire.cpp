// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0

#include "hybridmesh/wire.hpp"

#include <utility>

#include "httplib.h"
#include "hybridmesh/errors.hpp"

namespace hybridmesh {
namespace {

constexpr time_t kConnectTimeoutS = 2;
constexpr time_t kIoTimeoutS = 10;

Json parse_body(const std::string& body, const std::string& what) {
  Json j = Json::parse(body, nullptr, false);
  if (j.is_discarded()) {
    throw MalformedSpec("malformed response body from " + what);
  }
  return j;
}

std::string error_of(const Json& j) {
  if (j.is_object() && j.contains("error") && j["error"].is_string()) {
    return j["error"].get<std::string>();
  }
  return j.dump();
}

}  // namespace

int http_status_for(RepoStatus s, bool created) {
  switch (s) {
    case RepoStatus::OK:
      return created ? 201 : 200;
    case RepoStatus::CONFLICT:
    case RepoStatus::ILLEGAL_TAG:
    case RepoStatus::DUPLICATE_BATCH:
      return 409;
    case RepoStatus::NOT_CLAIMANT:
    case RepoStatus::LEASE_EXPIRED:
      return 403;
    case RepoStatus::UNKNOWN_BATCH:
      return 404;
  }
  return 500;
}

// Each request uses a fresh connection. Clients are called from multiple
// threads (gateway heartbeats race with request forwarding), and a
// connectionless client needs no locking.
struct HttpRepoClient::Impl {
  std::string base_url;

  httplib::Result request(const char* method, const std::string& path,
                          const std::string& body) {
    httplib::Client cli(base_url);
    cli.set_connection_timeout(kConnectTimeoutS, 0);
    cli.set_read_timeout(kIoTimeoutS, 0);
    cli.set_write_timeout(kIoTimeoutS, 0);
    if (method[0] == 'G') return cli.Get(path);
    return cli.Post(path, body, "application/json");
  }

  RepoResult roundtrip(const char* method, const std::string& path,
                       const Json& body) {
    auto res = request(method, path, body.is_null() ? "" : body.dump());
    if (!res) {
      throw NodeUnreachable("cannot reach repository at " + base_url + path);
    }
    Json j = parse_body(res->body, base_url + path);
    if (res->status == 400) throw MalformedSpec(error_of(j));
    if (res->status >= 500) {
      throw NodeUnreachable("repository error " + std::to_string(res->status) +
                            " from " + base_url + path);
    }
    RepoResult out;
    if (j.is_object() && j.contains("error")) {
      out.status = repo_status_from_string(j["error"].get<std::string>());
      if (j.contains("record")) out.record = BatchRecord::from_json(j["record"]);
    } else {
      out.status = RepoStatus::OK;
      out.record = BatchRecord::from_json(j);
    }
    return out;
  }
};

HttpRepoClient::HttpRepoClient(const std::string& base_url)
    : base_url_(base_url), impl_(std::make_unique<Impl>()) {
  impl_->base_url = base_url;
}

HttpRepoClient::~HttpRepoClient() = default;

RepoResult HttpRepoClient::register_batch(const std::string& batch_id,
                                          const DataRef& input) {
  Json body{{"batch_id", batch_id}, {"input", input.to_json()}};
  return impl_->roundtrip("POST", "/batches", body);
}

RepoResult HttpRepoClient::claim(const std::string& batch_id,
                                 const SiteId& site,
                                 std::int64_t expected_version,
                                 double lease_s) {
  Json body{{"site", site},
            {"expected_version", expected_version},
            {"lease_s", lease_s}};
  return impl_->roundtrip("POST", "/batches/" + batch_id + "/claim", body);
}

RepoResult HttpRepoClient::report(const std::string& batch_id,
                                  const SiteId& site, BatchTag tag,
                                  const std::string& output) {
  Json body{{"site", site}, {"tag", to_string(tag)}, {"output", output}};
  return impl_->roundtrip("POST", "/batches/" + batch_id + "/report", body);
}

std::vector<BatchRecord> HttpRepoClient::list(std::optional<BatchTag> tag) {
  std::string path = "/batches";
  if (tag) path += std::string("?tag=") + to_string(*tag);
  auto res = impl_->request("GET", path, "");
  if (!res) throw NodeUnreachable("cannot reach repository at " + base_url_);
  Json j = parse_body(res->body, base_url_ + path);
  std::vector<BatchRecord> out;
  for (const auto& item : j) out.push_back(BatchRecord::from_json(item));
  return out;
}

std::optional<BatchRecord> HttpRepoClient::find(const std::string& batch_id) {
  std::string path = "/batches/" + batch_id;
  auto res = impl_->request("GET", path, "");
  if (!res) throw NodeUnreachable("cannot reach repository at " + base_url_);
  if (res->status == 404) return std::nullopt;
  return BatchRecord::from_json(parse_body(res->body, base_url_ + path));
}

struct HttpTesClient::Impl {
  std::string base_url;

  httplib::Result get(const std::string& path) {
    httplib::Client cli(base_url);
    cli.set_connection_timeout(kConnectTimeoutS, 0);
    cli.set_read_timeout(kIoTimeoutS, 0);
    return cli.Get(path);
  }

  httplib::Result post(const std::string& path, const std::string& body) {
    httplib::Client cli(base_url);
    cli.set_connection_timeout(kConnectTimeoutS, 0);
    cli.set_read_timeout(kIoTimeoutS, 0);
    cli.set_write_timeout(kIoTimeoutS, 0);
    return cli.Post(path, body, "application/json");
  }

  [[noreturn]] void raise(int status, const Json& body,
                          const std::string& path) {
    std::string msg = error_of(body);
    if (status == 400) throw MalformedSpec(msg);
    if (status == 404) throw UnknownTask(msg);
    if (status == 503) throw NoHealthyNode(msg);
    throw NodeUnreachable("unexpected status " + std::to_string(status) +
                          " from " + base_url + path);
  }

  Json expect_ok(const httplib::Result& res, const std::string& path) {
    if (!res) throw NodeUnreachable("cannot reach " + base_url + path);
    Json j = parse_body(res->body, base_url + path);
    if (res->status != 200) raise(res->status, j, path);
    return j;
  }
};

HttpTesClient::HttpTesClient(const std::string& base_url)
    : base_url_(base_url), impl_(std::make_unique<Impl>()) {
  impl_->base_url = base_url;
}

HttpTesClient::~HttpTesClient() = default;

std::string HttpTesClient::create_task(const TaskSpec& spec) {
  Json j = impl_->expect_ok(impl_->post("/v1/tasks", spec.to_json().dump()),
                            "/v1/tasks");
  if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) {
    throw MalformedSpec("create response lacks a task id");
  }
  return j["id"].get<std::string>();
}

TesTaskDoc HttpTesClient::get_task(const std::string& id, bool full) {
  std::string path =
      "/v1/tasks/" + id + (full ? "?view=FULL" : "?view=MINIMAL");
  return TesTaskDoc::from_json(impl_->expect_ok(impl_->get(path), path));
}

std::vector<TesTaskDoc> HttpTesClient::list_tasks(bool full) {
  std::string path = full ? "/v1/tasks?view=FULL" : "/v1/tasks?view=MINIMAL";
  Json j = impl_->expect_ok(impl_->get(path), path);
  if (!j.is_object() || !j.contains("tasks") || !j["tasks"].is_array()) {
    throw MalformedSpec("list response lacks a tasks array");
  }
  std::vector<TesTaskDoc> out;
  for (const auto& item : j["tasks"]) {
    out.push_back(TesTaskDoc::from_json(item));
  }
  return out;
}

CancelOutcome HttpTesClient::cancel_task(const std::string& id) {
  std::string path = "/v1/tasks/" + id + ":cancel";
  Json j = impl_->expect_ok(impl_->post(path, "{}"), path);
  if (!j.is_object() || !j.contains("canceled") || !j["canceled"].is_boolean()) {
    throw MalformedSpec("cancel response lacks a canceled flag");
  }
  return j["canceled"].get<bool>() ? CancelOutcome::CANCELED
                                   : CancelOutcome::ALREADY_TERMINAL;
}

Json HttpTesClient::service_info() {
  return impl_->expect_ok(impl_->get("/v1/service-info"), "/v1/service-info");
}

}  // namespace hybridmesh
