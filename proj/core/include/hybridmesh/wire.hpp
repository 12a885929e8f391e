// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
//
// HTTP clients for the two wire protocols: the batch-metadata repository
// API and the task-service API. Both speak JSON whose field names are the
// canonical serialization of the core types, so a document produced by a
// simulated component parses unchanged on the wire and vice versa.
//
// Repository endpoints:
//   POST /batches                          register {batch_id, input}
//   POST /batches/{id}/claim               {site, expected_version, lease_s}
//   POST /batches/{id}/report              {site, tag, output}
//   GET  /batches?tag=X                    list, optionally filtered
//   GET  /batches/{id}                     single record
//
// Task-service endpoints:
//   POST /v1/tasks                         create, returns {id}
//   GET  /v1/tasks/{id}?view=FULL|MINIMAL  fetch one document
//   GET  /v1/tasks?view=...                {tasks: [...]}
//   POST /v1/tasks/{id}:cancel             {canceled: bool}
//   GET  /v1/service-info                  component descriptor
//
// Transport failures raise NodeUnreachable; protocol-level rejections are
// carried in the RepoResult status or mapped back to the library errors.
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hybridmesh/metadata_repo.hpp"
#include "hybridmesh/task.hpp"
#include "hybridmesh/tes.hpp"

namespace hybridmesh {

// Maps a repository status onto its HTTP code. `created` selects 201 for
// the one endpoint that makes a new resource.
int http_status_for(RepoStatus s, bool created);

// Client for a remote batch repository. Mirrors SimRepo's surface, minus
// the clock: in live mode the server's clock is authoritative.
class HttpRepoClient {
 public:
  explicit HttpRepoClient(const std::string& base_url);
  ~HttpRepoClient();

  HttpRepoClient(const HttpRepoClient&) = delete;
  HttpRepoClient& operator=(const HttpRepoClient&) = delete;

  RepoResult register_batch(const std::string& batch_id, const DataRef& input);
  RepoResult claim(const std::string& batch_id, const SiteId& site,
                   std::int64_t expected_version, double lease_s);
  RepoResult report(const std::string& batch_id, const SiteId& site,
                    BatchTag tag, const std::string& output);
  std::vector<BatchRecord> list(std::optional<BatchTag> tag = std::nullopt);
  std::optional<BatchRecord> find(const std::string& batch_id);

  const std::string& base_url() const { return base_url_; }

 private:
  struct Impl;
  std::string base_url_;
  std::unique_ptr<Impl> impl_;
};

// Client for a remote task service. Implements TesService, so a remote
// node can be registered with an in-process TesGateway and a remote
// gateway can be driven like a local one.
class HttpTesClient : public TesService {
 public:
  explicit HttpTesClient(const std::string& base_url);
  ~HttpTesClient() override;

  HttpTesClient(const HttpTesClient&) = delete;
  HttpTesClient& operator=(const HttpTesClient&) = delete;

  std::string create_task(const TaskSpec& spec) override;
  TesTaskDoc get_task(const std::string& id, bool full) override;
  std::vector<TesTaskDoc> list_tasks(bool full) override;
  CancelOutcome cancel_task(const std::string& id) override;
  Json service_info() override;

  const std::string& base_url() const { return base_url_; }

 private:
  struct Impl;
  std::string base_url_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hybridmesh
