// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
//
// Wall-clock HTTP servers for the three deployable components:
//
//   RepoServer     batch-metadata repository with lease expiry
//   NodeServer     single-site task service running tasks on worker threads
//   GatewayServer  federation gateway proxying remote task services
//
// Each server binds on start() (port 0 picks a free port), serves on a
// background thread, and shuts down in stop() or its destructor. These
// host the same core classes the simulation uses; only the clock and the
// transport differ. task durations are scaled by NodeServer's time_scale
// so contract tests run in milliseconds.
#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "hybridmesh/metadata_repo.hpp"
#include "hybridmesh/task.hpp"
#include "hybridmesh/tes.hpp"

namespace hybridmesh {

class RepoServer {
 public:
  explicit RepoServer(std::int64_t max_retries);
  ~RepoServer();

  RepoServer(const RepoServer&) = delete;
  RepoServer& operator=(const RepoServer&) = delete;

  // Binds and starts serving; returns the bound port. Throws BindError if
  // the address is taken or invalid.
  int start(const std::string& host, int port);
  void stop();
  std::string url() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Runs queued tasks on `slots` worker threads. A task sleeps for
// duration_s * time_scale wall seconds, then completes (or fails when its
// command is poisoned). Cancellation interrupts the sleep.
class NodeServer {
 public:
  NodeServer(std::string node_id, SiteId site, std::int64_t slots,
             double time_scale = 0.001);
  ~NodeServer();

  NodeServer(const NodeServer&) = delete;
  NodeServer& operator=(const NodeServer&) = delete;

  int start(const std::string& host, int port);
  void stop();
  std::string url() const;
  const std::string& node_id() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Fronts remote task services. Nodes are added by URL before start();
// a background thread probes each node's /v1/service-info on the heartbeat
// interval and feeds the gateway's health view. Registering another
// gateway's URL as a node chains federations.
class GatewayServer {
 public:
  GatewayServer(std::string name, double heartbeat_interval_s,
                double heartbeat_timeout_s,
                RouteCostModel cost_model = RouteCostModel::bytes);
  ~GatewayServer();

  GatewayServer(const GatewayServer&) = delete;
  GatewayServer& operator=(const GatewayServer&) = delete;

  void add_node(const std::string& node_id, const SiteId& site,
                const std::string& url);

  int start(const std::string& host, int port);
  void stop();
  std::string url() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hybridmesh
