// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
//
// Task-execution-service layer: a per-site service wrapping any backend
// behind a small task API, and a federation gateway that fronts many such
// services as a reverse proxy. The gateway routes each task to the healthy
// node owning most of its input bytes, fails over when a node is
// unreachable, and answers status queries from its last-known cache when
// the owning node is down.
//
// TesGateway itself implements TesService, so gateways can front gateways.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hybridmesh/engine.hpp"
#include "hybridmesh/executors.hpp"
#include "hybridmesh/sites.hpp"
#include "hybridmesh/task.hpp"

namespace hybridmesh {

struct TesTaskDoc {
  std::string id;
  TaskState state = TaskState::QUEUED;
  TaskSpec spec;
  std::vector<std::pair<std::string, double>> logs;  // (event, at), append-only
  double creation_time = 0.0;
  bool stale = false;  // true when served from a proxy cache

  Json to_json(bool full) const;
  static TesTaskDoc from_json(const Json& j);
};

enum class CancelOutcome { CANCELED, ALREADY_TERMINAL };

class TesService {
 public:
  virtual ~TesService() = default;
  // Returns the service-assigned task id.
  virtual std::string create_task(const TaskSpec& spec) = 0;
  virtual TesTaskDoc get_task(const std::string& id, bool full) = 0;
  virtual std::vector<TesTaskDoc> list_tasks(bool full) = 0;
  virtual CancelOutcome cancel_task(const std::string& id) = 0;
  virtual Json service_info() = 0;
};

// In-process service for one site. All methods throw NodeUnreachable while
// the site is down, mirroring a network partition.
class TesNode : public TesService {
 public:
  TesNode(Engine& engine, SiteRegistry& sites, Backend& backend, SiteId site,
          std::string node_id);

  std::string create_task(const TaskSpec& spec) override;
  TesTaskDoc get_task(const std::string& id, bool full) override;
  std::vector<TesTaskDoc> list_tasks(bool full) override;
  CancelOutcome cancel_task(const std::string& id) override;
  Json service_info() override;

  const SiteId& site() const { return site_; }
  const std::string& node_id() const { return node_id_; }

 private:
  Engine& engine_;
  SiteRegistry& sites_;
  Backend& backend_;
  SiteId site_;
  std::string node_id_;
  TaskValidator validator_;
  std::map<std::string, TesTaskDoc> docs_;
  std::uint64_t next_task_ = 1;

  void check_reachable() const;
};

enum class RouteCostModel { bytes, time };

struct RoutingDecision {
  std::string chosen_node;
  double cost = 0.0;
  // (node_id, cost) sorted ascending by (cost, site, node_id).
  std::vector<std::pair<std::string, double>> alternatives;
};

class TesGateway : public TesService {
 public:
  // engine may be null (live deployment): routing still works, event-log
  // notes are skipped. now_fn supplies the clock for heartbeat aging.
  // sites is required only for the time cost model.
  TesGateway(std::string name, std::function<double()> now_fn,
             double heartbeat_timeout_s,
             RouteCostModel cost_model = RouteCostModel::bytes,
             Engine* engine = nullptr, const SiteRegistry* sites = nullptr);

  void register_node(std::string node_id, SiteId site, TesService& svc);
  void heartbeat(const std::string& node_id);
  bool healthy(const std::string& node_id) const;
  std::vector<std::string> node_ids() const;

  // Pure routing decision over currently healthy nodes; does not forward.
  RoutingDecision route(const TaskSpec& spec) const;

  std::string create_task(const TaskSpec& spec) override;
  TesTaskDoc get_task(const std::string& id, bool full) override;
  std::vector<TesTaskDoc> list_tasks(bool full) override;
  CancelOutcome cancel_task(const std::string& id) override;
  Json service_info() override;

 private:
  struct NodeEntry {
    SiteId site;
    TesService* service = nullptr;
    double last_heartbeat = 0.0;
    bool reported_up = true;  // last health state noted to the log
  };

  std::string name_;
  std::function<double()> now_fn_;
  double heartbeat_timeout_s_;
  RouteCostModel cost_model_;
  Engine* engine_;
  const SiteRegistry* sites_;
  std::map<std::string, NodeEntry> nodes_;
  std::map<std::string, std::string> owner_;  // task id -> node id
  std::map<std::string, TesTaskDoc> cache_;   // last-known docs

  double node_cost(const TaskSpec& spec, const NodeEntry& n) const;
  void note(const std::string& kind, Json fields);
  void mark_unreachable(const std::string& node_id);
  void observe_health(const std::string& node_id, bool up);
};

}  // namespace hybridmesh
