// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
//
// Scatter-gather workflow driver. One dataset is split into content-
// addressed batches; one map task per batch produces a deterministic
// output object; a final gather task consumes every map output. The same
// workflow runs under six orchestration modes:
//
//   manual                static proportional split across site backends
//   federated             autonomous per-site workers claiming batches from
//                         the metadata repo (optimistic CAS + leases)
//   federated-controller  a single controller claims and pushes batches
//   overlay               one batch cluster with a partition per site
//   overflow              primary executor with capacity spill to a
//                         batch backend
//   gateway               tasks routed through the TES-style gateway by
//                         input locality
//
// Because map outputs are pure functions of batch ids, all modes must
// produce identical final manifests; compare_runs checks exactly that.
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hybridmesh/engine.hpp"
#include "hybridmesh/executors.hpp"
#include "hybridmesh/metadata_repo.hpp"
#include "hybridmesh/sites.hpp"
#include "hybridmesh/store.hpp"
#include "hybridmesh/task.hpp"
#include "hybridmesh/tes.hpp"

namespace hybridmesh {

enum class RunMode {
  MANUAL,
  FEDERATED,
  FEDERATED_CONTROLLER,
  OVERLAY,
  OVERFLOW,
  GATEWAY,
};

const char* to_string(RunMode m);
RunMode run_mode_from_string(const std::string& s);

struct WorkflowSpec {
  std::int64_t batch_count = 1;
  std::int64_t batch_size_bytes = 0;
  double map_duration_s = 0.0;
  double gather_duration_s = 0.0;
  std::int64_t retry_limit = 2;
  std::string dataset_id = "dataset";
  // Batches that deterministically fail with a nonzero exit (by id).
  std::vector<std::string> poisoned;
  // Batches modelled as multi-node jobs (ineligible for overflow spill).
  std::vector<std::string> multi_node_batches;
  // Pinned input homes (batch id -> site); unlisted batches go round-robin.
  std::map<std::string, SiteId> homes;
  // Single home for every batch (overrides round-robin; homes map wins).
  SiteId scatter_home;
  // Partition pins for overlay mode (batch id -> partition name).
  std::map<std::string, std::string> pins;
};

struct RunReport {
  bool success = false;
  double makespan_s = 0.0;
  std::map<SiteId, std::int64_t> tasks_per_site;  // completed executions
  std::int64_t bytes_transferred_total = 0;
  std::int64_t retries = 0;
  std::int64_t claim_conflicts = 0;
  std::vector<std::string> starved;
  std::vector<std::string> failed_batches;
  Json final_manifest = Json::array();

  Json to_json() const;
};

// Everything a driver needs, pre-wired by the scenario runner (or by a
// test directly). Only the members the selected mode uses must be set.
struct RunContext {
  Engine* engine = nullptr;
  SiteRegistry* sites = nullptr;
  ObjectStore* store = nullptr;

  std::map<SiteId, Backend*> site_backends;  // manual/federated/gateway
  BatchCluster* cluster = nullptr;           // overlay
  OverflowRouter* router = nullptr;          // overflow
  TesGateway* gateway = nullptr;             // gateway
  std::map<std::string, TesNode*> nodes;     // gateway: node_id -> node
  SimRepo* repo = nullptr;                   // federated modes

  SiteId common_site;        // gather destination; default first site
  bool consolidate = true;   // move outputs to common_site at the end
  double poll_interval_s = 1.0;
  double heartbeat_interval_s = 5.0;
  double lease_s = 0.0;      // 0 = derive from durations and link speeds
  SiteId controller_site;    // federated-controller; default first site
};

// Largest-remainder split of `total` items proportional to weights,
// deterministic with ties broken by key order. Returned in key order.
std::vector<std::pair<SiteId, std::int64_t>> proportional_split(
    const std::vector<std::pair<SiteId, std::int64_t>>& weights,
    std::int64_t total);

class WorkflowDriver {
 public:
  WorkflowDriver(RunContext ctx, WorkflowSpec spec, RunMode mode);

  // Runs the workflow to completion on the context's engine and returns
  // the report. Drives engine.run_until_idle() internally.
  RunReport run();

  // Deterministic batch split; exposed for tests.
  std::vector<DataRef> scatter();

  static std::string batch_id(std::int64_t index);
  static std::string map_output_name(const std::string& batch_id);
  static std::string gather_output_name(const std::string& dataset_id);

  // Pure oracle: the manifest any successful run must produce.
  static Json expected_manifest(const WorkflowSpec& spec);

  double effective_lease_s() const;

 private:
  struct BatchState {
    DataRef input;
    std::int64_t attempts = 0;  // workflow-level resubmissions (non-repo modes)
    bool done = false;
    bool failed = false;
    SiteId ran_at;  // site of the successful execution
    TaskState last_seen = TaskState::QUEUED;  // gateway poll observation
  };

  struct Worker {  // federated modes
    SiteId site;
    Backend* backend = nullptr;
    std::int64_t active = 0;
    std::vector<std::pair<std::string, std::int64_t>> snapshot;  // id, version
  };

  RunContext ctx_;
  WorkflowSpec spec_;
  RunMode mode_;

  std::map<std::string, BatchState> batches_;
  std::vector<std::string> batch_order_;
  std::map<std::string, Worker> workers_;
  bool done_ = false;
  bool failed_ = false;
  double done_at_ = 0.0;
  std::int64_t retries_ = 0;
  std::int64_t claim_conflicts_ = 0;
  std::map<SiteId, std::int64_t> completed_per_site_;
  bool gather_submitted_ = false;
  bool gather_done_ = false;
  bool gather_failed_ = false;
  std::int64_t gather_attempts_ = 0;
  SiteId gather_ran_at_;
  std::uint64_t last_progress_marker_ = 0;
  std::int64_t stalled_polls_ = 0;
  std::int64_t bytes_at_done_ = 0;
  std::vector<std::string> failed_snapshot_;
  std::vector<std::string> starved_snapshot_;
  std::unique_ptr<TaskValidator> validator_;

  // gateway mode
  std::map<std::string, std::string> tes_task_of_batch_;  // batch -> tes id
  std::string gather_tes_id_;

  void setup();
  void setup_static_modes();
  void setup_federated();
  void setup_gateway();

  TaskSpec map_task_spec(const std::string& batch_id,
                         const std::string& task_id) const;
  TaskSpec gather_task_spec(const std::string& task_id) const;
  std::vector<DataRef> gather_inputs() const;

  Backend* backend_for(const SiteId& site) const;
  void submit_map_static(const std::string& batch_id, Backend& backend,
                         const SubmitOptions& opts);
  void submit_gather_static();
  void on_map_terminal_static(const std::string& batch_id, Backend& backend,
                              const SubmitOptions& opts, TaskState s);
  void maybe_finish_map_phase();

  // federated
  void schedule_worker_poll(Worker& w, double at);
  void worker_snapshot(Worker& w);
  void worker_claim(Worker& w);
  void start_claimed_batch(Worker& w, const BatchRecord& rec);
  void schedule_controller_poll(double at);
  void controller_poll();
  void schedule_driver_poll(double at);
  void driver_poll();
  std::string gather_batch_id() const;

  // gateway
  void schedule_heartbeats();
  void heartbeat_tick(const std::string& node_id);
  void gateway_submit_map(const std::string& batch_id);
  void gateway_submit_gather();
  void schedule_gateway_poll(double at);
  void gateway_poll();

  void begin_consolidation();
  void finish(bool success);
  std::vector<std::string> final_object_ids() const;
  bool all_maps_succeeded() const;
  bool any_map_failed() const;
  std::uint64_t progress_marker() const;
};

// True iff both manifests list identical (object_id, size) pairs.
bool compare_runs(const RunReport& a, const RunReport& b);

}  // namespace hybridmesh
